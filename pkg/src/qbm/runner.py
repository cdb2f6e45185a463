"""Experiment driver: single runs, coupling sweeps, resonance scans and
plot-ready figure emission.

A run separates into independent relative and center-of-mass propagations
(the trap drive couples to both), so every observable of the pair problem
is assembled from the two channels: U_pot = <R^2> + <r^2>/4 and
E_tot = E_rel + E_com.  1D symmetric systems with a bare interaction are
served through the Bose-Fermi mapping (computed in the antisymmetric
sector, flagged in the output), since their even-sector matrix elements do
not exist.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from functools import partial

import numpy as np

from .model import SystemSpec, Symmetry
from .excitation import Modulation, SwitchOff, protocol_to_dict
from .config import RunConfig
from . import oscbasis as ob
from . import fdgrid as fg
from . import analysis
from . import meanfield
from .observables import TimeSeries, asymptotic_energy


class StageError(RuntimeError):
    """A run failed at a labeled stage (ground, propagate, fit, persist)."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


class EmitError(ValueError):
    pass


@dataclass
class RunRecord:
    config: dict
    config_hash: str
    series_path: str | None
    report: dict
    convergence: dict
    bose_fermi_mapping: bool = False
    stage_errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _effective_spec(spec: SystemSpec) -> tuple[SystemSpec, bool]:
    """Apply the Bose-Fermi mapping where the symmetric sector is singular."""
    if (spec.dimension == 1 and spec.symmetry == Symmetry.SYMMETRIC
            and spec.softening == 0.0 and spec.coupling > 0.0):
        mapped = SystemSpec(dimension=1, coupling=spec.coupling,
                            symmetry=Symmetry.ANTISYMMETRIC,
                            softening=0.0,
                            interaction_exponent=spec.interaction_exponent)
        return mapped, True
    return spec, False


def _abs_moment_matrix(n_b: int, parity: int, length: float) -> np.ndarray:
    """<n| |r| |n'> within one parity sector, by trapezoid quadrature."""
    ns = ob.sector_indices(n_b, parity)
    n_max = int(ns[-1]) + 1
    r_max = length * np.sqrt(2.0 * n_max + 1.0) + 8.0 * length
    nodes = np.linspace(0.0, r_max, 8001)[1:]
    dr = nodes[1] - nodes[0]
    funcs = ob.eigenfunctions(n_max, nodes, length)[ns]
    return 2.0 * (funcs * (nodes * dr)) @ funcs.T


# -- solver backends ---------------------------------------------------------

class _BasisChannel:
    """Relative or CoM problem in the oscillator basis."""

    def __init__(self, h: ob.SectorHamiltonian, upot_coeff: float):
        self.h = h
        self.r2 = ob.position_sq_sector(h.n_b, h.parity, h.length)
        self.absr = _abs_moment_matrix(h.n_b, h.parity, h.length)
        self.upot_coeff = upot_coeff

    def ground(self):
        state = ob.ground_state(self.h)
        evals = np.linalg.eigvalsh(self.h.matrix())
        return state, float(evals[0])

    def propagate(self, state, protocol, t_final, dt, sample_every):
        def quad(op):
            return lambda c, f: float(np.real(np.vdot(c, op @ c)))

        observers = {
            "U": lambda c, f: self.upot_coeff * float(
                np.real(np.vdot(c, self.r2 @ c))),
            "absr": quad(self.absr),
            "E": lambda c, f: float(np.real(np.vdot(c, self.h.matrix(f) @ c))),
            "norm": lambda c, f: float(np.linalg.norm(c)),
        }
        # smooth drives: quantize the trap factor so the step cache hits
        resolution = (protocol.depth / 500.0
                      if isinstance(protocol, Modulation) else 0.0)
        return ob.propagate(state, self.h, protocol, t_final, dt,
                            sample_every, observers=observers,
                            factor_resolution=resolution)


class _GridChannel:
    """Relative or CoM problem on a finite-difference mesh."""

    def __init__(self, problem: fg.LineProblem, upot_coeff: float,
                 frame: str, parity: str, angular_momentum: int = 0):
        self.problem = problem
        self.upot_coeff = upot_coeff
        self.frame = frame
        self.parity = parity
        self.angular_momentum = angular_momentum

    def ground(self):
        return self.problem.ground_state(self.frame, self.parity,
                                         self.angular_momentum)

    def propagate(self, state, protocol, t_final, dt, sample_every):
        observers = {
            "U": lambda p, f: self.upot_coeff * p.expect_position_moment(2),
            "absr": lambda p, f: p.expect_position_moment(1, absolute=True),
            "E": lambda p, f: self.problem.energy(p, f),
            "norm": lambda p, f: p.norm(),
        }
        return self.problem.propagate(state, protocol, t_final, dt,
                                      sample_every, observers=observers)


def _com_radial_problem(n_points: int = 1500, extent: float = 8.0):
    """2D center-of-mass problem -(1/4) lap + R^2, m = 0 radial channel."""
    mesh = fg.radial_mesh(extent, n_points)
    R = mesh.centers
    return fg.LineProblem(mesh, R * R, np.zeros_like(R), kinetic_coeff=0.25)


def _build_channels(spec: SystemSpec, solver) -> tuple:
    """(relative channel, com channel, convergence probe)."""
    if spec.dimension == 1 and solver.method == "basis":
        h = ob.relative_hamiltonian(spec, solver.n_basis)
        rel = _BasisChannel(h, 0.25)
        com = _BasisChannel(ob.com_hamiltonian(solver.n_basis), 1.0)

        def probe(scale):
            n = max(8, int(solver.n_basis * scale))
            return ob.breathing_gap(ob.relative_hamiltonian(spec, n))

        return rel, com, probe
    if spec.dimension == 1:
        parity_even = spec.symmetry == Symmetry.SYMMETRIC

        def rel_problem(n):
            return fg.relative_halfline_problem(spec, parity_even, n,
                                                solver.extent)

        rel = _GridChannel(rel_problem(solver.n_points), 0.25, "relative",
                           "even" if parity_even else "odd")
        com = _GridChannel(fg.com_line_problem(), 1.0, "com", "even")

        def probe(scale):
            return fg.sector_gap(rel_problem(max(200, int(solver.n_points * scale))))

        return rel, com, probe
    # 2D: radial m-channel reduction for either solver choice
    m = 1 if spec.symmetry == Symmetry.ANTISYMMETRIC else 0

    def rel_problem(n):
        return fg.radial_relative_problem(spec, m, n, solver.extent)

    rel = _GridChannel(rel_problem(solver.n_points), 0.25, "radial",
                       "even" if m % 2 == 0 else "odd", angular_momentum=m)
    com = _GridChannel(_com_radial_problem(), 1.0, "radial", "even")

    def probe(scale):
        return fg.sector_gap(rel_problem(max(200, int(solver.n_points * scale))))

    return rel, com, probe


# -- drivers -----------------------------------------------------------------

def ground_info(config: RunConfig) -> dict:
    """Ground-state energies of both channels (no propagation)."""
    spec, mapped = _effective_spec(config.system.to_spec())
    rel, com, _ = _build_channels(spec, config.solver)
    try:
        _, e_rel = rel.ground()
        _, e_com = com.ground()
    except Exception as exc:
        raise StageError("ground", exc) from exc
    return {
        "config_hash": config.config_hash(),
        "system": config.system.model_dump(),
        "solver": config.solver.method,
        "E_relative": e_rel,
        "E_com": e_com,
        "E_total": e_rel + e_com,
        "bose_fermi_mapping": mapped,
    }


def run_single(config: RunConfig) -> RunRecord:
    """Ground state, excitation, propagation, observables, fit, persistence."""
    spec, mapped = _effective_spec(config.system.to_spec())
    protocol = (config.excitation.to_protocol()
                if config.excitation is not None else None)
    record = RunRecord(config=config.model_dump(),
                       config_hash=config.config_hash(),
                       series_path=None, report={}, convergence={},
                       bose_fermi_mapping=mapped)
    rel, com, probe = _build_channels(spec, config.solver)
    try:
        rel_state, e_rel = rel.ground()
        com_state, e_com = com.ground()
    except Exception as exc:
        record.stage_errors.append(["ground", repr(exc)])
        raise StageError("ground", exc) from exc

    dt, se = config.solver.dt, config.sample_every
    try:
        t_r, s_r, _ = rel.propagate(rel_state, protocol, config.t_final, dt, se)
        t_c, s_c, _ = com.propagate(com_state, protocol, config.t_final, dt, se)
    except Exception as exc:
        record.stage_errors.append(["propagate", repr(exc)])
        raise StageError("propagate", exc) from exc
    if t_r.shape != t_c.shape or np.max(np.abs(t_r - t_c)) > 1e-12:
        raise StageError("propagate",
                         RuntimeError("channel sampling times diverged"))

    channels = {
        "U_pot": s_r["U"] + s_c["U"],
        "abs_r": s_r["absr"],
        "E_tot": s_r["E"] + s_c["E"],
        "E_rel": s_r["E"],
        "norm_rel": s_r["norm"],
        "norm_com": s_c["norm"],
    }
    meta = {
        "config": config.model_dump(),
        "config_hash": config.config_hash(),
        "protocol": protocol_to_dict(protocol),
        "bose_fermi_mapping": mapped,
        "E0": e_rel + e_com,
    }
    series = TimeSeries(t_r, channels, meta)

    report: dict = {"E0": e_rel + e_com, "E0_relative": e_rel, "E0_com": e_com}
    try:
        if isinstance(protocol, Modulation):
            report["E_inf"] = asymptotic_energy(series)
            report["absorbed"] = report["E_inf"] - report["E0"]
        else:
            t_fit = (protocol.t_on + protocol.duration
                     if isinstance(protocol, SwitchOff) else 0.0)
            fit = analysis.fit_two_modes(series.window(t_fit + 1e-9))
            report.update({
                "omega_r": fit.omega_r, "omega_R": fit.omega_R,
                "amplitude_r": abs(fit.a), "amplitude_R": abs(fit.b),
                "residual_rms": fit.residual_rms, "merged": fit.merged,
            })
    except Exception as exc:
        record.stage_errors.append(["fit", repr(exc)])
        raise StageError("fit", exc) from exc

    try:
        gap_full = probe(1.0)
        gap_half = probe(0.5)
        record.convergence = {
            "solver": config.solver.model_dump(),
            "diag_gap": gap_full,
            "diag_gap_half_resolution": gap_half,
            "delta": abs(gap_full - gap_half),
        }
    except Exception as exc:  # noqa: BLE001 - metadata must not kill the run
        record.convergence = {"error": repr(exc)}

    record.report = report
    try:
        os.makedirs(config.output_dir, exist_ok=True)
        base = os.path.join(config.output_dir, f"run_{record.config_hash}")
        series.save(base + ".txt")
        record.series_path = base + ".txt"
        with open(base + ".json", "w") as fh:
            json.dump(record.to_dict(), fh, indent=1, sort_keys=True)
    except OSError as exc:
        record.stage_errors.append(["persist", repr(exc)])
        raise StageError("persist", exc) from exc
    return record


# -- sweeps ------------------------------------------------------------------

def _sweep_point(config_json: str, lam: float) -> dict:
    config = RunConfig.model_validate_json(config_json)
    config = config.model_copy(update={
        "couplings": None,
        "system": config.system.model_copy(update={"coupling": lam})})
    record = run_single(config)
    point = {"coupling": lam, **record.report,
             "bose_fermi_mapping": record.bose_fermi_mapping,
             "record": record.config_hash}
    return point


def run_sweep(config: RunConfig) -> dict:
    """One run per coupling via the worker pool; partial results preserved."""
    if not config.couplings:
        raise EmitError("sweep requires a couplings axis")
    lams = list(config.couplings)
    worker = partial(_sweep_point, config.canonical_json())
    points: list = [None] * len(lams)
    failures = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {i: pool.submit(worker, lam)
                       for i, lam in enumerate(lams)}
            for i, fut in futures.items():
                try:
                    points[i] = fut.result()
                except Exception as exc:  # noqa: BLE001 - per-point isolation
                    failures.append({"coupling": lams[i], "error": repr(exc)})
    else:
        for i, lam in enumerate(lams):
            try:
                points[i] = worker(lam)
            except Exception as exc:  # noqa: BLE001
                failures.append({"coupling": lam, "error": repr(exc)})
    points = [p for p in points if p is not None]
    curve = {
        "config_hash": config.config_hash(),
        "system": config.system.model_dump(),
        "points": points,
        "failures": failures,
        "partial": bool(failures),
    }
    os.makedirs(config.output_dir, exist_ok=True)
    base = os.path.join(config.output_dir, f"sweep_{config.config_hash()}")
    with open(base + ".json", "w") as fh:
        json.dump(curve, fh, indent=1, sort_keys=True)
    cols = ["coupling", "omega_r", "omega_R", "amplitude_r", "amplitude_R"]
    rows = [[p.get(c, np.nan) for c in cols] for p in points]
    np.savetxt(base + ".txt", np.asarray(rows, dtype=float),
               header=" ".join(cols), fmt="%.10e")
    curve["curve_path"] = base + ".txt"
    curve["json_path"] = base + ".json"
    return curve


# -- resonance scans ---------------------------------------------------------

def _scan_point(config_json: str, omega_ext: float) -> float:
    """E_inf - E_0 for one drive frequency (picklable worker)."""
    from .config import ExcitationModel

    config = RunConfig.model_validate_json(config_json)
    kwargs = {"kind": "modulation", "frequency": omega_ext}
    if config.excitation is not None and config.excitation.kind == "modulation":
        kwargs.update(depth=config.excitation.depth,
                      center=config.excitation.center,
                      width=config.excitation.width)
    mod = ExcitationModel(**kwargs)
    config = config.model_copy(update={"scan": None, "excitation": mod})
    t_needed = mod.center + 9.0 * np.sqrt(mod.width) + 60.0
    config = config.model_copy(update={"t_final": max(config.t_final, t_needed),
                                       "output_dir": os.path.join(
                                           config.output_dir, "scan_points")})
    record = run_single(config)
    return float(record.report["absorbed"])


def run_scan(config: RunConfig) -> analysis.ResonanceSpectrum:
    """Resonance absorption spectrum E_inf(omega_ext) at fixed coupling."""
    if config.scan is None:
        raise EmitError("scan requires a scan axis (start/stop/step)")
    grid = config.scan.grid()
    sim = partial(_scan_point, config.canonical_json())
    spectrum = analysis.scan_resonance(sim, grid, config.system.coupling,
                                       config.system.symmetry,
                                       workers=config.workers)
    os.makedirs(config.output_dir, exist_ok=True)
    base = os.path.join(config.output_dir, f"scan_{config.config_hash()}")
    np.savetxt(base + ".txt",
               np.column_stack([spectrum.omegas, spectrum.energies]),
               header="omega_ext E_inf_minus_E0", fmt="%.10e")
    summary = {
        "config_hash": config.config_hash(),
        "coupling": spectrum.coupling,
        "symmetry": spectrum.symmetry,
        "partial": spectrum.partial,
        "failures": spectrum.failures,
        "peaks": [asdict(p) for p in spectrum.peaks()],
        "scan_path": base + ".txt",
    }
    with open(base + ".json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    return spectrum


# -- mean-field and fit-formula drivers --------------------------------------

def meanfield_eval(config: RunConfig, model: str = "both") -> dict:
    spec, mapped = _effective_spec(config.system.to_spec())
    out: dict = {"coupling": spec.coupling, "bose_fermi_mapping": mapped}
    if model in ("hartree", "both"):
        res = meanfield.hartree_frequency(spec)
        out["hartree"] = {"omega_r": res.omega_r, "omega_eff": res.omega_eff,
                          "trap_curvature": res.trap_curvature}
    if model in ("semiclassical", "both"):
        res = meanfield.semiclassical_frequency(spec)
        out["semiclassical"] = {"omega_r": res.omega_r, "d0": res.d0,
                                "gaussian_width": res.gaussian_width}
    return out


def gap_curve(config: RunConfig, lams) -> tuple[np.ndarray, np.ndarray]:
    """Diagonalization breathing gaps over a coupling axis (1D basis path)."""
    spec0, _ = _effective_spec(config.system.to_spec())
    gaps = []
    for lam in lams:
        spec = SystemSpec(dimension=spec0.dimension, coupling=float(lam),
                          symmetry=spec0.symmetry, softening=spec0.softening,
                          interaction_exponent=spec0.interaction_exponent)
        spec, _ = _effective_spec(spec)
        if spec.dimension == 1:
            h = ob.relative_hamiltonian(spec, config.solver.n_basis)
            gaps.append(ob.breathing_gap(h))
        else:
            m = 1 if spec.symmetry == Symmetry.ANTISYMMETRIC else 0
            prob = fg.radial_relative_problem(spec, m, config.solver.n_points,
                                              config.solver.extent)
            gaps.append(fg.sector_gap(prob))
    return np.asarray(lams, dtype=float), np.asarray(gaps)


def fit_formula_from_curve(lams, omegas) -> dict:
    params = analysis.fit_formula_calibrate(lams, omegas)
    model = analysis.eval_fit_formula(params, np.asarray(lams, dtype=float))
    dev = np.abs(model - np.asarray(omegas, dtype=float))
    return {
        "b": params.b, "c": params.c, "a": params.a, "d": params.d,
        "omega_at_0": analysis.eval_fit_formula(params, 0.0),
        "omega_at_inf": float(params.a * np.exp(-np.pi / 2) + params.d),
        "max_deviation": float(np.max(dev)),
    }


# -- figure emission ---------------------------------------------------------

FIGURE_REQUIREMENTS = {
    "fig1": "one run summary JSON from a switch-off run (run_*.json)",
    "fig3": "one or more sweep summary JSONs (sweep_*.json)",
    "fig4": "one or more 1D sweep summary JSONs (softened symmetric vs "
            "antisymmetric)",
    "fig5": "one or more 2D sweep summary JSONs (optionally the 1D curve)",
}


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def figure_emit(figure_id: str, inputs: list[str], out_path: str) -> dict:
    """Write the plot-ready columnar file for one paper-style figure."""
    if figure_id not in FIGURE_REQUIREMENTS:
        raise EmitError(f"unknown figure {figure_id!r}; "
                        f"choose from {sorted(FIGURE_REQUIREMENTS)}")
    if not inputs:
        raise EmitError(f"{figure_id} needs inputs: "
                        f"{FIGURE_REQUIREMENTS[figure_id]}")
    if figure_id == "fig1":
        record = _load_json(inputs[0])
        if "series_path" not in record or not record.get("series_path"):
            raise EmitError("fig1 input must be a run summary with a "
                            "time-series path")
        series = TimeSeries.load(record["series_path"])
        rep = record["report"]
        if "omega_r" not in rep:
            raise EmitError("fig1 needs a fitted switch-off run")
        fit = analysis.TwoModeFit(rep["amplitude_r"], rep["omega_r"], 0.0,
                                  rep["amplitude_R"], rep["omega_R"], 0.0,
                                  0.0, rep["residual_rms"])
        # refit phases/offset against the stored series for the overlay curve
        fit = analysis.fit_two_modes(
            series, initial_guesses=(rep["omega_r"], rep["omega_R"]))
        u = series["U_pot"]
        a = series["abs_r"]
        data = np.column_stack([series.times, u - np.mean(u),
                                a - np.mean(a), fit(series.times) - fit.f0])
        np.savetxt(out_path, data,
                   header="time dU_pot dabs_r fit_U", fmt="%.10e")
        return {"figure": figure_id, "out_path": out_path, "rows": len(data)}
    # curve figures: merge sweep points over coupling
    rows = []
    for path in inputs:
        sweep = _load_json(path)
        if "points" not in sweep:
            raise EmitError(f"{path} is not a sweep summary")
        label = (f"{sweep['system']['dimension']}d_"
                 f"{sweep['system']['symmetry']}")
        for p in sweep["points"]:
            rows.append((p["coupling"], p.get("omega_r", np.nan),
                         p.get("omega_R", np.nan), label))
    if not rows:
        raise EmitError(f"{figure_id}: inputs contain no sweep points; "
                        f"needs {FIGURE_REQUIREMENTS[figure_id]}")
    rows.sort(key=lambda r: (r[3], r[0]))
    with open(out_path, "w") as fh:
        fh.write("# coupling omega_r omega_R curve\n")
        for lam, wr, wR, label in rows:
            fh.write(f"{lam:.10e} {wr:.10e} {wR:.10e} {label}\n")
    return {"figure": figure_id, "out_path": out_path, "rows": len(rows)}
