"""Acceptance gate: the twelve headline checks of the package.

Each test prints one PASS/FAIL line (visible with -v via the test name and
on stdout with -s / in captured output).  Tolerances are part of the
contract and must not be loosened without revisiting the physics.
"""

import time

import numpy as np
import pytest

from qbm import fdgrid as fg
from qbm import oscbasis as ob
from qbm import runner
from qbm.analysis import FitFormulaParams, eval_fit_formula, fit_formula_calibrate
from qbm.config import parse_config
from qbm.meanfield import hartree_frequency, semiclassical_frequency
from qbm.model import SystemSpec
from qbm.observables import TimeSeries
from qbm.twoparticle import TwoParticleGrid, TwoParticleProblem

SQRT3 = float(np.sqrt(3.0))

_results = []


def _report(num, ok, detail):
    line = f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}"
    _results.append(line)
    print(line)
    assert ok, line


def _cfg(outdir, **over):
    base = {
        "system": {"dimension": 1, "coupling": 1.0,
                   "symmetry": "antisymmetric"},
        "solver": {"method": "basis", "n_basis": 60},
        "t_final": 120.0,
        "output_dir": outdir,
    }
    base.update(over)
    return parse_config(base)


def _diag_gap_1d(lam, n_b=300, softening=0.0, symmetry="antisymmetric"):
    spec = SystemSpec(coupling=lam, symmetry=symmetry, softening=softening)
    spec, _ = runner._effective_spec(spec)
    return ob.breathing_gap(ob.relative_hamiltonian(spec, n_b))


def _diag_gap_2d(lam, symmetry, n_points=4000):
    """Richardson-extrapolated radial sector gap (h^2 discretization)."""
    spec = SystemSpec(dimension=2, coupling=lam, symmetry=symmetry)
    m = 1 if symmetry == "antisymmetric" else 0
    g1 = fg.sector_gap(fg.radial_relative_problem(spec, m, n_points))
    g2 = fg.sector_gap(fg.radial_relative_problem(spec, m, 2 * n_points))
    return (4.0 * g2 - g1) / 3.0


@pytest.fixture(scope="module")
def outroot(tmp_path_factory):
    return str(tmp_path_factory.mktemp("acceptance"))


@pytest.fixture(scope="module")
def headline_run(outroot):
    """lam=1, 1D antisymmetric, switch-off, basis solver (shared)."""
    return runner.run_single(_cfg(outroot))


# -- 1: ideal limit ----------------------------------------------------------

def test_criterion_01_ideal_limit(outroot):
    t0 = time.time()
    failures = []
    for sym in ("antisymmetric", "symmetric"):
        system = {"dimension": 1, "coupling": 0.0, "symmetry": sym}
        rec = runner.run_single(_cfg(outroot, system=system))
        if abs(rec.report["omega_r"] - 2.0) > 1e-6:
            failures.append(f"1D {sym} basis {rec.report['omega_r']:.8f}")
        rec = runner.run_single(_cfg(
            outroot, system=system, t_final=60.0,
            solver={"method": "grid", "n_points": 2000, "dt": 0.005}))
        if abs(rec.report["omega_r"] - 2.0) > 1e-3:
            failures.append(f"1D {sym} grid {rec.report['omega_r']:.6f}")
        system2 = {"dimension": 2, "coupling": 0.0, "symmetry": sym}
        rec = runner.run_single(_cfg(
            outroot, system=system2, t_final=60.0,
            solver={"method": "grid", "n_points": 3000, "dt": 0.005}))
        if abs(rec.report["omega_r"] - 2.0) > 1e-3:
            failures.append(f"2D {sym} {rec.report['omega_r']:.6f}")
    elapsed = time.time() - t0
    if elapsed > 60.0:
        failures.append(f"runtime {elapsed:.0f}s > 60s")
    _report(1, not failures,
            failures or f"omega=2 in all ideal limits ({elapsed:.0f}s)")


# -- 2: headline two-frequency fit -------------------------------------------

def test_criterion_02_headline_frequencies(headline_run):
    wr = headline_run.report["omega_r"]
    wR = headline_run.report["omega_R"]
    ok = abs(wr - 1.901) <= 0.005 and abs(wR - 2.000) <= 0.003
    _report(2, ok, f"omega_r={wr:.5f} (1.901+-0.005), "
                   f"omega_R={wR:.5f} (2.000+-0.003)")


# -- 3: universality of omega_R ----------------------------------------------

def test_criterion_03_universal_com_mode(outroot):
    failures = []
    for lam in (0.1, 1.0, 10.0):
        for sym in ("antisymmetric", "symmetric"):
            rec = runner.run_single(_cfg(
                outroot,
                system={"dimension": 1, "coupling": lam, "symmetry": sym},
                solver={"method": "basis", "n_basis": 150}))
            if abs(rec.report["omega_R"] - 2.0) > 1e-3:
                failures.append(f"1D {sym} lam={lam}: "
                                f"{rec.report['omega_R']:.5f}")
            rec = runner.run_single(_cfg(
                outroot,
                system={"dimension": 2, "coupling": lam, "symmetry": sym},
                solver={"method": "grid", "n_points": 3000, "dt": 0.01}))
            if abs(rec.report["omega_R"] - 2.0) > 1e-3:
                failures.append(f"2D {sym} lam={lam}: "
                                f"{rec.report['omega_R']:.5f}")
    _report(3, not failures,
            failures or "omega_R = 2.000 +- 1e-3 at lam in {0.1,1,10}, "
                        "both symmetries and dimensions")


# -- 4: time-domain vs diagonalization ---------------------------------------

def test_criterion_04_dual_method(outroot, headline_run):
    rows = []
    for lam in (0.5, 1.0, 2.0):
        if lam == 1.0:
            wr = headline_run.report["omega_r"]
        else:
            rec = runner.run_single(_cfg(
                outroot, system={"dimension": 1, "coupling": lam,
                                 "symmetry": "antisymmetric"},
                solver={"method": "basis", "n_basis": 100}))
            wr = rec.report["omega_r"]
        gap = _diag_gap_1d(lam)
        rows.append((lam, wr, gap, abs(wr - gap)))
    worst = max(r[3] for r in rows)
    _report(4, worst <= 1e-3,
            "max |fit - gap| = {:.2e} over lam in {{0.5,1,2}}".format(worst))


# -- 5: classical asymptote --------------------------------------------------

def test_criterion_05_classical_limit():
    g100 = _diag_gap_1d(100.0, n_b=400)
    g200 = _diag_gap_1d(200.0, n_b=400)
    d100 = abs(g100 - SQRT3) / SQRT3
    d200 = abs(g200 - SQRT3) / SQRT3
    ok = d100 < 0.02 and d200 < d100
    _report(5, ok, f"gap(100)={g100:.5f} ({100 * d100:.2f}% from sqrt3), "
                   f"gap(200)={g200:.5f} ({100 * d200:.2f}%), monotone")


# -- 6: resonance spectroscopy -----------------------------------------------

def test_criterion_06_resonance_scan(outroot, headline_run):
    # a narrowband pulse (spectral width ~0.022) resolves the 0.096 doublet
    cfg = _cfg(
        outroot,
        excitation={"kind": "modulation", "frequency": 2.0, "depth": 5e-3,
                    "center": 300.0, "width": 2000.0},
        scan={"start": 1.7, "stop": 2.1, "step": 0.005})
    spectrum = runner.run_scan(cfg)
    peaks = spectrum.peaks()
    failures = []
    if spectrum.partial:
        failures.append(f"partial scan: {spectrum.failures}")
    if len(peaks) != 2:
        failures.append(f"{len(peaks)} peaks, expected 2")
    else:
        lo, hi = sorted(p.center for p in peaks)
        if abs(lo - 1.901) > 0.0075:
            failures.append(f"relative line at {lo:.4f}")
        if abs(hi - 2.000) > 0.0075:
            failures.append(f"CoM line at {hi:.4f}")
    # E_inf plateau ordering for drives at alpha * omega_r, sigma = 100
    wr = headline_run.report["omega_r"]
    absorbed = []
    for alpha in (0.95, 0.995, 1.0):
        rec = runner.run_single(_cfg(
            outroot, t_final=400.0,
            excitation={"kind": "modulation", "frequency": alpha * wr,
                        "depth": 5e-3, "center": 240.0, "width": 100.0}))
        absorbed.append(rec.report["absorbed"])
    if not absorbed[0] < absorbed[1] < absorbed[2]:
        failures.append(f"plateau ordering broken: {absorbed}")
    detail = failures or (
        "two peaks at {:.4f}/{:.4f}; E_inf ordering {:.2e} < {:.2e} < "
        "{:.2e}".format(*sorted(p.center for p in peaks), *absorbed))
    _report(6, not failures, detail)


# -- 7: mode merging at weak coupling ----------------------------------------

def test_criterion_07_mode_merging(outroot):
    cfg = _cfg(
        outroot,
        system={"dimension": 1, "coupling": 0.005,
                "symmetry": "antisymmetric"},
        excitation={"kind": "modulation", "frequency": 2.0, "depth": 5e-3,
                    "center": 100.0, "width": 100.0},
        scan={"start": 1.7, "stop": 2.1, "step": 0.01})
    spectrum = runner.run_scan(cfg)
    peaks = spectrum.peaks()
    ok = (not spectrum.partial and len(peaks) == 1
          and abs(peaks[0].center - 2.0) < 0.05)
    detail = (f"single merged peak at {peaks[0].center:.4f}" if peaks
              else "no peak found")
    if len(peaks) > 1:
        detail = f"{len(peaks)} peaks: {[round(p.center, 4) for p in peaks]}"
    _report(7, ok, detail)


# -- 8: 2D spin-statistics split ---------------------------------------------

def test_criterion_08_2d_split():
    anti = _diag_gap_2d(1.0, "antisymmetric")
    sym = _diag_gap_2d(1.0, "symmetric")
    one_d = _diag_gap_1d(1.0)
    split = (anti - sym) / 2.0  # fraction of omega_R = 2
    ok = (anti > sym and 0.03 <= split <= 0.07 and sym < one_d < anti)
    _report(8, ok, f"anti={anti:.5f}, sym={sym:.5f}, split={100 * split:.2f}% "
                   f"of omega_R; 1D curve {one_d:.5f} in between")


# -- 9: softened-potential pathology -----------------------------------------

def _softened_symmetric_curve(kappa, lams):
    gaps = []
    for lam in lams:
        spec = SystemSpec(coupling=lam, symmetry="symmetric",
                          softening=kappa)
        prob = fg.relative_halfline_problem(spec, parity_even=True,
                                            n_points=4000)
        gaps.append(fg.sector_gap(prob))
    return np.array(gaps)


def test_criterion_09_softening_pathology():
    lams = np.geomspace(0.02, 3.0, 25)
    anti = np.array([_diag_gap_1d(l, n_b=150) for l in lams])
    failures = []
    dips = {}
    for kappa in (0.1, 1e-3):
        sym = _softened_symmetric_curve(kappa, lams)
        below = anti - sym  # positive where the symmetric curve dips below
        k = int(np.argmax(below))
        dips[kappa] = (float(lams[k]), float(below[k]))
        if below[k] <= 0:
            failures.append(f"kappa={kappa}: no dip below antisymmetric")
        if lams[k] > 1.0:
            failures.append(f"kappa={kappa}: dip at lam={lams[k]:.2f} > 1")
        # nonmonotonic omega_r(lam): interior minimum
        j = int(np.argmin(sym))
        if j in (0, sym.size - 1):
            failures.append(f"kappa={kappa}: omega_r(lam) monotone")
    if not failures:
        if dips[1e-3][1] >= dips[0.1][1]:
            failures.append("smaller kappa did not shrink the dip")
        if dips[1e-3][0] >= dips[0.1][0]:
            failures.append("smaller kappa did not shift the dip to "
                            "smaller lam")
    _report(9, not failures,
            failures or "kappa=0.1 dip {:.4f} at lam={:.2f}; kappa=1e-3 dip "
                        "{:.4f} at lam={:.2f}".format(
                            dips[0.1][1], dips[0.1][0],
                            dips[1e-3][1], dips[1e-3][0]))


# -- 10: closed-form frequency formula ---------------------------------------

def test_criterion_10_fit_formula():
    rng = np.random.default_rng(42)
    failures = []
    for _ in range(50):
        p = FitFormulaParams(float(rng.uniform(0.05, 10)),
                             float(rng.uniform(-5, 5)))
        if abs(eval_fit_formula(p, 0.0) - 2.0) > 1e-12:
            failures.append(f"w(0) off for {p}")
        w_inf = p.a * np.exp(-np.pi / 2) + p.d
        if abs(w_inf - SQRT3) > 1e-12:
            failures.append(f"w(inf) off for {p}")
    lams = np.geomspace(0.1, 30.0, 25)
    gaps = np.array([_diag_gap_1d(l, n_b=300) for l in lams])
    params = fit_formula_calibrate(lams, gaps)
    dev = float(np.max(np.abs(eval_fit_formula(params, lams) - gaps)))
    if dev > 0.01:
        failures.append(f"calibrated deviation {dev:.4f} > 0.01")
    _report(10, not failures,
            failures or f"limits machine-exact; calibrated max deviation "
                        f"{dev:.4f} over lam in [0.1, 30]")


# -- 11: mean-field regimes --------------------------------------------------

def test_criterion_11_meanfield_regimes():
    failures = []
    for lam in (0.05, 0.1, 0.2, 0.3):
        model = hartree_frequency(SystemSpec(coupling=lam)).omega_r
        exact = _diag_gap_1d(lam, n_b=150)
        err = abs(model - exact) / exact
        if err > 0.01:
            failures.append(f"hartree lam={lam}: {100 * err:.2f}%")
    for lam in (50.0, 200.0, 1000.0):
        model = semiclassical_frequency(SystemSpec(coupling=lam),
                                        n_b=500).omega_r
        exact = _diag_gap_1d(lam, n_b=500)
        err = abs(model - exact) / exact
        if err > 0.02:
            failures.append(f"semiclassical lam={lam}: {100 * err:.2f}%")
    _report(11, not failures,
            failures or "hartree <= 1% for lam <= 0.3; "
                        "semiclassical <= 2% for lam >= 50")


# -- 12: property suite ------------------------------------------------------

def _separated_upot_trace(kappa, protocol_cfg, t_final, dt, sample_every):
    """U_pot(t) from the relative x CoM channels (basis, softened even
    sector)."""
    cfg = parse_config({
        "system": {"dimension": 1, "coupling": 1.0, "symmetry": "symmetric",
                   "softening": kappa},
        "solver": {"method": "basis", "n_basis": 80, "dt": dt},
        "excitation": protocol_cfg,
        "t_final": t_final,
        "sample_every": sample_every,
        "output_dir": "unused",
    })
    spec = cfg.system.to_spec()
    rel, com, _ = runner._build_channels(spec, cfg.solver)
    proto = cfg.excitation.to_protocol()
    rel_state, _ = rel.ground()
    com_state, _ = com.ground()
    t_r, s_r, _ = rel.propagate(rel_state, proto, t_final, dt, sample_every)
    _, s_c, _ = com.propagate(com_state, proto, t_final, dt, sample_every)
    return t_r, s_r["U"] + s_c["U"]


def _full_upot_trace(kappa, n, t_final, dt, sample_every):
    """U_pot(t) from the full (x1, x2) propagation at one resolution."""
    from qbm.excitation import SwitchOff
    spec = SystemSpec(coupling=1.0, symmetry="symmetric", softening=kappa)
    prob = TwoParticleProblem(spec, TwoParticleGrid(7.0, n))
    psi, _ = prob.ground_state(dtau=0.01, tol=1e-11)
    times, samples, _ = prob.propagate(
        psi, SwitchOff(t_on=1.0, duration=0.1), t_final, dt, sample_every,
        observers={"U": lambda p, f: prob.expectation_upot(p)})
    return times, samples["U"]


def test_criterion_12_property_suite(outroot):
    failures = []

    # norm drift < 1e-8 over 1e4 CN steps
    prob = fg.relative_halfline_problem(SystemSpec(coupling=1.0),
                                        parity_even=False, n_points=1500)
    psi, _ = prob.ground_state(parity="odd")
    evals, u = prob.eigenstates(2)
    psi = fg.LineWavefunction(prob.mesh,
                              (u[:, 0] + 0.3 * u[:, 1]).astype(complex))
    psi = psi.normalized()
    e_start = prob.energy(psi)
    for _ in range(10000):
        psi = prob.step(psi, 0.02)
    drift = abs(psi.norm() - 1.0)
    if drift > 1e-8:
        failures.append(f"norm drift {drift:.2e}")

    # energy conservation 1e-6 with a static trap (same propagation)
    e_drift = abs(prob.energy(psi) - e_start)
    if e_drift > 1e-6:
        failures.append(f"energy drift {e_drift:.2e}")

    # parity preservation 1e-8 on the full two-particle grid
    from qbm.excitation import SwitchOff
    spec = SystemSpec(coupling=1.0, symmetry="antisymmetric")
    tp = TwoParticleProblem(spec, TwoParticleGrid(7.0, 160))
    psi2, _ = tp.ground_state()
    _, _, psi2 = tp.propagate(psi2, SwitchOff(t_on=1.0, duration=0.1),
                              t_final=15.0, dt=0.01)
    parity_err = abs(psi2.exchange_parity() + 1.0)
    if parity_err > 1e-8:
        failures.append(f"parity error {parity_err:.2e}")

    # separability: full (x1, x2) propagation vs relative x CoM channels,
    # softened interaction so the symmetric sector is regular; the full-grid
    # trace is Richardson extrapolated in the spacing (h^2 scheme)
    kappa = 0.3
    proto_cfg = {"kind": "switch_off", "t_on": 1.0, "duration": 0.1}
    t_final, dt, se = 15.0, 0.0025, 40
    t_sep, u_sep = _separated_upot_trace(kappa, proto_cfg, t_final, dt, se)
    grids = (160, 240, 320)
    traces, t_a = {}, None
    for n in grids:
        t_a, traces[n] = _full_upot_trace(kappa, n, t_final, dt, se)
    # two-term (h^2, h^4) extrapolation of the full-grid trace
    hs = {n: 14.0 / n for n in grids}
    vander = np.array([[1.0, hs[n] ** 2, hs[n] ** 4] for n in grids])
    u_full = np.linalg.solve(vander,
                             np.array([traces[n] for n in grids]))[0]
    np.testing.assert_allclose(t_a, t_sep, atol=1e-9)
    sep_err = float(np.max(np.abs(u_full - u_sep)))
    if sep_err > 1e-5:
        failures.append(f"separability deviation {sep_err:.2e}")

    # grid/basis cross-method frequency agreement to 1e-3
    basis = runner.run_single(_cfg(outroot))
    grid = runner.run_single(_cfg(
        outroot, solver={"method": "grid", "n_points": 3000, "dt": 0.005}))
    cross = abs(basis.report["omega_r"] - grid.report["omega_r"])
    if cross > 1e-3:
        failures.append(f"cross-method frequency gap {cross:.2e}")

    _report(12, not failures,
            failures or f"norm {drift:.1e}, energy {e_drift:.1e}, parity "
                        f"{parity_err:.1e}, separability {sep_err:.1e}, "
                        f"cross-method {cross:.1e}")


def test_zz_summary():
    print()
    for line in _results:
        print(line)
