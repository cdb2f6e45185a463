"""Time-dependent expectation values and their persistent record.

A TimeSeries holds uniformly sampled channels (U_pot, abs_x, E_tot, norm,
...) and round-trips through a columnar text file whose header carries the
full run configuration as one JSON line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import SystemSpec


@dataclass
class TimeSeries:
    times: np.ndarray
    channels: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        self.channels = {k: np.asarray(v, dtype=float)
                         for k, v in self.channels.items()}
        for k, v in self.channels.items():
            if v.shape != self.times.shape:
                raise ValueError(f"channel {k!r} length mismatch")

    def __getitem__(self, key: str) -> np.ndarray:
        return self.channels[key]

    def window(self, t_min: float, t_max: float = np.inf) -> "TimeSeries":
        sel = (self.times >= t_min) & (self.times <= t_max)
        return TimeSeries(self.times[sel],
                          {k: v[sel] for k, v in self.channels.items()},
                          self.meta)

    def save(self, path: str) -> None:
        names = sorted(self.channels)
        header = ("config: " + json.dumps(self.meta, sort_keys=True)
                  + "\ncolumns: time " + " ".join(names))
        data = np.column_stack([self.times] + [self.channels[k] for k in names])
        np.savetxt(path, data, header=header, fmt="%.16e")

    @classmethod
    def load(cls, path: str) -> "TimeSeries":
        meta, names = {}, None
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                body = line[1:].strip()
                if body.startswith("config:"):
                    meta = json.loads(body[len("config:"):])
                elif body.startswith("columns:"):
                    names = body[len("columns:"):].split()
        data = np.loadtxt(path, ndmin=2)
        if names is None:
            names = ["time"] + [f"c{i}" for i in range(data.shape[1] - 1)]
        channels = {n: data[:, i] for i, n in enumerate(names) if n != "time"}
        return cls(data[:, 0], channels, meta)


# -- expectation values ------------------------------------------------------
#
# Grid wavefunctions know their own moments; these helpers put the physics
# names on them.  For separated runs the single-particle potential energy of
# the full system is <R^2> + <r^2>/4 and the two contributions are recorded
# per problem and summed by the runner.

def expectation_upot(psi, problem=None) -> float:
    """<sum_i r_i^2/2> at unit trap factor."""
    from .twoparticle import TwoParticleWavefunction
    from .fdgrid import LineWavefunction
    if isinstance(psi, TwoParticleWavefunction):
        return problem.expectation_upot(psi)
    if isinstance(psi, LineWavefunction):
        if psi.frame == "com":
            return psi.expect_position_moment(2)
        return 0.25 * psi.expect_position_moment(2)
    raise TypeError(f"unsupported wavefunction type {type(psi)!r}")


def expectation_absx(psi, problem=None) -> float:
    """Mean absolute coordinate: (|x1|+|x2|)/2 on two-particle grids, the
    radial mean on relative/CoM problems."""
    from .twoparticle import TwoParticleWavefunction
    from .fdgrid import LineWavefunction
    if isinstance(psi, TwoParticleWavefunction):
        return problem.expectation_absx(psi)
    if isinstance(psi, LineWavefunction):
        return psi.expect_position_moment(1, absolute=True)
    raise TypeError(f"unsupported wavefunction type {type(psi)!r}")


def total_energy(psi, problem, trap_factor: float = 1.0) -> float:
    """<T> + <V> with the current trap factor."""
    return problem.energy(psi, trap_factor)


def asymptotic_energy(series: TimeSeries, window: float = 50.0,
                      channel: str = "E_tot") -> float:
    """E_inf: mean total energy over the final `window` time units."""
    t_end = series.times[-1]
    tail = series.window(t_end - window)
    return float(np.mean(tail[channel]))


def sampling_interval(omega_max: float = 2.0, oversample: int = 20) -> float:
    """Cadence that oversamples the fastest breathing mode `oversample`-fold."""
    return float(np.pi / (oversample * omega_max))


def make_meta(spec: SystemSpec, **extra) -> dict:
    meta = {"system": spec.to_dict()}
    meta.update(extra)
    return meta
