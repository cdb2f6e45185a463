"""Breathing-mode excitation protocols as time-dependent trap factors.

Both propagators consume the same scalar trap_factor(t) multiplying the
harmonic part of the Hamiltonian:

  switch-off:  factor = 0 inside [t_on, t_on + duration], 1 outside
  modulation:  factor = 1 + beta0 * exp(-(t - t0)^2 / (2 sigma)) * sin(w_ext t)

Note sigma has units of time^2 (the Gaussian envelope is written with
2*sigma, not 2*sigma^2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, asdict

import numpy as np

LINEAR_RESPONSE_DEPTH = 0.05


@dataclass(frozen=True)
class SwitchOff:
    """Protocol (I): briefly turn the trap off (spectrally broad kick)."""

    t_on: float = 1.0
    duration: float = 0.1

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.duration > 0.5:
            warnings.warn("switch duration > 0.5 is not spectrally broad "
                          "relative to the trap frequency", stacklevel=2)


@dataclass(frozen=True)
class Modulation:
    """Protocol (II): Gaussian-windowed periodic trap modulation."""

    frequency: float
    depth: float = 5e-3
    center: float = 240.0
    width: float = 100.0  # units of time^2

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.depth > LINEAR_RESPONSE_DEPTH:
            warnings.warn("modulation depth above the linear-response regime",
                          stacklevel=2)


Protocol = SwitchOff | Modulation


def trap_factor(protocol: Protocol | None, t: float) -> float:
    """Harmonic-term scale factor at time t (>= 0). None means no excitation."""
    if protocol is None:
        return 1.0
    if isinstance(protocol, SwitchOff):
        if protocol.t_on <= t <= protocol.t_on + protocol.duration:
            return 0.0
        return 1.0
    beta = (protocol.depth
            * np.exp(-(t - protocol.center) ** 2 / (2.0 * protocol.width))
            * np.sin(protocol.frequency * t))
    return 1.0 + float(beta)


def protocol_to_dict(protocol: Protocol | None) -> dict | None:
    if protocol is None:
        return None
    kind = "switch_off" if isinstance(protocol, SwitchOff) else "modulation"
    return {"kind": kind, **asdict(protocol)}


def protocol_from_dict(d: dict | None) -> Protocol | None:
    if d is None:
        return None
    d = dict(d)
    kind = d.pop("kind")
    if kind == "switch_off":
        return SwitchOff(**d)
    if kind == "modulation":
        return Modulation(**d)
    raise ValueError(f"unknown excitation kind: {kind!r}")
