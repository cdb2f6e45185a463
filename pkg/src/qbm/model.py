"""Physical system definition in dimensionless trap units (hbar = m = Omega = 1).

Two identical particles in an isotropic harmonic trap with a repulsive
power-law pair interaction,

    V(r1, r2) = r1^2/2 + r2^2/2 + lam / (|r1 - r2|^2 + kappa^2)^(l/2).

All lengths are in units of the oscillator length l0, times in 1/Omega and
energies in hbar*Omega, so no unit conversion appears anywhere.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, asdict

import numpy as np


class Symmetry(str, enum.Enum):
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"


class SingularPotentialError(ValueError):
    """Bare interaction evaluated at zero particle separation."""


@dataclass(frozen=True)
class SystemSpec:
    """Problem definition: trap dimension, coupling and interaction shape.

    coupling is the dimensionless ratio of mean interaction energy to the
    trap quantum; softening regularizes the interaction at contact;
    interaction_exponent is the inverse power l of the repulsion (l=1 is
    Coulomb). The trap frequency is fixed at 1 by the unit system.
    """

    dimension: int = 1
    coupling: float = 0.0
    symmetry: Symmetry = Symmetry.ANTISYMMETRIC
    softening: float = 0.0
    interaction_exponent: float = 1.0
    trap_frequency: float = field(default=1.0, init=False)

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.coupling < 0:
            raise ValueError("coupling must be non-negative")
        if self.softening < 0:
            raise ValueError("softening must be non-negative")
        if self.interaction_exponent <= 0:
            raise ValueError("interaction_exponent must be positive")
        # accept plain strings for convenience
        object.__setattr__(self, "symmetry", Symmetry(self.symmetry))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["symmetry"] = self.symmetry.value
        d.pop("trap_frequency")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        d = dict(d)
        d.pop("trap_frequency", None)
        return cls(**d)


def interaction_potential(spec: SystemSpec, r):
    """Pair interaction lam / (r^2 + kappa^2)^(l/2) at separation(s) r."""
    r = np.asarray(r, dtype=float)
    lam, kap, ell = spec.coupling, spec.softening, spec.interaction_exponent
    if lam == 0.0:
        return np.zeros_like(r)
    s2 = r * r + kap * kap
    if kap == 0.0 and np.any(s2 == 0.0):
        raise SingularPotentialError(
            "bare interaction evaluated at zero separation (kappa = 0)")
    return lam * s2 ** (-0.5 * ell)


def total_potential(spec: SystemSpec, r1, r2):
    """Total potential of Eq. for two particles at positions r1, r2.

    Positions may be scalars (1D) or arrays whose last axis is the spatial
    dimension.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if not (np.all(np.isfinite(r1)) and np.all(np.isfinite(r2))):
        raise ValueError("positions must be finite")
    if spec.dimension > 1 and r1.ndim > 0 and r1.shape[-1] == spec.dimension:
        sq1 = np.sum(r1 * r1, axis=-1)
        sq2 = np.sum(r2 * r2, axis=-1)
        sep = np.linalg.norm(r1 - r2, axis=-1)
    else:
        sq1, sq2, sep = r1 * r1, r2 * r2, np.abs(r1 - r2)
    val = 0.5 * sq1 + 0.5 * sq2 + interaction_potential(spec, sep)
    return float(val) if val.ndim == 0 else val


def relative_potential(spec: SystemSpec, r):
    """Potential of the relative-coordinate problem: r^2/4 + interaction."""
    r = np.asarray(r, dtype=float)
    val = 0.25 * r * r + interaction_potential(spec, np.abs(r))
    return float(val) if val.ndim == 0 else val


def com_potential(R):
    """Potential of the center-of-mass problem (coupling-independent)."""
    R = np.asarray(R, dtype=float)
    val = R * R
    return float(val) if val.ndim == 0 else val


def to_relative_com(r1, r2):
    """(r1, r2) -> (r, R) with r = r1 - r2, R = (r1 + r2)/2."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    return r1 - r2, 0.5 * (r1 + r2)


def from_relative_com(r, R):
    """Exact inverse of to_relative_com."""
    r = np.asarray(r, dtype=float)
    R = np.asarray(R, dtype=float)
    return R + 0.5 * r, R - 0.5 * r


def classical_equilibrium_and_frequency(spec: SystemSpec) -> tuple[float, float]:
    """Classical equilibrium separation and small-oscillation frequency.

    Minimizes the bare relative potential r^2/4 + lam/r^l and returns
    (r0, omega) with omega^2 = V''(r0)/mu, mu = 1/2.  In closed form
    r0 = (2*l*lam)^(1/(l+2)) and omega = sqrt(l + 2); for the Coulomb case
    l = 1 this is the classical breathing frequency sqrt(3).
    """
    lam, ell = spec.coupling, spec.interaction_exponent
    if lam <= 0:
        raise ValueError("no interaction-stabilized minimum for coupling <= 0")
    if spec.softening != 0:
        raise ValueError("classical limit is defined for the bare potential")
    r0 = (2.0 * ell * lam) ** (1.0 / (ell + 2.0))
    # curvature of r^2/4 + lam * r^-l at r0, effective mass 1/2
    vpp = 0.5 + ell * (ell + 1.0) * lam * r0 ** (-ell - 2.0)
    omega = float(np.sqrt(2.0 * vpp))
    return float(r0), omega
