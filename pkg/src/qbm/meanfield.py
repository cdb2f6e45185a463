"""Semi-analytical limits for the coupling-dependent breathing frequency.

Small coupling: a Hartree-renormalized trap.  The pair interaction is
averaged over the densities of the ideal (coupling-free) states and fitted
to a harmonic form across the breathing ladder (the two states the monopole
couples), which renormalizes the confinement to Omega_eff and gives
omega_r = 2 * Omega_eff.  A plain pointwise curvature fit of the 1D Hartree
potential is ill-defined for the bare interaction (the potential diverges
pointwise), so the fit is taken in the breathing coordinate <r^2> instead.

Large coupling: a semiclassical model of two Gaussian density clouds.
Each particle is displaced by half the relative coordinate, so the
per-cloud width is half the relative ground-state width measured from
exact diagonalization.  The mean-field pair energy

    V(|d|) = integral dx1 dx2 n(x1) n(x2) / (x1 - x2 + |d|)

is a principal-value integral (symmetric-interval cancellation at the
pole); for Gaussian clouds of width sigma it has the closed form
dawsn(d / (2 sigma)) / sigma.  omega_r = sqrt(1 + 2 lam V''(d0)) at the
equilibrium separation d0, which reduces to the classical sqrt(3) as the
width goes to zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import dawsn

from .model import SystemSpec, classical_equilibrium_and_frequency
from . import oscbasis as ob
from . import fdgrid as fg

HARTREE_COUPLING_LIMIT = 1.0
SEMICLASSICAL_COUPLING_LIMIT = 10.0


class RegimeWarning(UserWarning):
    """Model evaluated outside its perturbative regime."""


@dataclass(frozen=True)
class HartreeResult:
    coupling: float
    omega_eff: float
    omega_r: float
    trap_curvature: float  # d<w>/d<r^2> across the breathing ladder


@dataclass(frozen=True)
class SemiclassicalResult:
    coupling: float
    gaussian_width: float  # per-cloud width (half the relative width)
    d0: float
    omega_r: float


def _ideal_breathing_pair(spec: SystemSpec):
    """(<w>, <r^2>) for the two ideal relative states the monopole couples."""
    if spec.dimension == 1:
        parity = ob.ODD if spec.symmetry.value == "antisymmetric" else ob.EVEN
        if parity == ob.EVEN and spec.softening == 0.0:
            raise ValueError("bare 1D symmetric Hartree average diverges; "
                             "use a finite softening or the Bose-Fermi mapping")
        w = ob.interaction_sector(spec, 2, parity)
        ns = ob.sector_indices(2, parity)
        r2 = ob.RELATIVE_LENGTH ** 2 * (2 * ns + 1) / 2.0
        return np.diag(w), r2
    m = 1 if spec.symmetry.value == "antisymmetric" else 0
    ideal = SystemSpec(dimension=2, coupling=0.0, symmetry=spec.symmetry)
    prob = fg.radial_relative_problem(ideal, m, n_points=4000, extent=16.0)
    _, states = prob.eigenstates(2)
    meas = prob.mesh.cell_measure()
    r = prob.mesh.centers
    unit = SystemSpec(dimension=2, coupling=1.0, symmetry=spec.symmetry,
                      softening=spec.softening,
                      interaction_exponent=spec.interaction_exponent)
    from .model import interaction_potential
    w_vals = interaction_potential(unit, r)
    w_avg = np.array([np.sum(np.abs(states[:, i]) ** 2 * w_vals * meas)
                      for i in range(2)])
    r2 = np.array([np.sum(np.abs(states[:, i]) ** 2 * r * r * meas)
                   for i in range(2)])
    return w_avg, r2


def hartree_frequency(spec: SystemSpec) -> HartreeResult:
    """Small-coupling breathing frequency from the renormalized trap.

    Valid perturbatively; warns above coupling 1.
    """
    lam = spec.coupling
    if lam > HARTREE_COUPLING_LIMIT:
        warnings.warn(f"Hartree model outside its regime (coupling={lam})",
                      RegimeWarning, stacklevel=2)
    if lam == 0.0:
        return HartreeResult(0.0, 1.0, 2.0, 0.0)
    w_avg, r2 = _ideal_breathing_pair(spec)
    curv = float((w_avg[1] - w_avg[0]) / (r2[1] - r2[0]))
    om_eff_sq = 1.0 + 4.0 * lam * curv
    if om_eff_sq <= 0:
        raise ValueError("non-positive effective trap curvature")
    om_eff = float(np.sqrt(om_eff_sq))
    return HartreeResult(lam, om_eff, 2.0 * om_eff, curv)


def gaussian_pair_energy(d: float, cloud_width: float) -> float:
    """Principal-value mean-field energy of two Gaussian clouds at distance d.

    cloud_width is the standard deviation of each one-particle density; the
    difference x1 - x2 of two independent clouds then has spread
    sqrt(2) * cloud_width.
    """
    if cloud_width <= 0:
        return 1.0 / d
    return float(dawsn(0.5 * d / cloud_width) / cloud_width)


def relative_ground_width(spec: SystemSpec, n_b: int = 400) -> tuple[float, float]:
    """(mean separation, rms width) of the relative ground state from exact
    diagonalization, measured on the positive half-line."""
    if spec.dimension == 1:
        h = ob.relative_hamiltonian(spec, n_b)
        state = ob.ground_state(h)
        r = np.linspace(1e-4, fg.default_relative_extent(spec), 6000)
        rho = np.abs(state.evaluate(r)) ** 2
        rho /= np.trapezoid(rho, r)
    else:
        m = 1 if spec.symmetry.value == "antisymmetric" else 0
        prob = fg.radial_relative_problem(spec, m, n_points=5000)
        _, states = prob.eigenstates(1)
        r = prob.mesh.centers
        rho = np.abs(states[:, 0]) ** 2 * prob.mesh.w_center()
        rho /= np.trapezoid(rho, r)
    mean = float(np.trapezoid(r * rho, r))
    width = float(np.sqrt(np.trapezoid((r - mean) ** 2 * rho, r)))
    return mean, width


def semiclassical_frequency(spec: SystemSpec, n_b: int = 400) -> SemiclassicalResult:
    """Large-coupling breathing frequency from the Gaussian-cloud model."""
    lam = spec.coupling
    if lam <= 0:
        raise ValueError("semiclassical model needs repulsion")
    if lam < SEMICLASSICAL_COUPLING_LIMIT:
        warnings.warn(f"semiclassical model outside its regime (coupling={lam})",
                      RegimeWarning, stacklevel=2)
    _, rel_width = relative_ground_width(spec, n_b)
    width = 0.5 * rel_width  # each particle carries half the relative motion
    r0, _ = classical_equilibrium_and_frequency(
        SystemSpec(dimension=spec.dimension, coupling=lam,
                   symmetry=spec.symmetry))

    def energy(d):
        return 0.25 * d * d + lam * gaussian_pair_energy(d, width)

    res = minimize_scalar(energy, bracket=(0.5 * r0, r0, 4.0 * r0 + 5.0))
    if not res.success or res.x <= 0:
        raise ValueError("no interior minimum of the mean-field energy")
    d0 = float(res.x)
    # V'' by Richardson-extrapolated central differences
    step = 1e-3 * d0

    def second(hh):
        return (gaussian_pair_energy(d0 + hh, width)
                - 2.0 * gaussian_pair_energy(d0, width)
                + gaussian_pair_energy(d0 - hh, width)) / (hh * hh)

    vpp = (4.0 * second(step) - second(2.0 * step)) / 3.0
    om_sq = 1.0 + 2.0 * lam * vpp
    if om_sq <= 0:
        raise ValueError("mean-field curvature is not confining")
    return SemiclassicalResult(lam, width, d0, float(np.sqrt(om_sq)))
