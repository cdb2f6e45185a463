"""Oscillator-basis representation of the relative and center-of-mass problems.

The relative Hamiltonian  H = p^2 + r^2/4 + lam*w(r)  is expanded in the
eigenfunctions of its lam=0 part (length scale sqrt(2)), the CoM Hamiltonian
H = p^2/4 + R^2 in its own eigenbasis (length scale 1/sqrt(2)), so the
harmonic part is exactly diagonal.  Parity sectors are kept separate: a
sector matrix of size n_b addresses oscillator indices parity, parity+2, ...

Interaction matrix elements <n| (r^2+kappa^2)^(-l/2) |n'> are computed by
panel Gauss-Legendre quadrature with geometric refinement towards r = 0 and
are checked for convergence by doubling the panel count.
"""

from __future__ import annotations

import hashlib
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .model import SystemSpec
from .excitation import Protocol, trap_factor

RELATIVE_LENGTH = np.sqrt(2.0)  # l0 of the half-mass (relative) oscillator
COM_LENGTH = 1.0 / np.sqrt(2.0)  # l0 of the double-mass (CoM) oscillator

EVEN, ODD = 0, 1


class DivergentElementError(ValueError):
    """Requested matrix elements do not exist (1D even sector, bare Coulomb).

    Use the Bose-Fermi mapping: compute in the antisymmetric (odd) sector
    instead.
    """


class BasisTruncationError(RuntimeError):
    """Propagated state leaks into the top of the truncated basis."""


def eigenfunctions(n_max: int, x: np.ndarray, length: float) -> np.ndarray:
    """Normalized oscillator eigenfunctions psi_0..psi_{n_max-1} at points x.

    Returns an array of shape (n_max, len(x)).  The three-term recurrence is
    carried with a per-node scaling exponent so large n and |x| do not
    underflow.
    """
    y = np.asarray(x, dtype=float) / length
    out = np.empty((n_max, y.size), dtype=float)
    # scaled values v_n = h_n(y) * exp(-L), L starts at -y^2/2 so v_0 = pi^-1/4
    L = -0.5 * y * y
    v_prev = np.zeros_like(y)
    v = np.full_like(y, np.pi ** -0.25)
    out[0] = v * np.exp(L)
    for n in range(1, n_max):
        v_next = np.sqrt(2.0 / n) * y * v - np.sqrt((n - 1.0) / n) * v_prev
        v_prev, v = v, v_next
        big = np.abs(v) > 1e250
        if np.any(big):
            v[big] *= 1e-250
            v_prev[big] *= 1e-250
            L[big] += 250 * np.log(10.0)
        out[n] = v * np.exp(L)
    return out / np.sqrt(length)


def sector_indices(n_b: int, parity: int) -> np.ndarray:
    """Oscillator indices spanned by a parity sector of size n_b."""
    return parity + 2 * np.arange(n_b)


def _tridiag_sector(n_b: int, parity: int, diag_fn, off_fn) -> np.ndarray:
    ns = sector_indices(n_b, parity)
    m = np.diag(diag_fn(ns))
    off = off_fn(ns[:-1])
    m += np.diag(off, 1) + np.diag(off, -1)
    return m


def kinetic_sector(n_b: int, parity: int, length: float, coeff: float = 1.0):
    """Sector matrix of coeff * p^2 in the basis of given length scale."""
    c = coeff / (2.0 * length * length)
    return _tridiag_sector(
        n_b, parity,
        lambda n: c * (2 * n + 1),
        lambda n: -c * np.sqrt((n + 1.0) * (n + 2.0)))


def harmonic_sector(n_b: int, parity: int, length: float, coeff: float = 1.0):
    """Sector matrix of coeff * x^2."""
    c = coeff * length * length / 2.0
    return _tridiag_sector(
        n_b, parity,
        lambda n: c * (2 * n + 1),
        lambda n: c * np.sqrt((n + 1.0) * (n + 2.0)))


def position_sq_sector(n_b: int, parity: int, length: float):
    return harmonic_sector(n_b, parity, length, 1.0)


def _quadrature_nodes(kappa: float, n_panels: int, r_max: float):
    """Panel edges geometric near 0 (resolving the kappa scale), then uniform."""
    r_inner = min(max(kappa, 1e-8), 0.5)
    n_geo = max(n_panels // 3, 8)
    geo = r_inner * 10.0 ** np.linspace(-4, 0, n_geo + 1)
    uni = np.linspace(r_inner, r_max, max(n_panels, 16) + 1)[1:]
    edges = np.concatenate(([0.0], geo, uni))
    gx, gw = np.polynomial.legendre.leggauss(12)
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    weights = (half[:, None] * gw[None, :]).ravel()
    return nodes, weights


def _interaction_sector_once(kappa, ell, n_b, parity, length, n_panels):
    ns = sector_indices(n_b, parity)
    n_max = int(ns[-1]) + 1
    r_max = length * np.sqrt(2.0 * n_max + 1.0) + 8.0 * length
    nodes, weights = _quadrature_nodes(kappa, n_panels, r_max)
    funcs = eigenfunctions(n_max, nodes, length)[ns]
    w_vals = (nodes * nodes + kappa * kappa) ** (-0.5 * ell)
    # even integrand (same-parity product): 2 * integral over [0, inf)
    return 2.0 * (funcs * (w_vals * weights)) @ funcs.T


_memory_cache: dict = {}


def interaction_sector(spec: SystemSpec, n_b: int, parity: int,
                       length: float = RELATIVE_LENGTH,
                       cache_dir: str | None = None,
                       rtol: float = 1e-8) -> np.ndarray:
    """Sector matrix of (r^2 + kappa^2)^(-l/2) at unit coupling.

    Elements are lam-independent; callers scale by spec.coupling.  Raises
    DivergentElementError for the bare 1D even sector, whose elements of
    1/|r| do not exist.
    """
    kappa, ell = spec.softening, spec.interaction_exponent
    if kappa == 0.0 and parity == EVEN and ell >= 1.0:
        raise DivergentElementError(
            "even-sector elements of the bare interaction diverge; "
            "use the Bose-Fermi mapping (odd sector)")
    key = (round(kappa, 12), round(ell, 12), n_b, parity, round(length, 12))
    if key in _memory_cache:
        return _memory_cache[key]
    if cache_dir is not None:
        tag = hashlib.sha1(repr(key).encode()).hexdigest()[:16]
        path = os.path.join(cache_dir, f"wmat_{tag}.npz")
        if os.path.exists(path):
            mat = np.load(path)["w"]
            _memory_cache[key] = mat
            return mat
    n_panels = max(64, 2 * n_b)
    w = _interaction_sector_once(kappa, ell, n_b, parity, length, n_panels)
    w2 = _interaction_sector_once(kappa, ell, n_b, parity, length, 2 * n_panels)
    scale = np.max(np.abs(w2))
    if np.max(np.abs(w2 - w)) > rtol * scale:
        w = w2
        w2 = _interaction_sector_once(kappa, ell, n_b, parity, length,
                                      4 * n_panels)
        if np.max(np.abs(w2 - w)) > rtol * scale:
            raise RuntimeError("interaction quadrature failed to converge")
    w2 = 0.5 * (w2 + w2.T)
    _memory_cache[key] = w2
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        np.savez_compressed(path, w=w2)
    return w2


@dataclass
class SectorHamiltonian:
    """Dense symmetric Hamiltonian of one parity sector.

    H(t) = kinetic + trap_factor(t) * harmonic + coupling * interaction.
    """

    kinetic: np.ndarray
    harmonic: np.ndarray
    interaction: np.ndarray  # at unit coupling
    coupling: float
    parity: int
    length: float
    frame: str  # "relative" | "com"

    @property
    def n_b(self) -> int:
        return self.kinetic.shape[0]

    def matrix(self, factor: float = 1.0) -> np.ndarray:
        h = self.kinetic + factor * self.harmonic
        if self.coupling != 0.0:
            h = h + self.coupling * self.interaction
        return h


def relative_hamiltonian(spec: SystemSpec, n_b: int,
                         cache_dir: str | None = None,
                         parity: int | None = None) -> SectorHamiltonian:
    """Relative-coordinate Hamiltonian p^2 + r^2/4 + lam*w(r), one sector.

    The sector defaults to the parity matching spec.symmetry (odd for
    antisymmetric exchange).  Only valid for 1D systems.
    """
    if spec.dimension != 1:
        raise ValueError("oscillator-basis path covers 1D relative problems")
    if parity is None:
        parity = ODD if spec.symmetry.value == "antisymmetric" else EVEN
    kin = kinetic_sector(n_b, parity, RELATIVE_LENGTH, 1.0)
    harm = harmonic_sector(n_b, parity, RELATIVE_LENGTH, 0.25)
    if spec.coupling != 0.0:
        w = interaction_sector(spec, n_b, parity, cache_dir=cache_dir)
    else:
        w = np.zeros((n_b, n_b))
    return SectorHamiltonian(kin, harm, w, spec.coupling, parity,
                             RELATIVE_LENGTH, "relative")


def com_hamiltonian(n_b: int, parity: int = EVEN) -> SectorHamiltonian:
    """Center-of-mass Hamiltonian p^2/4 + R^2 (coupling-independent)."""
    kin = kinetic_sector(n_b, parity, COM_LENGTH, 0.25)
    harm = harmonic_sector(n_b, parity, COM_LENGTH, 1.0)
    return SectorHamiltonian(kin, harm, np.zeros((n_b, n_b)), 0.0, parity,
                             COM_LENGTH, "com")


def diagonalize(h: SectorHamiltonian, factor: float = 1.0):
    """Full spectrum (ascending) and eigenvectors of the sector Hamiltonian."""
    m = h.matrix(factor)
    if np.max(np.abs(m - m.T)) > 1e-10 * max(np.max(np.abs(m)), 1.0):
        raise ValueError("Hamiltonian matrix is not symmetric")
    return eigh(m)


def breathing_gap(h: SectorHamiltonian) -> float:
    """Monopole (breathing) frequency: gap between the two lowest states of
    the sector, i.e. states two oscillator levels apart."""
    vals = eigh(h.matrix(), eigvals_only=True, subset_by_index=(0, 1))
    return float(vals[1] - vals[0])


def ground_state(h: SectorHamiltonian) -> "BasisState":
    _, vecs = diagonalize(h)
    return BasisState(vecs[:, 0].astype(complex), h.parity, h.length, h.frame)


@dataclass
class BasisState:
    """Coefficient vector over one parity sector of an oscillator basis."""

    coefficients: np.ndarray
    parity: int
    length: float
    frame: str

    @property
    def n_b(self) -> int:
        return self.coefficients.size

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Position-space amplitudes sum_n c_n psi_n(x)."""
        ns = sector_indices(self.n_b, self.parity)
        funcs = eigenfunctions(int(ns[-1]) + 1, np.atleast_1d(x), self.length)
        return self.coefficients @ funcs[ns]

    def expect(self, op: np.ndarray) -> float:
        c = self.coefficients
        return float(np.real(np.vdot(c, op @ c)))


def propagate(state: BasisState, h: SectorHamiltonian,
              protocol: Protocol | None, t_final: float, dt: float,
              sample_every: int = 1, t_start: float = 0.0,
              leak_tol: float = 1e-6, observers: dict | None = None,
              factor_resolution: float = 0.0):
    """Advance a basis state to t_final with the midpoint-exponential rule.

    Each step applies exp(-i*dt*H(t_mid)); for static stretches the
    eigendecomposition is cached, so switch-off protocols cost two
    decompositions.  With factor_resolution > 0 the trap factor is rounded
    to that resolution, so smooth modulations also hit the cache (the drive
    amplitude error is bounded by the resolution).  Returns (times, samples,
    final_state) where samples maps observer name -> array.  Raises
    BasisTruncationError when the population of the top 5% of the basis
    exceeds leak_tol at a sample time.
    """
    observers = observers or {}
    c = state.coefficients.astype(complex).copy()
    n_steps = int(round((t_final - t_start) / dt))
    n_top = max(1, int(0.05 * c.size))
    eig_cache: dict = {}
    times, samples = [], {k: [] for k in observers}

    def quantize(f: float) -> float:
        if factor_resolution > 0:
            return round(f / factor_resolution) * factor_resolution
        return f

    def record(t, factor):
        pop_top = float(np.sum(np.abs(c[-n_top:]) ** 2))
        if pop_top > leak_tol:
            raise BasisTruncationError(
                f"basis leakage {pop_top:.2e} at t={t:.2f}")
        times.append(t)
        for k, fn in observers.items():
            samples[k].append(fn(c, factor))

    record(t_start, trap_factor(protocol, t_start))
    for i in range(n_steps):
        t_mid = t_start + (i + 0.5) * dt
        f = quantize(trap_factor(protocol, t_mid))
        key = round(f, 15)
        if key not in eig_cache:
            if len(eig_cache) > 4096:
                eig_cache.clear()
            eig_cache[key] = eigh(h.matrix(f))
        evals, vecs = eig_cache[key]
        c = vecs @ (np.exp(-1j * dt * evals) * (vecs.T @ c))
        if (i + 1) % sample_every == 0 or i == n_steps - 1:
            t = t_start + (i + 1) * dt
            record(t, trap_factor(protocol, t))
    out_state = BasisState(c, state.parity, state.length, state.frame)
    return np.array(times), {k: np.array(v) for k, v in samples.items()}, out_state


def imaginary_time_ground(h: SectorHamiltonian, dtau: float = 0.05,
                          tol: float = 1e-12, max_iter: int = 20000):
    """Lowest sector state by repeated exp(-dtau*H) and renormalization.

    Provided as the basis-space counterpart of grid imaginary time stepping;
    direct diagonalization (ground_state) is the production path.
    """
    evals, vecs = diagonalize(h)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(h.n_b)
    c /= np.linalg.norm(c)
    a = vecs.T @ c
    e_prev = np.inf
    for it in range(max_iter):
        a = a * np.exp(-dtau * (evals - evals[0]))
        a /= np.linalg.norm(a)
        e = float(np.sum(evals * a * a))
        if abs(e - e_prev) < tol:
            break
        e_prev = e
    else:
        warnings.warn("imaginary-time iteration hit max_iter", stacklevel=2)
    return BasisState((vecs @ a).astype(complex), h.parity, h.length, h.frame), e
