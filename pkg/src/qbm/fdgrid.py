"""Finite-difference line and radial problems: meshes, eigensolvers and
Crank-Nicolson propagation.

Problems are discretized in finite-volume (Sturm-Liouville) form

    H u = -(c / w) d/dr ( w du/dr ) + V(r) u

on cell centers, with weight w(r) = 1 on a line and w(r) = r for the 2D
radial reduction.  A diagonal similarity turns H into a symmetric
tridiagonal matrix, so eigensolves use eigh_tridiagonal and the CN step is a
single banded solve.  The radial weight makes the centrifugal-free m = 0
channel regular at the origin without special-casing u(0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.linalg import lapack

from .model import SystemSpec, relative_potential, interaction_potential
from .excitation import Protocol, trap_factor


@dataclass
class Mesh:
    """Cell-centered 1D mesh with explicit cell edges.

    edges has len(centers)+1 entries; boundary conditions are attached at
    the first/last edge: 'dirichlet' (hard wall / odd parity), 'neumann'
    (even parity at r=0) or 'natural' (zero weight at the axis, w(0)=0).
    """

    edges: np.ndarray
    weight: str = "line"  # "line" | "radial"
    bc_inner: str = "dirichlet"
    bc_outer: str = "dirichlet"
    centers: np.ndarray = field(init=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.centers = 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def n(self) -> int:
        return self.centers.size

    @property
    def spacing(self) -> float:
        return float(np.max(np.diff(self.edges)))

    def w_center(self) -> np.ndarray:
        if self.weight == "line":
            return np.ones(self.n)
        return self.centers

    def w_edge(self) -> np.ndarray:
        if self.weight == "line":
            return np.ones(self.edges.size)
        return self.edges

    def cell_measure(self) -> np.ndarray:
        """Integration weights: w(r_i) * dr_i."""
        return self.w_center() * np.diff(self.edges)


def uniform_line(extent: float, n_points: int) -> Mesh:
    """Symmetric line mesh on [-extent, extent], hard walls."""
    return Mesh(np.linspace(-extent, extent, n_points + 1), "line")


def half_line(extent: float, n_points: int, parity_even: bool,
              graded_from: float | None = None) -> Mesh:
    """Half-line mesh on [0, extent] for a fixed-parity line problem.

    Even parity uses a zero-flux inner condition, odd parity u(0)=0.  With
    graded_from, cells are geometrically refined towards the origin down to
    that scale (needed to resolve small softening lengths).
    """
    if graded_from is None:
        edges = np.linspace(0.0, extent, n_points + 1)
    else:
        n_geo = max(16, int(4 * np.log10(1.0 / graded_from)) * 4)
        geo = graded_from * (1.0 / graded_from) ** np.linspace(0, 1, n_geo)
        geo = geo[geo < 1.0]
        uni = np.linspace(1.0, extent, n_points + 1)
        edges = np.concatenate(([0.0], geo, uni))
    return Mesh(edges, "line", bc_inner="neumann" if parity_even else "dirichlet")


def radial_mesh(extent: float, n_points: int) -> Mesh:
    """Cell-centered radial mesh on [0, extent]; the axis edge carries zero
    weight, so no inner boundary condition is needed."""
    return Mesh(np.linspace(0.0, extent, n_points + 1), "radial",
                bc_inner="natural")


def tridiag_hamiltonian(mesh: Mesh, potential: np.ndarray,
                        kinetic_coeff: float = 1.0):
    """Symmetric tridiagonal (diag, offdiag) of the finite-volume operator.

    The similarity transform is u_hat = sqrt(cell_measure) * u; the returned
    matrix acts on u_hat and the discrete norm is plain sum(|u_hat|^2).
    """
    h_edge = np.diff(0.5 * (np.concatenate((mesh.edges[:1], mesh.centers,
                                            mesh.edges[-1:]))))
    # distance between adjacent centers at interior edges
    dc = np.diff(mesh.centers)
    we = mesh.w_edge()
    meas = mesh.cell_measure()
    flux = kinetic_coeff * we[1:-1] / dc  # interior edge conductances
    diag = np.zeros(mesh.n)
    diag[:-1] += flux
    diag[1:] += flux
    # boundary closures: dirichlet couples to a ghost value 0 at the edge
    if mesh.bc_inner == "dirichlet" and we[0] != 0.0:
        diag[0] += kinetic_coeff * we[0] / (mesh.centers[0] - mesh.edges[0])
    if mesh.bc_outer == "dirichlet" and we[-1] != 0.0:
        diag[-1] += kinetic_coeff * we[-1] / (mesh.edges[-1] - mesh.centers[-1])
    off = -flux / np.sqrt(meas[:-1] * meas[1:])
    diag = diag / meas + potential
    del h_edge
    return diag, off


def eigensolve(mesh: Mesh, potential: np.ndarray, kinetic_coeff: float = 1.0,
               n_states: int | None = None):
    """Lowest eigenpairs; eigenvectors returned as physical u on centers,
    normalized with the mesh measure."""
    diag, off = tridiag_hamiltonian(mesh, potential, kinetic_coeff)
    if n_states is None:
        evals, evecs = eigh_tridiagonal(diag, off)
    else:
        evals, evecs = eigh_tridiagonal(diag, off, select="i",
                                        select_range=(0, n_states - 1))
    u = evecs / np.sqrt(mesh.cell_measure())[:, None]
    return evals, u


@dataclass
class LineWavefunction:
    """Complex amplitudes on a mesh, with parity metadata."""

    mesh: Mesh
    amplitudes: np.ndarray
    frame: str = "relative"  # "relative" | "com" | "radial"
    parity: str = "none"  # "even" | "odd" | "none"
    angular_momentum: int = 0

    def norm(self) -> float:
        meas = self.mesh.cell_measure()
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2 * meas)))

    def normalized(self) -> "LineWavefunction":
        return LineWavefunction(self.mesh, self.amplitudes / self.norm(),
                                self.frame, self.parity, self.angular_momentum)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def expect_position_moment(self, power: int = 2,
                               absolute: bool = False) -> float:
        r = np.abs(self.mesh.centers) if absolute else self.mesh.centers
        meas = self.mesh.cell_measure()
        return float(np.sum(r ** power * self.density() * meas))

    def measured_parity(self) -> float:
        """<psi|P|psi> under r -> -r; only meaningful on symmetric line meshes."""
        if self.frame == "radial":
            return 1.0 if self.angular_momentum % 2 == 0 else -1.0
        meas = self.mesh.cell_measure()
        flipped = self.amplitudes[::-1]
        return float(np.real(np.sum(np.conj(self.amplitudes) * flipped * meas)))


class LineProblem:
    """One fixed 1D problem: mesh + kinetic coefficient + potential split
    into a trap part (scaled by the excitation factor) and the rest."""

    def __init__(self, mesh: Mesh, trap_part: np.ndarray,
                 static_part: np.ndarray, kinetic_coeff: float = 1.0):
        self.mesh = mesh
        self.trap_part = np.asarray(trap_part, dtype=float)
        self.static_part = np.asarray(static_part, dtype=float)
        self.kinetic_coeff = kinetic_coeff
        self._sqrt_meas = np.sqrt(mesh.cell_measure())
        self._kin = tridiag_hamiltonian(mesh, np.zeros(mesh.n), kinetic_coeff)
        self._factor_cache: dict = {}

    def potential(self, factor: float = 1.0) -> np.ndarray:
        return factor * self.trap_part + self.static_part

    def hamiltonian(self, factor: float = 1.0):
        diag, off = self._kin
        return diag + self.potential(factor), off

    def eigenstates(self, n_states: int = 4, factor: float = 1.0):
        evals, evecs = eigh_tridiagonal(*self.hamiltonian(factor), select="i",
                                        select_range=(0, n_states - 1))
        return evals, evecs / self._sqrt_meas[:, None]

    def ground_state(self, frame="relative", parity="none",
                     angular_momentum=0) -> tuple[LineWavefunction, float]:
        evals, u = self.eigenstates(1)
        psi = LineWavefunction(self.mesh, u[:, 0].astype(complex), frame,
                               parity, angular_momentum)
        return psi.normalized(), float(evals[0])

    # -- Crank-Nicolson stepping ------------------------------------------

    def _cn_factorization(self, z: complex, factor: float):
        """LU of (1 + z*H) for the banded solve; cached per (z, factor)."""
        key = (z, round(factor, 15))
        if key not in self._factor_cache:
            if len(self._factor_cache) > 64:
                self._factor_cache.clear()
            diag, off = self.hamiltonian(factor)
            dl = (z * off).astype(complex)
            d = (1.0 + z * diag).astype(complex)
            du = dl.copy()
            res = lapack.zgttrf(dl, d, du)
            self._factor_cache[key] = res[:5]
        return self._factor_cache[key]

    def _apply(self, z: complex, factor: float, u_hat: np.ndarray):
        diag, off = self.hamiltonian(factor)
        out = (1.0 + z * diag) * u_hat
        out[:-1] += z * off * u_hat[1:]
        out[1:] += z * off * u_hat[:-1]
        return out

    def step(self, psi: LineWavefunction, dt: float, factor: float = 1.0,
             imaginary: bool = False) -> LineWavefunction:
        """One time step; imaginary=True applies t -> -i*tau and renormalizes.

        Real time uses Crank-Nicolson (unitary).  Imaginary time uses
        backward Euler: the CN amplification |(1-zE)/(1+zE)| tends back to 1
        for grid modes with E >> 1/z, so on fine meshes CN imaginary time
        converges to the top of the spectrum instead of the ground state.
        Backward Euler's 1/(1+dt*E) is monotone in E and has no such mode.
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        u_hat = psi.amplitudes * self._sqrt_meas
        if imaginary:
            z = complex(dt)
            rhs = u_hat.astype(complex)
        else:
            z = 0.5j * dt
            rhs = self._apply(-z, factor, u_hat)
        dl, d, du, du2, ipiv = self._cn_factorization(z, factor)
        u_new, info = lapack.zgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise RuntimeError(f"banded solve failed (info={info})")
        out = LineWavefunction(self.mesh, u_new / self._sqrt_meas, psi.frame,
                               psi.parity, psi.angular_momentum)
        return out.normalized() if imaginary else out

    def energy(self, psi: LineWavefunction, factor: float = 1.0) -> float:
        u_hat = psi.amplitudes * self._sqrt_meas
        diag, off = self.hamiltonian(factor)
        h_u = diag * u_hat
        h_u[:-1] += off * u_hat[1:]
        h_u[1:] += off * u_hat[:-1]
        n2 = float(np.real(np.vdot(u_hat, u_hat)))
        return float(np.real(np.vdot(u_hat, h_u))) / n2

    def imaginary_time_ground(self, psi0: LineWavefunction, dtau: float = 0.01,
                              tol: float = 1e-12, max_iter: int = 100000):
        """Repeated imaginary-time CN steps until the energy stalls."""
        psi = psi0.normalized()
        e_prev = self.energy(psi)
        for _ in range(max_iter):
            psi = self.step(psi, dtau, imaginary=True)
            e = self.energy(psi)
            if abs(e - e_prev) < tol * max(abs(e), 1.0):
                return psi, e
            e_prev = e
        raise RuntimeError("imaginary time stepping did not converge")

    def propagate(self, psi: LineWavefunction, protocol: Protocol | None,
                  t_final: float, dt: float, sample_every: int = 1,
                  t_start: float = 0.0, observers: dict | None = None):
        """Real-time CN propagation with sampled observables.

        Returns (times, samples, final_state) like the basis propagator.
        """
        observers = observers or {}
        n_steps = int(round((t_final - t_start) / dt))
        times, samples = [], {k: [] for k in observers}

        def record(t, f):
            times.append(t)
            for k, fn in observers.items():
                samples[k].append(fn(psi, f))

        record(t_start, trap_factor(protocol, t_start))
        for i in range(n_steps):
            t_mid = t_start + (i + 0.5) * dt
            psi = self.step(psi, dt, factor=trap_factor(protocol, t_mid))
            if (i + 1) % sample_every == 0 or i == n_steps - 1:
                t = t_start + (i + 1) * dt
                record(t, trap_factor(protocol, t))
        return np.array(times), {k: np.array(v) for k, v in samples.items()}, psi


# -- problem factories ------------------------------------------------------

def default_relative_extent(spec: SystemSpec) -> float:
    if spec.coupling > 0 and spec.softening == 0.0:
        from .model import classical_equilibrium_and_frequency
        r0, _ = classical_equilibrium_and_frequency(spec)
        return 4.0 * r0 + 10.0
    return 12.0


def relative_line_problem(spec: SystemSpec, n_points: int = 1200,
                          extent: float | None = None) -> LineProblem:
    """Full-line relative problem -d2/dr2 + r^2/4 + lam*w(r) (1D)."""
    if extent is None:
        extent = default_relative_extent(spec)
    mesh = uniform_line(extent, n_points)
    r = mesh.centers
    trap = 0.25 * r * r
    static = interaction_potential(spec, np.abs(r)) if spec.coupling else np.zeros_like(r)
    return LineProblem(mesh, trap, static, kinetic_coeff=1.0)


def relative_halfline_problem(spec: SystemSpec, parity_even: bool,
                              n_points: int = 3000,
                              extent: float | None = None,
                              graded_from: float | None = None) -> LineProblem:
    """Half-line relative problem with a parity boundary condition at r=0.

    The workhorse for sector eigenvalues, including small softening lengths
    via a graded mesh.
    """
    if extent is None:
        extent = default_relative_extent(spec)
    if graded_from is None and 0 < spec.softening < 0.05:
        graded_from = spec.softening / 20.0
    mesh = half_line(extent, n_points, parity_even, graded_from)
    r = mesh.centers
    trap = 0.25 * r * r
    static = interaction_potential(spec, r) if spec.coupling else np.zeros_like(r)
    return LineProblem(mesh, trap, static, kinetic_coeff=1.0)


def com_line_problem(n_points: int = 800, extent: float = 8.0) -> LineProblem:
    """Center-of-mass problem -(1/4) d2/dR2 + R^2."""
    mesh = uniform_line(extent, n_points)
    R = mesh.centers
    return LineProblem(mesh, R * R, np.zeros_like(R), kinetic_coeff=0.25)


def radial_relative_problem(spec: SystemSpec, m: int, n_points: int = 3000,
                            extent: float | None = None) -> LineProblem:
    """2D relative problem reduced to the radial channel m.

    Exchange r -> -r is an angle shift by pi, so even m belongs to symmetric
    and odd m to antisymmetric states.  The discretization is the
    finite-volume form of the u = sqrt(r)*phi reduction with centrifugal
    term (m^2 - 1/4)/r^2; the weight-r closure keeps m = 0 regular at the
    axis with no extra regularization.
    """
    if spec.dimension != 2:
        raise ValueError("radial reduction applies to 2D systems")
    if m < 0:
        raise ValueError("angular momentum m must be >= 0")
    want_even = spec.symmetry.value == "symmetric"
    if (m % 2 == 0) != want_even:
        raise ValueError(f"m={m} parity inconsistent with {spec.symmetry.value}")
    if extent is None:
        extent = default_relative_extent(spec)
    mesh = radial_mesh(extent, n_points)
    r = mesh.centers
    trap = 0.25 * r * r
    static = m * m / (r * r)
    if spec.coupling:
        static = static + interaction_potential(spec, r)
    return LineProblem(mesh, trap, static, kinetic_coeff=1.0)


def sector_gap(problem: LineProblem) -> float:
    evals, _ = problem.eigenstates(2)
    return float(evals[1] - evals[0])
