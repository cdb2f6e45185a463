import numpy as np
import pytest

from qbm import oscbasis as ob
from qbm.excitation import SwitchOff
from qbm.model import SystemSpec

SQRT3 = np.sqrt(3.0)


def test_eigenfunctions_orthonormal():
    x = np.linspace(-16, 16, 8001)
    funcs = ob.eigenfunctions(25, x, length=np.sqrt(2.0))
    gram = funcs @ funcs.T * (x[1] - x[0])
    np.testing.assert_allclose(gram, np.eye(25), atol=1e-6)


def test_eigenfunctions_large_n_stable():
    # the scaled recurrence must survive n ~ hundreds without overflow
    x = np.linspace(-40, 40, 801)
    funcs = ob.eigenfunctions(400, x, length=1.0)
    assert np.all(np.isfinite(funcs))
    norm = np.sum(funcs[399] ** 2) * (x[1] - x[0])
    assert norm == pytest.approx(1.0, rel=1e-4)


def test_free_spectra():
    spec = SystemSpec(coupling=0.0)
    h = ob.relative_hamiltonian(spec, 40)
    vals, _ = ob.diagonalize(h)
    # odd relative sector of H = p^2 + r^2/4: E = 2n + 3/2
    np.testing.assert_allclose(vals[:5], 1.5 + 2.0 * np.arange(5), atol=1e-10)
    hc = ob.com_hamiltonian(40)
    vals_c, _ = ob.diagonalize(hc)
    # CoM H = p^2/4 + R^2: E = 2n + 1/2 in the even sector
    np.testing.assert_allclose(vals_c[:5], 0.5 + 2.0 * np.arange(5),
                               atol=1e-10)


def test_even_sector_bare_coulomb_diverges():
    spec = SystemSpec(coupling=1.0, symmetry="symmetric", softening=0.0)
    with pytest.raises(ob.DivergentElementError):
        ob.interaction_sector(spec, 20, ob.EVEN)


def test_interaction_matrix_against_quadrature():
    """Spot-check <1|1/|r||3> in the odd sector by direct integration."""
    spec = SystemSpec(coupling=1.0)
    w = ob.interaction_sector(spec, 10, ob.ODD)
    r = np.linspace(1e-6, 30, 400001)
    funcs = ob.eigenfunctions(4, r, ob.RELATIVE_LENGTH)
    dr = r[1] - r[0]
    direct_11 = 2.0 * np.sum(funcs[1] ** 2 / r) * dr
    direct_13 = 2.0 * np.sum(funcs[1] * funcs[3] / r) * dr
    assert w[0, 0] == pytest.approx(direct_11, rel=1e-6)
    assert w[0, 1] == pytest.approx(direct_13, rel=1e-6)


def test_breathing_gap_known_values():
    # reference gaps from independent grid diagonalization (Richardson
    # extrapolated) and basis-size extrapolation
    for lam, gap, tol in [(1.0, 1.90436, 2e-5), (10.0, 1.775653, 2e-5),
                          (200.0, 1.738151, 5e-5)]:
        n_b = 120 if lam <= 10 else 400
        h = ob.relative_hamiltonian(SystemSpec(coupling=lam), n_b)
        assert ob.breathing_gap(h) == pytest.approx(gap, abs=tol)


def test_breathing_gap_classical_limit():
    h = ob.relative_hamiltonian(SystemSpec(coupling=1000.0), 500)
    assert ob.breathing_gap(h) == pytest.approx(SQRT3, rel=2e-3)


def test_ground_state_and_expectations():
    h = ob.relative_hamiltonian(SystemSpec(coupling=1.0), 60)
    g = ob.ground_state(h)
    assert g.norm() == pytest.approx(1.0, abs=1e-12)
    r2 = ob.position_sq_sector(60, ob.ODD, ob.RELATIVE_LENGTH)
    # repulsion expands the cloud beyond the free value <r^2> = 3
    assert g.expect(r2) > 3.0


def test_propagation_static_phase_only():
    """Without excitation a ground state only acquires a phase."""
    h = ob.relative_hamiltonian(SystemSpec(coupling=1.0), 60)
    g = ob.ground_state(h)
    w = h.interaction
    times, samples, final = ob.propagate(
        g, h, None, t_final=20.0, dt=0.02, sample_every=10,
        observers={"U": lambda c, f: np.real(np.vdot(c, w @ c))})
    assert final.norm() == pytest.approx(1.0, abs=1e-10)
    assert np.ptp(samples["U"]) < 1e-10
    overlap = abs(np.vdot(g.coefficients, final.coefficients))
    assert overlap == pytest.approx(1.0, abs=1e-10)


def test_propagation_switch_off_excites():
    h = ob.relative_hamiltonian(SystemSpec(coupling=1.0), 60)
    g = ob.ground_state(h)
    w = h.interaction
    _, samples, final = ob.propagate(
        g, h, SwitchOff(t_on=1.0, duration=0.1), t_final=30.0, dt=0.02,
        sample_every=5,
        observers={"U": lambda c, f: np.real(np.vdot(c, w @ c))})
    assert final.norm() == pytest.approx(1.0, abs=1e-10)
    assert np.ptp(samples["U"]) > 1e-3


def test_propagation_leak_detection():
    # a severe quench from a tiny basis must trip the truncation check
    h = ob.relative_hamiltonian(SystemSpec(coupling=1.0), 10)
    g = ob.ground_state(h)
    with pytest.raises(ob.BasisTruncationError):
        ob.propagate(g, h, SwitchOff(t_on=0.5, duration=0.5), t_final=40.0,
                     dt=0.02, leak_tol=1e-10)


def test_factor_resolution_quantization():
    """Rounded trap factors must leave switch-off dynamics untouched and
    approximate a smooth drive to the stated resolution."""
    from qbm.excitation import Modulation
    h = ob.relative_hamiltonian(SystemSpec(coupling=1.0), 60)
    g = ob.ground_state(h)
    w = h.interaction
    proto = Modulation(frequency=1.9, depth=5e-3, center=15.0, width=9.0)
    kwargs = dict(t_final=30.0, dt=0.02, sample_every=5,
                  observers={"U": lambda c, f: np.real(np.vdot(c, w @ c))})
    _, exact, _ = ob.propagate(g, h, proto, **kwargs)
    _, coarse, _ = ob.propagate(g, h, proto, factor_resolution=5e-3 / 500,
                                **kwargs)
    assert np.max(np.abs(exact["U"] - coarse["U"])) < 1e-5


def test_imaginary_time_matches_diagonalization():
    h = ob.relative_hamiltonian(SystemSpec(coupling=2.0), 50)
    state, e = ob.imaginary_time_ground(h)
    vals, _ = ob.diagonalize(h)
    assert e == pytest.approx(vals[0], abs=1e-9)
    g = ob.ground_state(h)
    assert abs(np.vdot(g.coefficients, state.coefficients)) == pytest.approx(
        1.0, abs=1e-8)


def test_interaction_cache_roundtrip(tmp_path):
    spec = SystemSpec(coupling=1.0, softening=0.25)
    ob._memory_cache.clear()
    w1 = ob.interaction_sector(spec, 15, ob.EVEN, cache_dir=str(tmp_path))
    ob._memory_cache.clear()
    w2 = ob.interaction_sector(spec, 15, ob.EVEN, cache_dir=str(tmp_path))
    np.testing.assert_array_equal(w1, w2)
    assert list(tmp_path.glob("wmat_*.npz"))
