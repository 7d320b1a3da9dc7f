import numpy as np
import pytest
from hypothesis import given, strategies as st

from qlan.errors import CutoffTooSmall, NonHermitianHamiltonian, ValidationError, ZeroCoupling
from qlan.model import (SIGMA_MINUS, SIGMA_PLUS, ParamModel, annihilator, atom_maser_model,
                        custom_model, evaluate, maser_oracles, two_level_model, two_level_oracles)

I2 = np.eye(2)


def test_two_level_point_matches_hand_derivatives():
    p = evaluate(two_level_model(1.0), 2.0)
    np.testing.assert_allclose(p.L[0], 2 * SIGMA_MINUS + I2, atol=0)
    np.testing.assert_allclose(p.L[0], [[1, 0], [2, 1]], atol=0)
    np.testing.assert_allclose(p.Ldot[0], SIGMA_MINUS, atol=0)
    np.testing.assert_allclose(p.H, 1j * (SIGMA_MINUS - SIGMA_PLUS), atol=1e-15)
    np.testing.assert_allclose(p.Hdot, 0.5j * (SIGMA_MINUS - SIGMA_PLUS), atol=1e-15)
    np.testing.assert_allclose(p.Hddot, 0, atol=0)
    np.testing.assert_allclose(p.Lddot[0], 0, atol=0)


def test_two_level_at_zero_theta():
    p = evaluate(two_level_model(1j), 0.0)
    np.testing.assert_allclose(p.H, 0, atol=0)
    np.testing.assert_allclose(p.L[0], 1j * I2, atol=0)


def test_constant_model_has_zero_derivatives():
    H = np.diag([1.0, -1.0])
    m = ParamModel(dim=2, hamiltonian=lambda th: H, jumps=(lambda th: SIGMA_MINUS,))
    p = evaluate(m, 0.7)
    assert np.all(p.Hdot == 0) and np.all(p.Ldot[0] == 0)
    assert not p.has_second_derivatives


def test_finite_difference_fallback_is_exact_for_linear_maps():
    m = ParamModel(dim=2, hamiltonian=lambda th: np.zeros((2, 2)),
                   jumps=(lambda th: th * SIGMA_MINUS + I2,))
    p = evaluate(m, 1.0, fd_step=1e-5)
    np.testing.assert_allclose(p.Ldot[0], SIGMA_MINUS, atol=1e-9)


def test_non_hermitian_hamiltonian_rejected():
    m = ParamModel(dim=2, hamiltonian=lambda th: SIGMA_MINUS, jumps=(lambda th: I2,))
    with pytest.raises(NonHermitianHamiltonian):
        evaluate(m, 0.0)


def test_small_hermiticity_defect_is_symmetrised():
    H = np.array([[1.0, 1e-10], [0.0, 2.0]])
    m = ParamModel(dim=2, hamiltonian=lambda th: H, jumps=(lambda th: I2,))
    p = evaluate(m, 0.0)
    np.testing.assert_array_equal(p.H, p.H.conj().T)


def test_zero_coupling():
    with pytest.raises(ZeroCoupling):
        two_level_model(0)


def test_shape_mismatch_rejected():
    m = ParamModel(dim=3, hamiltonian=lambda th: np.eye(2), jumps=(lambda th: np.eye(3),))
    with pytest.raises(ValidationError):
        evaluate(m, 0.0)


def test_annihilator_cutoff_two():
    np.testing.assert_allclose(annihilator(2), [[0, 1, 0], [0, 0, np.sqrt(2)], [0, 0, 0]])


def test_maser_structure():
    m = atom_maser_model(16, 0.0, 5)
    assert m.dim == 6 and m.channels == 4
    p = evaluate(m, 0.9)
    np.testing.assert_array_equal(p.L[3], 0)
    np.testing.assert_array_equal(p.H, 0)
    with pytest.raises(ValidationError):
        atom_maser_model(16, 0.1, 1)


def test_maser_population_ratio():
    o = maser_oracles(16, 0.1, 1.0, 60)
    assert o.rho_ss[1] / o.rho_ss[0] == pytest.approx(0.1 / 1.1 + 16 / 1.1 * np.sin(1) ** 2,
                                                       rel=1e-12)
    assert o.rho_ss[1] / o.rho_ss[0] == pytest.approx(10.390, abs=1e-3)


def test_maser_small_angle_limit():
    o = maser_oracles(16, 0.0, 1e-4, 10)
    assert o.rho_ss[0] == pytest.approx(1, abs=1e-6)
    assert o.F == pytest.approx(4 * 16, rel=1e-6)


def test_maser_cutoff_too_small():
    with pytest.raises(CutoffTooSmall):
        maser_oracles(16, 0.1, 1.0, 10)


def test_two_level_oracle_values():
    o = two_level_oracles(1, 2, 0)
    assert o.F == pytest.approx(8 / 3, rel=1e-14)
    assert (o.a, o.b, o.c) == pytest.approx((1 / 3, -1 / 3, -1 / 3), rel=1e-14)
    assert o.mean_homodyne == pytest.approx(2 / 3, rel=1e-14)
    assert o.A_h == pytest.approx(8 / 9, rel=1e-14)
    assert o.B_h == pytest.approx(1 + 1024 / 1728, rel=1e-14)
    assert o.I_h == pytest.approx(0.49615, abs=1e-4)
    assert o.V_h == pytest.approx(17 / 9, rel=1e-14)
    assert o.mu_h == pytest.approx(-8 / 9, rel=1e-14)
    assert o.rate == 1


def test_custom_model_taylor_polynomial():
    H = np.diag([0.0, 1.0])
    dH = np.array([[0, 1], [1, 0]])
    L = [SIGMA_MINUS]
    m = custom_model(H, L, dH=dH, dL=[I2], theta_ref=1.0)
    p = evaluate(m, 1.5)
    np.testing.assert_allclose(p.H, H + 0.5 * dH)
    np.testing.assert_allclose(p.L[0], SIGMA_MINUS + 0.5 * I2)
    np.testing.assert_allclose(p.Ldot[0], I2)
    with pytest.raises(ValidationError):
        custom_model(H, L, dL=[I2, I2])


@given(st.floats(-3, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_two_level_hamiltonian_hermitian_and_derivatives(theta, zr, zi):
    z = complex(zr, zi)
    if abs(z) < 1e-3:
        return
    m = two_level_model(z)
    H = m.hamiltonian(theta)
    assert np.linalg.norm(H - H.conj().T) <= 1e-12 * max(1, np.linalg.norm(H))
    exact = evaluate(m, theta)
    fd = evaluate(m.__class__(dim=2, hamiltonian=m.hamiltonian, jumps=m.jumps), theta)
    scale = max(1.0, np.linalg.norm(exact.Hdot))
    assert np.linalg.norm(fd.Hdot - exact.Hdot) <= 1e-8 * scale
    assert np.linalg.norm(fd.Ldot[0] - exact.Ldot[0]) <= 1e-8


@given(st.floats(0.05, 1.5))
def test_maser_analytic_derivatives_match_finite_differences(phi):
    m = atom_maser_model(16, 0.1, 12)
    exact = evaluate(m, phi)
    fd = evaluate(ParamModel(dim=m.dim, hamiltonian=m.hamiltonian, jumps=m.jumps), phi)
    for a, b in zip(exact.Ldot, fd.Ldot):
        assert np.linalg.norm(a - b) <= 1e-8 * max(1.0, np.linalg.norm(a))
    fd2 = evaluate(ParamModel(dim=m.dim, hamiltonian=m.hamiltonian, jumps=m.jumps), phi,
                   fd_second=True)
    for a, b in zip(exact.Lddot, fd2.Lddot):
        assert np.linalg.norm(a - b) <= 1e-4 * max(1.0, np.linalg.norm(a))


@given(st.floats(0.1, 4), st.floats(-2, 2), st.floats(-2, 2))
def test_two_level_oracle_state_is_a_density_matrix(theta0, zr, zi):
    z = complex(zr, zi)
    if abs(z) < 1e-3:
        return
    o = two_level_oracles(z, theta0)
    assert o.a + (1 - o.a) == 1
    assert np.linalg.eigvalsh(o.rho_ss).min() >= -1e-12


@given(st.floats(0.05, 1.5), st.floats(0.0, 1.0))
def test_maser_oracle_is_a_distribution(phi, nu):
    o = maser_oracles(16, nu, phi, 80)
    assert np.all(o.rho_ss >= 0)
    assert abs(o.rho_ss.sum() - 1) <= 1e-14
