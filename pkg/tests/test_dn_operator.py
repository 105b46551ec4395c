import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from floatbody import dn_operator, elliptic, geometry

L_STRIP = 2 * np.pi


@pytest.fixture(scope="module")
def strip_op():
    m = geometry.periodic_strip_mesh(L_STRIP, 1.0, 0.05)
    return dn_operator.assemble_G0(elliptic.assemble(m))


def test_constants_in_kernel(ref_op):
    assert np.max(np.abs(ref_op.apply(np.ones(ref_op.n)))) < 1e-10
    assert ref_op.clean_eigvals[0] == 0.0
    assert ref_op.clean_eigvals[1] > 0.0


def test_strip_eigenvalues(strip_op):
    lam = strip_op.eigvals
    for n in (1, 2, 3):
        k = 2 * np.pi * n / L_STRIP
        assert lam[2 * n - 1] == pytest.approx(k * np.tanh(k), rel=0.02)
        assert lam[2 * n] == pytest.approx(k * np.tanh(k), rel=0.02)


def test_strip_cosine_is_eigenfunction(strip_op):
    x = strip_op.x
    k = 2 * 2 * np.pi / L_STRIP
    f = np.cos(k * x)
    Gf = strip_op.apply(f)
    c = (f @ strip_op.M @ Gf) / (f @ strip_op.M @ f)
    assert c == pytest.approx(k * np.tanh(k), rel=0.02)
    assert np.linalg.norm(Gf - c * f) / np.linalg.norm(Gf) < 0.02


def test_energy_identity(ref_op, ref_sys):
    psi = np.sin(ref_op.x) + 0.3 * ref_op.x
    ext = elliptic.solve_mixed(ref_sys, psi)
    assert ref_op.pairing(psi, psi) == pytest.approx(ext.energy(), rel=1e-8)


def test_eigvecs_m_orthonormal(ref_op):
    V = ref_op.eigvecs
    np.testing.assert_allclose(V.T @ ref_op.M @ V, np.eye(ref_op.n), atol=1e-9)


def test_power_zero_is_identity(ref_op, rng):
    psi = rng.standard_normal(ref_op.n)
    np.testing.assert_allclose(dn_operator.g0_power(ref_op, psi, 0), psi, atol=1e-10)


def test_half_power_norm(ref_op, rng):
    psi = rng.standard_normal(ref_op.n)
    half = dn_operator.g0_power(ref_op, psi, 0.5)
    assert ref_op.m_norm(half) ** 2 == pytest.approx(ref_op.pairing(psi, psi), rel=1e-10)


def test_half_power_semigroup(ref_op, rng):
    psi = rng.standard_normal(ref_op.n)
    twice = dn_operator.g0_power(ref_op, dn_operator.g0_power(ref_op, psi, 0.5), 0.5)
    one = dn_operator.g0_power(ref_op, psi, 1.0)
    assert np.linalg.norm(twice - one) <= 1e-8 * np.linalg.norm(one)
    np.testing.assert_allclose(one, ref_op.apply(psi), atol=1e-8 * np.abs(one).max())


def test_negative_power_rejected(ref_op):
    with pytest.raises(ValueError):
        dn_operator.g0_power(ref_op, np.ones(ref_op.n), -0.5)


def test_seminorms_of_constant(ref_op):
    f = np.full(ref_op.n, 2.0)
    s = dn_operator.hcal_seminorms(ref_op, f, 3)
    # roundoff relative to the operator norm ||G^{j/2}|| ||f||
    bound = 1e-12 * ref_op.eigvals[-1] ** (np.arange(1, 4) / 2) * ref_op.m_norm(f)
    assert np.all(s <= bound)


def test_seminorms_top_eigenvector(ref_op):
    v = ref_op.eigvecs[:, -1]
    lam = ref_op.eigvals[-1]
    s = dn_operator.hcal_seminorms(ref_op, v, 3)
    np.testing.assert_allclose(s, lam ** (np.arange(1, 4) / 2) * ref_op.m_norm(v), rtol=1e-8)


def test_seminorms_geometric_on_strip(strip_op):
    k = 2 * np.pi / L_STRIP
    s = dn_operator.hcal_seminorms(strip_op, np.cos(k * strip_op.x), 4)
    ratio = s[1:] / s[:-1]
    np.testing.assert_allclose(ratio, np.sqrt(k * np.tanh(k)), rtol=0.02)


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 7, elements=st.floats(-10, 10)), st.floats(-100, 100))
def test_pairing_symmetric_psd_shift_invariant(ref_op, coef, c):
    x = ref_op.x
    a = sum(cf * np.cos(j * x / 2) for j, cf in enumerate(coef))
    b = sum(cf * np.sin(j * x / 3) for j, cf in enumerate(coef))
    scale = 1 + ref_op.pairing(a, a) + ref_op.pairing(b, b)
    assert ref_op.pairing(a, b) == pytest.approx(ref_op.pairing(b, a), abs=1e-9 * scale)
    assert ref_op.pairing(a, a) >= -1e-10 * scale
    assert ref_op.pairing(a + c, a + c) == pytest.approx(ref_op.pairing(a, a), abs=1e-8 * (scale + c * c))
