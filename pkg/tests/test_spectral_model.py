import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from levy_nse.errors import ParameterError
from levy_nse.spectral_model import (
    CoriolisOperator,
    abstract_model,
    estimate_eta,
    nse2d_model,
    nse2d_modes,
    nse2d_velocity,
    sphere_eigenvalues,
    torus_eigenvalues,
)
from levy_nse.stable_levy import RngStream


@pytest.fixture(scope="module")
def small():
    return abstract_model(8, 3, seed=4)


@pytest.fixture(scope="module")
def torus():
    return nse2d_model(8, 4)


def test_sphere_multiplicities():
    lam = sphere_eigenvalues(15)
    np.testing.assert_array_equal(lam[:3], 2.0)
    np.testing.assert_array_equal(lam[3:8], 6.0)
    np.testing.assert_array_equal(lam[8:15], 12.0)


def test_torus_eigenvalues_sorted_counts():
    lam = torus_eigenvalues(20)
    assert np.all(np.diff(lam) >= 0)
    # |k|^2 = 1 has four lattice points, two per half plane, two real modes each
    assert np.count_nonzero(lam == 1.0) == 4
    assert np.count_nonzero(lam == 2.0) == 4


def test_dealiasing_keeps_two_thirds():
    modes = nse2d_modes(16)
    kmax = max(max(abs(kx), abs(ky)) for (kx, ky), _ in modes)
    assert kmax == 5
    assert len(modes) == 2 * ((2 * kmax + 1) ** 2 - 1) // 2
    with pytest.raises(ParameterError):
        nse2d_modes(2)


def test_abstract_tensor_antisymmetric(small):
    b = small.tensor.dense()
    np.testing.assert_allclose(b, -np.swapaxes(b, 1, 2), atol=0)


def test_apply_B_matches_dense(small):
    gen = np.random.default_rng(0)
    u, v = gen.standard_normal((2, 5, small.N))
    expected = np.einsum("jkl,bj,bk->bl", small.tensor.dense(), u, v)
    np.testing.assert_allclose(small.apply_B(u, v), expected, rtol=1e-13, atol=1e-13)


def test_coriolis_skew():
    c = CoriolisOperator.random_skew(6, 2.0, RngStream(1))
    np.testing.assert_allclose(c.skew + c.skew.T, 0, atol=0)
    with pytest.raises(ParameterError):
        CoriolisOperator(np.ones((3, 3)))


def test_fractional_powers(small):
    u = np.random.default_rng(1).standard_normal(small.N)
    lam = small.lam
    assert small.sq_norm(u, 0.5) == pytest.approx(np.sum(lam * u * u))
    np.testing.assert_allclose(small.apply_frac_A(u, 0.25), lam**0.25 * u)
    np.testing.assert_allclose(small.power(small.power(u, 0.3), -0.3), u)
    h, v, f = small.norms(u, 0.25)
    assert (h, v, f) == pytest.approx((np.linalg.norm(u), np.sqrt(np.sum(lam * u * u)),
                                       np.linalg.norm(lam**0.25 * u)))


def test_eta_certified_dominates_sampled(small):
    est = estimate_eta(small, trials=2000, stream=RngStream(2))
    assert est.lower_bound <= est.eta * (1 + 1e-12)
    assert est.eta == pytest.approx(small.eta_bound()[0])


def test_eta_is_tight(small):
    # the maximizing eigenvector attains the bound
    eta, per_mode = small.eta_bound()
    l = int(np.argmax(per_mode))
    mat = small.mode_form(l)
    w, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    u = vecs[:, np.argmax(np.abs(w))]
    e = np.zeros(small.N)
    e[l] = 1.0
    assert abs(small.trilinear(u, e, u)) == pytest.approx(eta, rel=1e-12)


def _fft_grad(field, n):
    k = np.fft.fftfreq(n, 1.0 / n)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    F = np.fft.fft2(field)
    return np.real(np.fft.ifft2(1j * kx * F)), np.real(np.fft.ifft2(1j * ky * F))


def test_nse2d_basis_orthonormal_divergence_free(torus):
    n = 24
    fields = np.array([nse2d_velocity(torus, e, n) for e in np.eye(torus.N)])
    gram = np.einsum("icxy,jcxy->ij", fields, fields) / n**2
    np.testing.assert_allclose(gram, np.eye(torus.N), atol=1e-12)
    for f in fields:
        div = _fft_grad(f[0], n)[0] + _fft_grad(f[1], n)[1]
        assert np.max(np.abs(div)) < 1e-12
    dirichlet = [sum(np.mean(g**2) for c in (0, 1) for g in _fft_grad(f[c], n)) for f in fields]
    np.testing.assert_allclose(dirichlet, torus.lam, rtol=1e-12)


def test_nse2d_tensor_matches_pseudospectral(torus):
    n = 32
    gen = np.random.default_rng(3)
    u, v = gen.standard_normal((2, torus.N))
    U, V = nse2d_velocity(torus, u, n), nse2d_velocity(torus, v, n)
    adv = np.empty_like(V)
    for c in range(2):
        gx, gy = _fft_grad(V[c], n)
        adv[c] = U[0] * gx + U[1] * gy
    basis = np.array([nse2d_velocity(torus, e, n) for e in np.eye(torus.N)])
    expected = np.einsum("cxy,lcxy->l", adv, basis) / n**2
    np.testing.assert_allclose(torus.apply_B(u, v), expected, atol=1e-11)


def test_nse2d_tensor_antisymmetric(torus):
    b = torus.tensor.dense()
    np.testing.assert_allclose(b, -np.swapaxes(b, 1, 2), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(u=arrays(np.float64, 8, elements=st.floats(-1e3, 1e3)),
       v=arrays(np.float64, 8, elements=st.floats(-1e3, 1e3)))
def test_trilinear_antisymmetry_property(u, v):
    model = abstract_model(8, 3, seed=4)
    scale = np.sum(np.abs(model.tensor.val)) * (1 + np.max(np.abs(u))) * (1 + np.max(np.abs(v))) ** 2
    assert abs(model.trilinear(u, v, v)) <= 1e-12 * scale
    assert abs(np.dot(model.apply_C(v), v)) <= 1e-12 * (1 + np.dot(v, v)) * 10


def test_bad_inputs():
    with pytest.raises(ParameterError):
        abstract_model(4, 5)
    with pytest.raises(ParameterError):
        abstract_model(4, 2, eigen="cube")
    with pytest.raises(ParameterError):
        abstract_model(4, 2, eigen=[1.0, 2.0])
