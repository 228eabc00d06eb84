import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from levy_nse.errors import MomentDivergenceError, ParameterError
from levy_nse.ou_process import (
    OUState,
    block_maxima,
    calibrate_alpha,
    ergodic_average,
    euler_reference,
    fit_stable_scale,
    moment_check,
    mode_streams,
    ou_exact_step,
    ou_path,
    stationary_path,
    stationary_scale,
    step_scale,
)
from levy_nse.spectral_model import abstract_model
from levy_nse.stable_levy import RngStream, StableParams, abs_moment, sample_standard_stable


def _wide(beta, n, sigma=1.0):
    return StableParams(beta, (sigma,) * n)


def test_exact_step_matches_fine_euler():
    n, rate, h, beta = 5000, 2.0, 0.5, 1.5
    params = _wide(beta, n)
    state = OUState(0.0, np.full(n, 1.5), 0.0, np.full(n, rate))
    exact = ou_exact_step(state, h, params, mode_streams(1, 0, n)).z
    euler = euler_reference(np.full(n, 1.5), rate, 1.0, beta, h, 400, RngStream(2))
    assert stats.ks_2samp(exact, euler).pvalue > 0.01


def test_step_scale_limits():
    params = StableParams(1.5, (2.0,))
    # small h: scale ~ sigma h^(1/beta); large h: the stationary scale
    assert step_scale(params, np.array([3.0]), 1e-8)[0] == pytest.approx(2.0 * 1e-8 ** (1 / 1.5), rel=1e-6)
    assert step_scale(params, np.array([3.0]), 50.0)[0] == pytest.approx(
        stationary_scale(params, [3.0], 0.0)[0], rel=1e-12)


def test_path_is_ar1_recursion():
    params = StableParams(1.2, (0.7,))
    state = OUState(0.0, np.array([0.3]), 0.5, np.array([2.0]))
    path = ou_path(state, 0.1, 50, params, [RngStream(9)])
    jumps = step_scale(params, state.rates, 0.1)[0] * sample_standard_stable(1.2, RngStream(9), 50)
    z = [0.3]
    for j in jumps:
        z.append(math.exp(-2.5 * 0.1) * z[-1] + j)
    np.testing.assert_allclose(path[:, 0], z, rtol=1e-12)


def test_semigroup_in_law():
    # two steps of h equal one step of 2h in law
    n, rate, beta = 20_000, 1.0, 1.5
    params = _wide(beta, n)
    s0 = OUState(0.0, np.full(n, 2.0), 0.0, np.full(n, rate))
    streams = mode_streams(3, 0, n)
    two = ou_exact_step(ou_exact_step(s0, 0.3, params, streams), 0.3, params, streams)
    one = ou_exact_step(s0, 0.6, params, mode_streams(4, 0, n))
    assert stats.ks_2samp(two.z, one.z).pvalue > 0.01


def test_stationary_marginal_preserved():
    n, beta = 4000, 1.5
    params = _wide(beta, n, 0.5)
    head = np.full(n, 3.0)
    path = stationary_path(params, head, 0.0, 0.1, 100, mode_streams(5, 0, n))
    scale = stationary_scale(params, head, 0.0)[0]
    ref = scale * sample_standard_stable(beta, RngStream(6), 20_000)
    for k in (0, 50, 100):
        assert stats.ks_2samp(path[k], ref).pvalue > 0.01


def test_fit_stable_scale():
    for beta in (1.2, 1.5, 2.0):
        x = 3.7 * sample_standard_stable(beta, RngStream(7), 100_000)
        assert fit_stable_scale(x, beta) == pytest.approx(3.7, rel=0.01)


def test_moment_law_and_constant():
    basis = abstract_model(8, 4, seed=0).basis
    params = StableParams(1.5, (1.0, 0.5, 2.0, 0.1))
    rep = moment_check(params, basis, 1.2, alpha=3.0, seed=1)
    assert np.all(rep.rel_error < 0.05)
    ratios = rep.empirical / rep.formula
    assert np.ptp(ratios) < 0.05


def test_moment_scale_homogeneity():
    # modes (sigma, lam) and (2 sigma, lam): moment ratio 2^p
    params = StableParams(1.5, (1.0, 2.0))
    rep = moment_check(params, np.array([3.0, 3.0]), 1.2, seed=2)
    assert rep.empirical[1] / rep.empirical[0] == pytest.approx(2**1.2, rel=0.05)


def test_ergodic_average_converges():
    m, h, T = 3, 0.01, 1e4
    params = StableParams(1.5, (1.0,) * m)
    # |z| has infinite variance: the time average converges like T^(1/beta - 1),
    # so a fast mode (short correlation time) is used
    head = np.full(m, 10.0)
    path = stationary_path(params, head, 0.0, h, int(T / h), mode_streams(0, 0, m))
    oracle = m * stationary_scale(params, head, 0.0)[0] * abs_moment(1.5, 1.0)
    assert ergodic_average(path, h) == pytest.approx(oracle, rel=0.05)


def test_moment_divergence():
    basis = abstract_model(4, 2).basis
    with pytest.raises(MomentDivergenceError):
        moment_check(StableParams(1.5, (1.0, 1.0)), basis, 1.5)


def test_ergodic_average_oracle():
    path = np.column_stack([np.linspace(0, 1, 11), -np.ones(11)])
    assert ergodic_average(path, 0.1) == pytest.approx(0.5 + 1.0)
    assert ergodic_average(path, 0.1, T=0.5) == pytest.approx(0.25 + 1.0)
    with pytest.raises(ParameterError):
        ergodic_average(path, 0.1, T=2.0)


def test_calibration_meets_target():
    model = abstract_model(8, 4, seed=0)
    params = StableParams(1.5, (0.1,) * 4)
    eta = model.eta_bound()[0]
    cal = calibrate_alpha(model, params, eta, seed=3)
    assert cal.lhs <= cal.target == model.basis.lambda1 / 4
    assert cal.verified
    assert all(a > b for a, b in zip(cal.estimates, cal.estimates[1:]))


def test_block_maxima_oracle():
    v = np.array([0, 3, 1, 2, 5, 4, 0, 1, 7.0])
    np.testing.assert_array_equal(block_maxima(v, 0.5, 1.0), [3, 5, 5, 7])


def test_negative_alpha_rejected():
    with pytest.raises(ParameterError):
        OUState(0.0, np.zeros(1), -1.0, np.ones(1))


@settings(max_examples=40, deadline=None)
@given(rate=st.floats(0.01, 100), h=st.floats(1e-4, 10), beta=st.floats(0.5, 2.0))
def test_step_scale_below_stationary(rate, h, beta):
    params = StableParams(beta, (1.0,))
    assert step_scale(params, np.array([rate]), h)[0] <= stationary_scale(params, [rate], 0.0)[0] * (1 + 1e-12)
