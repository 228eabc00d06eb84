import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from levy_nse.errors import DiagnosticError, ParameterError
from levy_nse.stable_levy import (
    RngStream,
    StableParams,
    abs_moment,
    check_beta,
    levy_increment,
    sample_standard_stable,
    tail_index_estimate,
)


def test_streams_reproducible_and_distinct():
    a = sample_standard_stable(1.5, RngStream(3, 1), 100)
    b = sample_standard_stable(1.5, RngStream(3, 1), 100)
    c = sample_standard_stable(1.5, RngStream(3, 2), 100)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_child_streams_unique():
    root = RngStream(0, 0)
    ids = [root.child(i).stream_id for i in range(50)]
    ids += [root.child(i).child(j).stream_id for i in range(7) for j in range(7)]
    assert len(set(ids)) == len(ids) == 99


@pytest.mark.parametrize("beta", [0.0, -1, 2.01, float("nan")])
def test_bad_beta(beta):
    with pytest.raises(ParameterError):
        check_beta(beta)


def test_params_validation():
    with pytest.raises(ParameterError):
        StableParams(1.5, ())
    with pytest.raises(ParameterError):
        StableParams(1.5, (1.0, -0.1))
    p = StableParams(1.5, (1.0, 2.0))
    assert p.m == 2
    assert p.regularity_sum([1.0, 4.0]) == pytest.approx(1.0 + 2.0**1.5 * 4.0**0.75)


def test_cauchy_quartiles():
    x = sample_standard_stable(1.0, RngStream(11), 200_000)
    q1, q3 = np.quantile(x, [0.25, 0.75])
    assert q1 == pytest.approx(-1.0, abs=0.02)
    assert q3 == pytest.approx(1.0, abs=0.02)


def test_gaussian_limit_variance():
    x = sample_standard_stable(2.0, RngStream(12), 200_000)
    assert x.var() == pytest.approx(2.0, rel=0.02)
    assert stats.kstest(x / math.sqrt(2.0), "norm").pvalue > 0.01


@pytest.mark.parametrize("beta", [0.7, 1.3, 1.8])
def test_matches_scipy_levy_stable(beta):
    x = sample_standard_stable(beta, RngStream(13), 3000)
    ref = stats.levy_stable(beta, 0.0)
    assert stats.kstest(x, ref.cdf).pvalue > 0.01


def test_increment_scaling():
    s1 = levy_increment(1.5, 2.0, 0.01, RngStream(5), 10)
    s2 = 2.0 * 0.01 ** (1 / 1.5) * sample_standard_stable(1.5, RngStream(5), 10)
    np.testing.assert_allclose(s1, s2, rtol=0, atol=0)
    assert np.all(levy_increment(1.5, 0.0, 0.1, RngStream(5), 4) == 0)
    with pytest.raises(ParameterError):
        levy_increment(1.5, 1.0, 0.0, RngStream(5))


@pytest.mark.parametrize("beta,p", [(1.5, 1.2), (1.8, 0.5), (2.0, 1.0), (1.0, 0.5), (0.8, 0.3)])
def test_abs_moment_closed_form(beta, p):
    # independent oracle: E|X|^p = (2/pi) Gamma(1+p) sin(pi p/2) int (1 - phi(t)) t^(-1-p) dt
    f = lambda t: -math.expm1(-t**beta) * t ** (-1 - p)
    integral = integrate.quad(f, 0, 1)[0] + integrate.quad(f, 1, math.inf)[0]
    expected = 2 / math.pi * math.gamma(1 + p) * math.sin(math.pi * p / 2) * integral
    assert abs_moment(beta, p) == pytest.approx(expected, rel=1e-8)


def test_abs_moment_monte_carlo():
    x = sample_standard_stable(1.5, RngStream(31), 400_000)
    assert np.mean(np.abs(x) ** 0.5) == pytest.approx(abs_moment(1.5, 0.5), rel=0.01)


def test_abs_moment_infinite():
    assert abs_moment(1.5, 1.5) == math.inf


def test_hill_recovers_index():
    est = tail_index_estimate(sample_standard_stable(1.5, RngStream(21), 400_000))
    assert abs(est.index - 1.5) < 3 * est.stderr + 0.05
    assert not est.light_tail
    g = tail_index_estimate(sample_standard_stable(2.0, RngStream(22), 100_000))
    assert g.light_tail


def test_hill_rejects_bad_input():
    with pytest.raises(DiagnosticError):
        tail_index_estimate(np.ones(100))
    with pytest.raises(DiagnosticError):
        tail_index_estimate(np.ones(20_000))


@settings(max_examples=30, deadline=None)
@given(beta=st.floats(0.3, 2.0), seed=st.integers(0, 2**31))
def test_samples_finite(beta, seed):
    x = sample_standard_stable(beta, RngStream(seed), 64)
    assert x.shape == (64,)
    assert np.all(np.isfinite(x))
