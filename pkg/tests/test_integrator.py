import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levy_nse import constants as K
from levy_nse.errors import BlowUpError, CoverageError, ParameterError
from levy_nse.integrator import (
    IntegratorConfig,
    LedgerConstants,
    adelta_bound,
    energy_defect,
    energy_ledger,
    energy_ledger_row,
    fit_adelta_constant,
    gronwall_envelope,
    gronwall_residuals,
    integrate,
    linear_solution,
    noise_path,
    simulate,
    step_v,
    v_norm_time_integral,
)
from levy_nse.ou_process import calibrate_alpha
from levy_nse.spectral_model import BilinearTensor, CoriolisOperator, SpectralModel, abstract_model
from levy_nse.stable_levy import StableParams


@pytest.fixture(scope="module")
def setup():
    model = abstract_model(8, 4, seed=0)
    params = StableParams(1.5, (0.1,) * 4)
    eta = model.eta_bound()[0]
    alpha = calibrate_alpha(model, params, eta, seed=0).alpha
    return model, params, eta, alpha


@pytest.fixture(scope="module")
def run(setup):
    model, params, eta, alpha = setup
    rec = simulate(np.ones(model.N), IntegratorConfig(1e-3, 5.0), model, params, 7, alpha)
    return rec, LedgerConstants.for_model(model, eta, alpha)


def _linear(model, forcing=None):
    return SpectralModel(model.basis, BilinearTensor.zero(model.N), CoriolisOperator.zero(model.N),
                         model.nu, forcing)


@pytest.mark.parametrize("scheme", ["semi_implicit", "explicit_euler"])
def test_kernel_matches_reference_step(setup, scheme):
    model, params, _, alpha = setup
    z = noise_path(params, model, alpha, 1e-3, 200, seed=1)
    v = np.random.default_rng(0).standard_normal(model.N)
    rec, failed = integrate(v, z, model, 1e-3, alpha, scheme)
    for n in range(200):
        v = step_v(v, z[n], 1e-3, model, alpha, scheme)
    assert failed[0] == -1
    np.testing.assert_allclose(rec[-1, 0], v, rtol=1e-12, atol=1e-14)


def test_batch_members_independent(setup):
    model, params, _, alpha = setup
    z = noise_path(params, model, alpha, 1e-3, 100, seed=2)
    v0 = np.random.default_rng(1).standard_normal((3, model.N))
    rec, _ = integrate(v0, z, model, 1e-3, alpha)
    for b in range(3):
        single, _ = integrate(v0[b], z, model, 1e-3, alpha)
        np.testing.assert_array_equal(rec[:, b], single[:, 0])


def test_linear_closed_form_first_order(setup):
    model = _linear(setup[0])
    v0 = np.ones(model.N)
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        n = int(round(1.0 / h))
        rec, _ = integrate(v0, np.zeros((n + 1, 1)), model, h)
        errs.append(np.max(np.abs(rec[-1, 0] - linear_solution(model, v0, 1.0))))
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.05)


def test_forced_steady_state(setup):
    f = np.zeros(8)
    f[2] = 3.0
    model = _linear(setup[0], f)
    rec, _ = integrate(np.zeros(8), np.zeros((20001, 1)), model, 1e-3)
    np.testing.assert_allclose(rec[-1, 0], f / (model.nu * model.lam), atol=1e-10)


def test_refinement_shares_noise(setup):
    model, params, _, alpha = setup
    coarse = noise_path(params, model, alpha, 2e-3, 50, seed=3, refine=2)
    fine = noise_path(params, model, alpha, 1e-3, 100, seed=3)
    np.testing.assert_array_equal(coarse, fine[::2])


def test_simulate_deterministic(setup):
    model, params, _, alpha = setup
    cfg = IntegratorConfig(1e-3, 1.0, record_stride=10)
    a = simulate(np.zeros(8), cfg, model, params, 5, alpha, trajectory=2)
    b = simulate(np.zeros(8), cfg, model, params, 5, alpha, trajectory=2)
    c = simulate(np.zeros(8), cfg, model, params, 5, alpha, trajectory=3)
    np.testing.assert_array_equal(a.v, b.v)
    assert not np.array_equal(a.v, c.v)
    assert len(a) == 101 and a.dt == pytest.approx(0.01)


def test_threads_reproduce_serial(setup):
    model, params, _, alpha = setup
    cfg = IntegratorConfig(1e-3, 1.0)
    serial = [simulate(np.zeros(8), cfg, model, params, 0, alpha, i).v for i in range(4)]
    with ThreadPoolExecutor(4) as pool:
        par = list(pool.map(lambda i: simulate(np.zeros(8), cfg, model, params, 0, alpha, i).v,
                            range(4)))
    for s, p in zip(serial, par):
        np.testing.assert_array_equal(s, p)


def test_blowup_reports_partial_record(setup):
    model, params, _, _ = setup
    cfg = IntegratorConfig(0.5, 50.0, scheme="explicit_euler")
    with pytest.raises(BlowUpError) as info:
        simulate(np.full(8, 10.0), cfg, model, params, 0)
    err = info.value
    assert 0 < err.time < 50.0
    assert len(err.record) >= 1 and np.all(np.isfinite(err.record.v))


def test_step_splitting_prevents_rotation_blowup():
    # pure rotation with explicit coupling: unsplit Euler gains energy every step
    base = abstract_model(2, 1, eigen=[1.0, 1.0], b_scale=0, coriolis_rate=0)
    cor = CoriolisOperator(np.array([[0.0, 50.0], [-50.0, 0.0]]))
    model = SpectralModel(base.basis, base.tensor, cor, 1e-3)
    z = np.zeros((1001, 1))
    plain, _ = integrate(np.array([1.0, 0.0]), z, model, 0.01)
    split, _ = integrate(np.array([1.0, 0.0]), z, model, 0.01, theta=0.05)
    assert np.linalg.norm(plain[-1, 0]) > 1e10
    assert np.linalg.norm(split[-1, 0]) < 2.0


def test_record_coverage(run):
    rec, _ = run
    assert rec.index(2.5) == 2500
    with pytest.raises(CoverageError):
        rec.index(6.0)


def test_config_validation():
    with pytest.raises(ParameterError):
        IntegratorConfig(0.0, 1.0)
    with pytest.raises(ParameterError):
        IntegratorConfig(1e-3, 1.0, scheme="rk4")
    with pytest.raises(ParameterError):
        IntegratorConfig(1e-3, 1.0, record_stride=0)
    with pytest.raises(ParameterError):
        LedgerConstants.for_model(abstract_model(4, 2, nu=0.4), 1.0, 0.0)


def test_ledger_row_matches_vectorized(run, setup):
    model = setup[0]
    rec, const = run
    led = energy_ledger(rec, model, const)
    for i in (0, 100, 4000):
        lhs, rhs = energy_ledger_row(rec.v[i], rec.v[i + 1], rec.z[i], rec.dt, model, const)
        assert lhs - rhs == pytest.approx(led.dineq_residual[i], rel=1e-12, abs=1e-12)


def test_energy_inequality_holds_on_run(run, setup):
    model = setup[0]
    rec, const = run
    led = energy_ledger(rec, model, const)
    assert np.all(led.dineq_residual <= 0)
    assert np.all(gronwall_residuals(rec, led) <= 0)
    ti = v_norm_time_integral(rec, led, 1.0, 5.0)
    assert ti.value <= ti.bound


def test_energy_defect_first_order(setup):
    model, params, _, alpha = setup
    worst = []
    for h, refine in ((2e-3, 2), (1e-3, 1)):
        rec = simulate(np.ones(8), IntegratorConfig(h, 2.0), model, params, 4, alpha, refine=refine)
        worst.append(np.max(np.abs(energy_defect(rec, model))))
    assert 1.5 <= worst[0] / worst[1] <= 3.0


def test_gronwall_envelope_closed_form():
    dt, n, g, p, y0 = 1e-3, 2001, -1.5, 0.7, 2.0
    t = np.arange(n) * dt
    env = gronwall_envelope(np.full(n, y0), np.full(n, g), np.full(n, p), dt)
    exact = y0 * np.exp(g * t) + 2 * p * np.expm1(g * t) / g
    np.testing.assert_allclose(env, exact, rtol=1e-6)


@settings(max_examples=30, deadline=None)
@given(g=st.floats(-5, 5), p=st.floats(0, 10), y0=st.floats(0, 10))
def test_gronwall_envelope_monotone_in_source(g, p, y0):
    n, dt = 50, 0.01
    lo = gronwall_envelope(np.full(n, y0), np.full(n, g), np.full(n, p), dt)
    hi = gronwall_envelope(np.full(n, y0), np.full(n, g), np.full(n, p + 1), dt)
    assert np.all(hi >= lo)
    assert np.all(np.isfinite(lo))


def test_adelta_bound_dominates(run, setup):
    model = setup[0]
    rec, _ = run
    Kc = fit_adelta_constant([rec], model, 0.25)
    bound = adelta_bound(rec, model, Kc, 0.25, 0.0, 1.0)
    assert np.all(bound.ratio <= 1.0 + K.C_TAU * rec.dt)
    assert bound.ratio[0] == pytest.approx(1.0)
    assert math.isfinite(bound.log_bound[-1])
