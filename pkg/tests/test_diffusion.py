"""Schedule algebra, forward/reverse exactness, and the analytic denoiser."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multishot.conditioning import Condition, encode_text_mock
from multishot.diffusion import (
    AnalyticDenoiser,
    GaussianWorld,
    add_noise,
    analytic_eps,
    ddim_step,
    make_schedule,
    sample_reverse,
)
from multishot.errors import ConfigError, NumericError, ScheduleError, ShapeError
from multishot.seeds import spawn_rng


def arr(*values):
    return np.array(values, dtype=float)


# --- make_schedule ----------------------------------------------------------


def test_schedule_hand_example():
    # products of (1 - beta) computed by hand: 0.9, 0.9*0.8, 0.9*0.8*0.7, ...
    sched = make_schedule(4, 0.1, 0.4)
    np.testing.assert_allclose(sched.betas, [0.1, 0.2, 0.3, 0.4], rtol=0, atol=1e-15)
    np.testing.assert_allclose(
        sched.alpha_bars, [0.9, 0.72, 0.504, 0.3024], rtol=1e-12
    )


def test_schedule_single_step():
    sched = make_schedule(1, 0.1, 0.1)
    np.testing.assert_allclose(sched.alpha_bars, [0.9], rtol=1e-15)


@pytest.mark.parametrize(
    "T,start,end",
    [(0, 0.1, 0.2), (4, 0.0, 0.2), (4, 0.3, 0.2), (4, 0.1, 1.0), (4, -0.1, 0.2)],
)
def test_schedule_rejects_bad_bounds(T, start, end):
    with pytest.raises(ConfigError):
        make_schedule(T, start, end)


def test_schedule_product_identity():
    sched = make_schedule(50)
    for t in range(2, sched.T + 1):
        ratio = sched.alpha_bar(t) / sched.alpha_bar(t - 1)
        assert abs(ratio - sched.alphas[t - 1]) < 1e-12
    assert sched.alpha_bar(0) == 1.0
    assert sched.alpha_bar(sched.T) > 0
    assert np.all(np.diff(sched.alpha_bars) < 0)
    assert np.all(np.diff(sched.betas) >= 0)


# --- add_noise --------------------------------------------------------------


def test_add_noise_scalar_case():
    sched = make_schedule(1, 0.36, 0.36)  # alpha_bar(1) = 0.64
    out = add_noise(arr(2.0), arr(1.0), 1, sched)
    np.testing.assert_allclose(out, [0.8 * 2.0 + 0.6 * 1.0], rtol=1e-12)


def test_add_noise_zero_inputs():
    sched = make_schedule(3, 0.1, 0.3)
    out = add_noise(np.zeros(4), np.zeros(4), 2, sched)
    np.testing.assert_array_equal(out, np.zeros(4))


def test_add_noise_no_noise_limit():
    # alpha_bar ~ 1 recovers x0
    sched = make_schedule(1, 1e-12, 1e-12)
    x0 = arr(1.5, -2.0, 0.25)
    np.testing.assert_allclose(add_noise(x0, arr(1.0, 1.0, 1.0), 1, sched), x0, atol=1e-6)


def test_add_noise_errors():
    sched = make_schedule(3, 0.1, 0.3)
    with pytest.raises(ShapeError):
        add_noise(np.zeros(3), np.zeros(4), 1, sched)
    for t in (0, 4):
        with pytest.raises(ScheduleError):
            add_noise(np.zeros(3), np.zeros(3), t, sched)


def test_add_noise_marginal_statistics():
    # 1e4 seeded draws: mean sqrt(a) x0, variance (1 - a), both within 5%.
    sched = make_schedule(10, 0.05, 0.5)
    t = 6
    a = sched.alpha_bar(t)
    x0 = spawn_rng("marginal-x0").standard_normal((2, 2, 2))
    rng = spawn_rng("marginal-eps")
    draws = np.stack([add_noise(x0, rng.standard_normal(x0.shape), t, sched) for _ in range(10_000)])
    np.testing.assert_allclose(draws.mean(axis=0), np.sqrt(a) * x0, atol=0.05)
    pooled_var = np.mean(draws.var(axis=0))
    assert abs(pooled_var / (1.0 - a) - 1.0) < 0.05


# --- ddim_step --------------------------------------------------------------


def test_ddim_inverts_hand_example():
    sched = make_schedule(1, 0.36, 0.36)
    out = ddim_step(arr(2.2), arr(1.0), 1, 0, sched)
    np.testing.assert_allclose(out, [2.0], rtol=1e-12)


def test_ddim_identity_when_alpha_bars_equal():
    # with eps_hat = 0 and alpha_bar(t) ~ alpha_bar(t_prev), x is unchanged
    sched = make_schedule(2, 1e-15, 1e-15)
    x = arr(0.7, -1.3)
    np.testing.assert_allclose(ddim_step(x, np.zeros(2), 2, 1, sched), x, atol=1e-9)


def test_exact_inversion_thousand_cases():
    sched = make_schedule(50)
    rng = spawn_rng("inversion")
    for _ in range(1000):
        t = int(rng.integers(1, 51))
        x0 = rng.standard_normal(6)
        eps = rng.standard_normal(6)
        x_t = add_noise(x0, eps, t, sched)
        np.testing.assert_allclose(ddim_step(x_t, eps, t, 0, sched), x0, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(
    t=st.integers(min_value=1, max_value=50),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_exact_inversion_property(t, seed):
    sched = make_schedule(50)
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((3, 2))
    eps = rng.standard_normal((3, 2))
    recovered = ddim_step(add_noise(x0, eps, t, sched), eps, t, 0, sched)
    np.testing.assert_allclose(recovered, x0, atol=1e-9)


def test_ddim_errors():
    sched = make_schedule(4, 0.1, 0.4)
    x = np.zeros(3)
    with pytest.raises(ScheduleError):
        ddim_step(x, x, 2, 2, sched)
    with pytest.raises(ScheduleError):
        ddim_step(x, x, 2, 3, sched)
    with pytest.raises(NumericError):
        ddim_step(np.array([np.nan, 0, 0]), x, 2, 1, sched)
    with pytest.raises(ConfigError):
        ddim_step(x, x, 2, 1, sched, eta=1.5)
    with pytest.raises(ConfigError):
        ddim_step(x, x, 2, 1, sched, eta=0.5)  # stochastic step needs noise


def test_ddim_eta_zero_at_final_step_matches_stochastic_formula():
    # sigma vanishes at t_prev = 0 even with eta = 1
    sched = make_schedule(4, 0.1, 0.4)
    x = arr(1.0, 2.0)
    eps = arr(0.5, -0.5)
    with_noise = ddim_step(x, eps, 1, 0, sched, eta=1.0, noise=np.ones(2))
    np.testing.assert_allclose(with_noise, ddim_step(x, eps, 1, 0, sched), atol=1e-12)


# --- analytic denoiser ------------------------------------------------------


def _const_world(mu_value, sigma0, shape=(1,)):
    mu = np.full(shape, float(mu_value))
    return GaussianWorld(sigma0=sigma0, mean_map=lambda cond: mu)


def test_analytic_eps_degenerate_prior():
    sched = make_schedule(1, 0.36, 0.36)
    world = _const_world(1.0, 0.0)
    out = analytic_eps(arr(1.0), 1, world, None, sched)
    np.testing.assert_allclose(out, [(1.0 - 0.8) / 0.6], rtol=1e-9)


def test_analytic_eps_zero_mean_unit_prior():
    sched = make_schedule(1, 0.36, 0.36)
    world = _const_world(0.0, 1.0)
    out = analytic_eps(arr(1.0), 1, world, None, sched)
    np.testing.assert_allclose(out, [0.6], rtol=1e-9)  # x_t * sqrt(1 - a)


def test_analytic_eps_on_mean_input():
    sched = make_schedule(1, 0.36, 0.36)
    world = _const_world(1.7, 0.0)
    out = analytic_eps(arr(0.8 * 1.7), 1, world, None, sched)
    np.testing.assert_allclose(out, [0.0], atol=1e-12)


def test_analytic_eps_matches_monte_carlo_regression():
    # Independent oracle: regress true eps on x_t over 1e5 forward draws;
    # the analytic prediction is the conditional mean, so the regression
    # line must match it.
    sched = make_schedule(1, 0.36, 0.36)
    sigma0, mu = 1.0, 0.0
    rng = spawn_rng("eps-regression")
    x0 = mu + sigma0 * rng.standard_normal(100_000)
    eps = rng.standard_normal(100_000)
    x_t = np.sqrt(0.64) * x0 + 0.6 * eps
    slope, intercept = np.polyfit(x_t, eps, 1)
    world = _const_world(mu, sigma0)
    predicted = analytic_eps(arr(1.0), 1, world, None, sched)[0] / 1.0  # slope at mu=0
    assert abs(slope - predicted) < 0.01
    assert abs(intercept) < 0.01


def test_analytic_eps_range_check():
    sched = make_schedule(2, 0.1, 0.2)
    with pytest.raises(ScheduleError):
        analytic_eps(arr(1.0), 3, _const_world(0.0, 1.0), None, sched)


# --- sample_reverse ---------------------------------------------------------


def test_sample_reverse_collapses_to_mean_when_sigma0_zero():
    sched = make_schedule(50)
    mu = spawn_rng("mu").standard_normal((4, 4, 2))
    world = GaussianWorld(sigma0=0.0, mean_map=lambda cond: mu)
    for seed in (0, 7, 123):
        out = sample_reverse(AnalyticDenoiser(world), None, sched, seed, shape=mu.shape)
        np.testing.assert_allclose(out, mu, atol=1e-6)


def test_sample_reverse_deterministic():
    sched = make_schedule(20)
    cond = Condition(text=encode_text_mock("north shore at dawn"))
    mu = spawn_rng("mu2").standard_normal((3, 3, 2))
    world = GaussianWorld(sigma0=0.5, mean_map=lambda c: mu)
    a = sample_reverse(AnalyticDenoiser(world), cond, sched, 42, shape=mu.shape)
    b = sample_reverse(AnalyticDenoiser(world), cond, sched, 42, shape=mu.shape)
    assert np.array_equal(a, b)
    c = sample_reverse(AnalyticDenoiser(world), cond, sched, 43, shape=mu.shape)
    assert not np.array_equal(a, c)


def test_gaussian_world_rejects_negative_std():
    with pytest.raises(ConfigError):
        GaussianWorld(sigma0=-0.1, mean_map=lambda c: np.zeros(1))
