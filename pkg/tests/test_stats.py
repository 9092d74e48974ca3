import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from radialcomp.groups import ball_volume_mc, heisenberg
from radialcomp.sde import SimConfig, simulate_group_paths
from radialcomp.stats import (
    CensoredSample,
    censored_cdf,
    dkw_epsilon,
    dominance_test,
    ks_distance,
    lil_statistic,
    loglog_slope,
    mean_with_ci,
    realized_qv,
)


def test_dkw_example():
    assert dkw_epsilon(10 ** 6, 1e-3) == pytest.approx(math.sqrt(math.log(2000) / 2e6))
    with pytest.raises(ValueError):
        dkw_epsilon(0, 0.1)
    with pytest.raises(ValueError):
        dkw_epsilon(10, 1.0)


@given(st.integers(1, 10 ** 9), st.integers(1, 10 ** 9), st.floats(1e-9, 0.5), st.floats(1e-9, 0.5))
def test_dkw_monotone(n1, n2, d1, d2):
    assume(n1 != n2 and d1 != d2)
    (na, nb), (da, db) = sorted((n1, n2)), sorted((d1, d2))
    assert dkw_epsilon(na, 0.1) > dkw_epsilon(nb, 0.1)
    assert dkw_epsilon(100, da) > dkw_epsilon(100, db)


def test_censored_cdf_counts_alive_below():
    s = CensoredSample([0.1, 0.5, 0.9, 0.2], [True, True, True, False])
    assert np.allclose(censored_cdf(s, [0.15, 0.6, 1.0]), [0.25, 0.5, 0.75])
    with pytest.raises(ValueError):
        CensoredSample([0.1, 0.2], [True])


def test_identical_samples_pass():
    v = np.random.default_rng(1).random(5000)
    alive = v < 0.8
    a = CensoredSample(v, alive)
    rep = dominance_test(a, CensoredSample(v.copy(), alive.copy()), np.linspace(0.1, 1, 10))
    assert rep.verdict and np.all(rep.margin > 0)
    assert rep.worst_gap < 0


def test_shifted_samples_fail():
    n = 20_000
    rng = np.random.default_rng(2)
    rhs = CensoredSample.uncensored(rng.random(n))
    margin = 2 * dkw_epsilon(n, 1e-3)
    lhs = CensoredSample.uncensored(rng.random(n) + 3 * margin)
    rep = dominance_test(lhs, rhs, [0.5], R=2.0)
    assert not rep.verdict


def test_exact_rhs_and_validation():
    lhs = CensoredSample.uncensored(np.random.default_rng(3).random(2000))
    s = np.array([0.25, 0.5, 0.75])
    rep = dominance_test(lhs, s, s, rhs_tolerance=1e-6)
    assert rep.verdict
    assert rep.margin[0] == pytest.approx(dkw_epsilon(2000, 1e-3) + 1e-6)
    with pytest.raises(ValueError):
        dominance_test(lhs, s, [0.5, 2.5], R=2.0)
    with pytest.raises(ValueError):
        dominance_test(lhs, s[:2], s)
    with pytest.raises(ValueError):
        dominance_test(CensoredSample.uncensored(np.ones(10)), s, s)


@settings(max_examples=20)
@given(st.integers(0, 10 ** 6), st.sampled_from(["exp", "cube", "affine"]))
def test_transform_invariance(seed, kind):
    f = {"exp": np.exp, "cube": lambda x: x ** 3, "affine": lambda x: 3 * x + 1}[kind]
    rng = np.random.default_rng(seed)
    a = CensoredSample(rng.random(1500), rng.random(1500) < 0.9)
    b = CensoredSample(rng.random(1500) * 1.02, rng.random(1500) < 0.9)
    s = np.linspace(0.05, 0.95, 7)
    r1 = dominance_test(a, b, s)
    r2 = dominance_test(CensoredSample(f(a.values), a.alive), CensoredSample(f(b.values), b.alive), f(s))
    assert np.array_equal(r1.passed, r2.passed)
    assert np.array_equal(r1.lhs_cdf, r2.lhs_cdf)


def test_false_failure_rate_below_delta():
    delta, trials = 0.1, 300
    s = np.linspace(0.05, 0.95, 19)
    failures = 0
    for k in range(trials):
        lhs = CensoredSample.uncensored(np.random.default_rng(k).random(1000))
        failures += not dominance_test(lhs, s, s, delta=delta).verdict
    assert failures / trials <= delta


# ------------------------------------------------------------------ estimators

def test_mean_with_ci():
    x = np.random.default_rng(0).standard_normal(10_000)
    m, half = mean_with_ci(x, confidence=0.95)
    assert half == pytest.approx(1.96 * x.std(ddof=1) / 100, rel=1e-3)
    assert abs(m) < half * 2
    with pytest.raises(ValueError):
        mean_with_ci(np.ones(10))
    with pytest.raises(ValueError):
        mean_with_ci(np.full(100, 2.0))


def test_realized_qv_of_ramp():
    for n in (10, 100, 1000):
        ramp = np.linspace(0.0, 2.0, n + 1)
        assert realized_qv(ramp) == pytest.approx(4.0 / n)


def test_realized_qv_of_brownian_path():
    rng = np.random.default_rng(5)
    w = np.concatenate([[0.0], np.cumsum(rng.standard_normal(100_000) * math.sqrt(1e-5))])
    assert realized_qv(w) == pytest.approx(1.0, rel=0.02)


@given(st.floats(1e-3, 1e3), st.floats(-5, 5))
def test_loglog_slope_exact_power(c, p):
    s = np.linspace(0.4, 1.2, 5)
    slope, half = loglog_slope(s, c * s ** p)
    assert slope == pytest.approx(p, abs=1e-10)
    assert half < 1e-6


def test_loglog_slope_validation():
    with pytest.raises(ValueError):
        loglog_slope([1.0], [1.0])
    with pytest.raises(ValueError):
        loglog_slope([1.0, 2.0], [1.0, -1.0])
    with pytest.raises(ValueError):
        loglog_slope([1.0, 1.0], [1.0, 2.0])


def test_volume_slope_heisenberg():
    s = np.array([0.4, 0.6, 0.8, 1.0, 1.2])
    vols, counts, _ = ball_volume_mc(heisenberg(), s, 200_000, seed=17)
    slope, half = loglog_slope(s, vols)
    assert slope == pytest.approx(4.0, abs=0.1)


def test_lil_statistic():
    T = 64.0
    scale = math.sqrt(2 * T * math.log(math.log(T)))
    r = np.array([0.5, 1.5, 2.0, 0.1]) * scale
    assert lil_statistic(r, T) == 0.5
    assert lil_statistic(r, T, level=1.8) == 0.25
    with pytest.raises(ValueError):
        lil_statistic(r, 2.0)


def test_ks_distance():
    a = np.arange(10.0)
    assert ks_distance(a, a) == 0.0
    assert ks_distance(a, a + 100) == 1.0


def test_large_time_mean_over_T_decreases():
    means = []
    for T in (1.0, 4.0, 16.0):
        cfg = SimConfig(dt=T / 400, horizon=T, n_paths=4000, seed=31)
        b = simulate_group_paths(heisenberg(), None, math.inf, cfg)
        means.append(mean_with_ci(b.terminal_values / T))
    for (m1, h1), (m2, h2) in zip(means, means[1:]):
        assert m2 + h2 < m1 - h1


@pytest.mark.slow
def test_lil_surrogate_at_fixed_horizon():
    # fixed-T surrogate for the iterated-logarithm bound: the fraction of
    # d(xi_T) / sqrt(2 T ln ln T) above 1.15 should be below 5% at T = 64
    T = 64.0
    cfg = SimConfig(dt=4e-3, horizon=T, n_paths=10_000, seed=64)
    b = simulate_group_paths(heisenberg(), None, math.inf, cfg)
    assert lil_statistic(b.terminal_values, T, level=1.15) < 0.05
