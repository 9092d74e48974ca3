import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radialcomp.drifts import DomainError, SasakianModelSpec
from radialcomp.groups import GroupPoint, heisenberg
from radialcomp.sde import (
    SimConfig,
    barrier_moments,
    barrier_path,
    dump_paths,
    first_hitting_time,
    load_paths,
    sample_radial_exact,
    simulate_group_paths,
    simulate_radial_paths,
)
from radialcomp.stats import mean_with_ci

H = heisenberg()
FLAT = SasakianModelSpec(2)  # comparison drift 4/r: Bessel process of dimension 5


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(n_paths=0)
    with pytest.raises(ValueError):
        SimConfig(seed=-1)
    assert SimConfig(dt=1e-3, horizon=0.25).n_steps == 250


def test_checkpoints_must_align():
    cfg = SimConfig(dt=1e-2, horizon=0.1, n_paths=10)
    with pytest.raises(ValueError):
        simulate_radial_paths(FLAT, 0.0, 1.0, cfg, checkpoints=[0.015])
    b = simulate_radial_paths(FLAT, 0.0, 1.0, cfg, checkpoints=[0.05])
    assert np.allclose(b.checkpoint_times, [0.05, 0.1])
    assert np.array_equal(b.values_at(0.1), b.terminal_values)
    with pytest.raises(KeyError):
        b.values_at(0.07)


def test_domain_checked():
    spec = SasakianModelSpec(2, k1=1.0)
    with pytest.raises(DomainError):
        simulate_radial_paths(spec, 0.0, 7.0, SimConfig(n_paths=4, horizon=0.01, dt=1e-3))
    with pytest.raises(DomainError):
        simulate_radial_paths(spec, 0.0, math.inf, SimConfig(n_paths=4, horizon=0.01, dt=1e-3))


def test_radial_reproducible_across_workers_and_chunks():
    cfg = SimConfig(dt=1e-3, horizon=0.2, n_paths=3000, seed=11)
    spec = SasakianModelSpec(3, k1=-1.0, k2=-0.5)
    a = simulate_radial_paths(spec, 0.0, 1.0, cfg, workers=1, chunk=3000)
    b = simulate_radial_paths(spec, 0.0, 1.0, cfg, workers=2, chunk=700)
    assert np.array_equal(a.terminal_values, b.terminal_values)
    assert np.array_equal(a.hit_times, b.hit_times)


def test_group_reproducible_across_workers_and_chunks():
    cfg = SimConfig(dt=1e-3, horizon=0.2, n_paths=2000, seed=4)
    a = simulate_group_paths(H, None, 1.0, cfg, workers=1, chunk=2000)
    b = simulate_group_paths(H, None, 1.0, cfg, workers=2, chunk=333)
    assert np.array_equal(a.terminal_values, b.terminal_values)
    assert np.array_equal(a.hit_times, b.hit_times)


def test_seed_changes_output():
    a = simulate_radial_paths(FLAT, 0.0, 1.0, SimConfig(dt=1e-3, horizon=0.05, n_paths=50, seed=1))
    b = simulate_radial_paths(FLAT, 0.0, 1.0, SimConfig(dt=1e-3, horizon=0.05, n_paths=50, seed=2))
    assert not np.array_equal(a.terminal_values, b.terminal_values)


def test_start_on_sphere_hits_immediately():
    cfg = SimConfig(dt=1e-3, horizon=0.05, n_paths=20)
    b = simulate_radial_paths(FLAT, 1.0, 1.0, cfg)
    assert np.all(b.hit_times == 0.0)
    assert np.all(b.terminal_values == 1.0)
    g = simulate_group_paths(H, GroupPoint([1.0, 0.0], [0.0]), 1.0, cfg)
    assert np.all(g.hit_times == 0.0)


def test_radial_second_moment():
    # E r_t^2 = 2 d t for the d-dimensional process started at 0
    cfg = SimConfig(dt=1e-3, horizon=0.25, n_paths=20_000, seed=7)
    b = simulate_radial_paths(FLAT, 0.0, math.inf, cfg)
    m, half = mean_with_ci(b.terminal_values ** 2, confidence=0.999)
    assert abs(m - 2.5) < half + 0.01


def test_radial_law_matches_exact_sampler():
    from radialcomp.stats import ks_distance

    cfg = SimConfig(dt=1e-3, horizon=0.3, n_paths=20_000, seed=9)
    sim = simulate_radial_paths(FLAT, 0.5, math.inf, cfg).terminal_values
    exact = sample_radial_exact(5, 0.5, 0.3, 20_000, seed=9)
    # two-sample KS critical value at level 1e-3 is about 1.95 sqrt(2/N)
    assert ks_distance(sim, exact) < 1.95 * math.sqrt(2 / 20_000) + 0.005


def test_exact_sampler_moments():
    r = sample_radial_exact(5, 1.0, 0.5, 50_000, seed=1)
    m, half = mean_with_ci(r ** 2, confidence=0.999)
    assert abs(m - (1.0 + 2 * 5 * 0.5)) < half
    assert np.all(sample_radial_exact(3, 2.0, 0.0, 10, seed=0) == 2.0)
    with pytest.raises(ValueError):
        sample_radial_exact(2.5, 0.0, 1.0, 10, seed=0)


def test_group_recorded_paths_and_scaling():
    cfg = SimConfig(dt=1e-3, horizon=0.2, n_paths=5000, seed=3)
    b = simulate_group_paths(H, None, math.inf, cfg, record_paths=True, checkpoints=[0.05])
    assert b.paths.shape == (5000, 201)
    assert np.all(b.paths[:, 0] == 0.0)
    assert np.array_equal(b.paths[:, -1], b.terminal_values)
    assert np.array_equal(b.paths[:, 50], b.values_at(0.05))
    # dilation invariance: d(xi_t) has the law of sqrt(t) d(xi_1)
    early = mean_with_ci(b.values_at(0.05) ** 2, confidence=0.999)
    late = mean_with_ci(b.terminal_values ** 2, confidence=0.999)
    assert abs(late[0] / early[0] - 4.0) < 4.0 * (late[1] / late[0] + early[1] / early[0])


def test_group_radius_exceeds_horizontal_part():
    # with x = sqrt(2) W and z = 0 at the start, |x|^2 has mean 4t; the radius
    # dominates |x| pathwise
    cfg = SimConfig(dt=1e-3, horizon=0.2, n_paths=5000, seed=3)
    b = simulate_group_paths(H, GroupPoint([0.0, 0.0], [0.0]), math.inf, cfg)
    m, _ = mean_with_ci(b.terminal_values ** 2)
    assert m > 4 * 0.2


def test_mean_exit_time_bessel():
    # mean exit time of the 5-dimensional process from B(0, R) is R^2 / 10
    cfg = SimConfig(dt=1e-4, horizon=2.0, n_paths=20_000, seed=5, bridge=True)
    b = simulate_radial_paths(FLAT, 0.0, 1.0, cfg)
    assert np.all(np.isfinite(b.hit_times))
    m, half = mean_with_ci(b.hit_times)
    assert abs(m - 0.1) <= 0.01 * 0.1 + half
    assert b.clamped_steps < 1e-3 * b.total_steps


def test_frozen_paths_stay_at_R():
    cfg = SimConfig(dt=1e-3, horizon=0.5, n_paths=500, seed=2)
    b = simulate_radial_paths(FLAT, 0.0, 0.5, cfg)
    hit = np.isfinite(b.hit_times)
    assert hit.mean() > 0.9
    assert np.all(b.terminal_values[hit] == 0.5)
    assert np.array_equal(b.alive_at(0.5), ~hit)


def test_unfrozen_paths_continue():
    cfg = SimConfig(dt=1e-3, horizon=0.5, n_paths=500, seed=2)
    b = simulate_radial_paths(FLAT, 0.0, 0.5, cfg, freeze=False)
    hit = np.isfinite(b.hit_times)
    assert np.any(b.terminal_values[hit] != 0.5)


# ------------------------------------------------------------------ hitting times

def test_first_hitting_time_examples():
    assert first_hitting_time([0.0, 0.5, 1.5], 1.0, dt=0.1) == pytest.approx(0.15)
    assert first_hitting_time([0.0, 0.5], 1.0) == math.inf
    assert first_hitting_time([2.0, 0.5], 1.0, t0=3.0) == 3.0


@given(st.lists(st.floats(0.0, 2.0), min_size=2, max_size=30), st.floats(0.1, 1.9))
def test_first_hitting_time_bracketed(radii, R):
    t = first_hitting_time(radii, R)
    if math.isinf(t):
        assert max(radii) < R
    else:
        k = math.ceil(t)
        assert radii[k] >= R and all(r < R for r in radii[: k])


# ------------------------------------------------------------------ barrier

@pytest.mark.parametrize("c1, C0", [(0.0, 0.0), (0.0, 1.5), (0.5, 1.0), (2.0, 0.2)])
def test_barrier_moments(c1, C0):
    cfg = SimConfig(dt=0.05, horizon=0.5, n_paths=40_000, seed=1)
    _, paths = barrier_path(c1, C0, 2, 0.3, cfg, sigma2=2.0)
    mean, var = barrier_moments(0.5, c1, C0, 2, 0.3, sigma2=2.0)
    end = paths[:, -1]
    se = math.sqrt(var / end.size)
    assert abs(end.mean() - mean) < 5 * se
    assert end.var() == pytest.approx(var, rel=0.05)


def test_barrier_closed_forms():
    assert barrier_moments(2.0, 0.0, 1.0, 3, 0.5, 1.0) == (2.5, pytest.approx(2.0))
    a = 3 * 0.5
    mean, var = barrier_moments(1.0, 0.5, 0.0, 3, 1.0, 1.0)
    assert mean == pytest.approx(math.exp(a))
    assert var == pytest.approx((math.exp(2 * a) - 1) / (2 * a))


def test_barrier_validation():
    cfg = SimConfig(dt=0.1, horizon=0.2, n_paths=3)
    with pytest.raises(ValueError):
        barrier_path(-1.0, 0.0, 2, 0.0, cfg)
    with pytest.raises(ValueError):
        barrier_path(0.0, -1.0, 2, 0.0, cfg)


# ------------------------------------------------------------------ dump

@settings(max_examples=10)
@given(st.integers(1, 5), st.integers(0, 6), st.floats(1e-6, 1.0))
def test_dump_round_trip(n, steps, dt):
    import os
    import tempfile

    radii = np.random.default_rng(n * 7 + steps).random((n, steps + 1))
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "paths.bin")
        dump_paths(path, radii, dt)
        back, dt2 = load_paths(path)
        assert os.path.getsize(path) == 24 + 8 * radii.size
    assert np.array_equal(back, radii) and dt2 == dt
