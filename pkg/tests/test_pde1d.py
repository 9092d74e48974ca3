import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from radialcomp.drifts import SasakianModelSpec
from radialcomp.pde1d import (
    bessel_reference,
    bessel_zero,
    build_grid,
    eigen_1d,
    indicator,
    mean_exit_1d,
    mean_exit_bessel,
    propagate,
    stiffness_mass,
    survival_cdf,
)
from radialcomp.sde import SimConfig, simulate_radial_paths
from radialcomp.stats import dkw_epsilon, loglog_slope, mean_with_ci

FLAT = SasakianModelSpec(2)


def bessel_series_cdf(d, R, s, t, terms=60):
    """``P_0(xi_t < s, t < tau_R)`` for the d-dimensional radial process by eigenfunction series."""
    nu = d / 2.0 - 1.0
    total = 0.0
    for k in range(1, terms + 1):
        j = float(mp.besseljzero(nu, k))
        phi0 = (j / (2 * R)) ** nu / math.gamma(nu + 1)
        norm2 = 0.5 * R * R * special.jv(nu + 1, j) ** 2
        partial = (R / j) * s ** (nu + 1) * special.jv(nu + 1, j * s / R)
        total += math.exp(-(j / R) ** 2 * t) * phi0 * partial / norm2
    return total


# ------------------------------------------------------------------ Bessel zeros

@pytest.mark.parametrize("nu, expected", [
    (0.5, math.pi), (1.5, 4.4934094579), (0.0, 2.4048255577),
])
def test_bessel_zero_examples(nu, expected):
    assert bessel_zero(nu) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("nu", [0.0, 1.0, 2.0, 5.0, 11.0, 40.0])
def test_bessel_zero_integer_orders(nu):
    for k in (1, 2, 3):
        assert bessel_zero(nu, k) == pytest.approx(special.jn_zeros(int(nu), 3)[k - 1], rel=1e-11)


@settings(max_examples=25)
@given(st.floats(0.0, 60.0))
def test_bessel_zero_against_mpmath(nu):
    assert bessel_zero(nu) == pytest.approx(float(mp.besseljzero(nu, 1)), rel=1e-10)


def test_bessel_zero_rejects_negative_order():
    with pytest.raises(ValueError):
        bessel_zero(-0.5)


# ------------------------------------------------------------------ eigenvalues

def test_eigen_flat_example():
    est = eigen_1d(FLAT, 1.0)
    assert est.value == pytest.approx(20.1907, abs=2e-3)
    ref = bessel_reference(5, 1.0).value
    assert abs(est.value - ref) <= 1e-4 * ref
    assert est.error_indicator < 1e-4


def test_eigen_htype_example():
    spec = SasakianModelSpec(4, kind="htype", m=3)
    est = eigen_1d(spec, 1.0)
    assert est.value == pytest.approx(bessel_zero(5.5) ** 2, rel=1e-4)


@pytest.mark.parametrize("R", [0.5, 2.0, 3.7])
def test_eigen_dilation_scaling(R):
    base = eigen_1d(FLAT, 1.0).value
    assert eigen_1d(FLAT, R).value == pytest.approx(base / R ** 2, rel=1e-6)


def test_eigen_monotone_in_R():
    spec = SasakianModelSpec(3, k1=-0.5, k2=0.3)
    vals = [eigen_1d(spec, R, n_cells=1024).value for R in (0.5, 1.0, 1.5, 2.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_eigen_decreasing_in_curvature():
    # lower curvature means a larger outward drift, faster exit and a larger eigenvalue
    ks = [-2.0, -1.0, 0.0, 0.5, 1.0]
    by_k1 = [eigen_1d(SasakianModelSpec(3, k1=k, k2=0.0), 1.0, n_cells=1024).value for k in ks]
    by_k2 = [eigen_1d(SasakianModelSpec(3, k1=0.0, k2=k), 1.0, n_cells=1024).value for k in ks]
    assert all(a > b for a, b in zip(by_k1, by_k1[1:]))
    assert all(a > b for a, b in zip(by_k2, by_k2[1:]))


def test_build_grid_validation():
    with pytest.raises(ValueError):
        build_grid(SasakianModelSpec(2, k1=1.0), 7.0, 64)
    with pytest.raises(ValueError):
        build_grid(FLAT, 1.0, 2)
    with pytest.raises(ValueError):
        stiffness_mass(build_grid(FLAT, 1.0, 8), right="robin")


# ------------------------------------------------------------------ time stepping

def test_neumann_conserves_mass():
    grid = build_grid(SasakianModelSpec(2, k1=-1.0), 2.0, 256)
    u0 = indicator(grid, 0.7)
    mass = grid.cell_mass
    total = mass @ u0
    sol = propagate(grid, u0, np.arange(1, 11) * grid.h, right="neumann")
    drift = np.abs(sol @ mass - total) / total
    assert np.all(drift <= 1e-10 * np.arange(1, 11))


def test_survival_limits():
    assert survival_cdf(FLAT, 2.0, 0.5, 0.0, 1.0) == 1.0
    assert survival_cdf(FLAT, 2.0, 1.5, 0.0, 1.0) == 0.0
    assert survival_cdf(FLAT, 2.0, 0.5, 1e-4, 1.0, n_cells=4096) == pytest.approx(1.0, abs=1e-6)
    assert survival_cdf(FLAT, 2.0, 1.5, 1e-4, 1.0, n_cells=4096) == pytest.approx(0.0, abs=1e-6)
    assert survival_cdf(FLAT, 2.0, 0.0, 20.0, 2.0, n_cells=256) < 1e-20


def test_survival_monotone():
    s = np.linspace(0.1, 2.0, 20)
    t = np.array([0.05, 0.1, 0.25, 0.5, 1.0])
    F = survival_cdf(SasakianModelSpec(3, k1=-1.0, k2=-0.2), 2.0, 0.3, t, s, n_cells=512)
    assert F.shape == (20, 5)
    assert np.all(np.diff(F, axis=0) >= -1e-12)
    assert np.all(np.diff(F[-1]) <= 1e-12)
    assert np.all((F >= -1e-12) & (F <= 1 + 1e-12))


def test_survival_validation():
    with pytest.raises(ValueError):
        survival_cdf(FLAT, 2.0, 2.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        survival_cdf(FLAT, 2.0, 0.0, 0.1, 2.5)
    with pytest.raises(ValueError):
        survival_cdf(FLAT, 2.0, 0.0, 0.1, 1e-3, n_cells=64)


def test_survival_matches_eigenfunction_series():
    exact = bessel_series_cdf(5, 2.0, 1.0, 0.25)
    got = survival_cdf(FLAT, 2.0, 0.0, 0.25, 1.0, n_cells=2048)
    assert abs(got - exact) <= 2 * dkw_epsilon(10 ** 6, 1e-3)
    assert got == pytest.approx(exact, abs=1e-5)


def test_survival_matches_monte_carlo():
    cfg = SimConfig(dt=1e-4, horizon=0.25, n_paths=20_000, seed=21, bridge=True)
    b = simulate_radial_paths(FLAT, 0.0, 2.0, cfg)
    mc = np.mean(b.alive_mask & (b.terminal_values < 1.0))
    pde = survival_cdf(FLAT, 2.0, 0.0, 0.25, 1.0)
    assert abs(mc - pde) <= dkw_epsilon(20_000, 1e-3)


def test_small_s_slope():
    s = np.geomspace(0.02, 0.2, 8)
    F = survival_cdf(FLAT, 2.0, 0.5, 0.25, s, n_cells=4096)[:, 0]
    slope, _ = loglog_slope(s, F)
    assert slope == pytest.approx(5.0, abs=0.1)


# ------------------------------------------------------------------ mean exit

def test_mean_exit_examples():
    assert mean_exit_1d(FLAT, 1.0, 0.0) == pytest.approx(0.1, rel=1e-9)
    assert mean_exit_1d(FLAT, 1.0, 1.0) == 0.0
    assert mean_exit_bessel(5, 1.0, 0.0) == 0.1


@given(st.floats(0.1, 3.0), st.floats(0.0, 0.99))
@settings(max_examples=15)
def test_mean_exit_flat_closed_form(R, frac):
    r0 = frac * R
    assert mean_exit_1d(FLAT, R, r0) == pytest.approx(mean_exit_bessel(5, R, r0), rel=1e-8)


def test_mean_exit_negative_curvature():
    spec = SasakianModelSpec(2, k1=-1.0)
    val = mean_exit_1d(spec, 1.0, 0.0)
    assert 0.09 <= val <= 0.1
    cfg = SimConfig(dt=1e-4, horizon=2.0, n_paths=20_000, seed=8, bridge=True)
    b = simulate_radial_paths(spec, 0.0, 1.0, cfg)
    m, half = mean_with_ci(b.hit_times)
    assert abs(m - val) <= 0.01 * val + half


def test_mean_exit_validation():
    with pytest.raises(ValueError):
        mean_exit_1d(FLAT, 1.0, 1.5)
    with pytest.raises(ValueError):
        mean_exit_1d(SasakianModelSpec(2, k1=1.0), 7.0, 0.0)
