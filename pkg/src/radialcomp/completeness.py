"""Numerical check of the curvature criterion for stochastic completeness.

The criterion asks for ``c1 >= 0`` with

    min{rho1(s) - kappa(s)/eps, rho2(s)/eps} >= -n (c1^2 s^2 + c1)   for all s >= 0,

which makes ``G(s) = exp(c1 s^2 / 2)`` a supersolution and bounds the radial
part by the Gaussian barrier ``dr = dB + (n c1 r + C0) dt``.  The search below
samples ``s`` on a finite grid, so a feasible certificate is evidence and not
a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy import optimize

from .drifts import FoliationBounds, general_bound_integral
from .sde import SimConfig, barrier_moments, barrier_path

__all__ = [
    "CompletenessCertificate",
    "deficit",
    "is_feasible",
    "minimal_c1",
    "g_identity_check",
    "GIdentityResidual",
    "default_c0",
    "ProbeResult",
    "explosion_probe",
]

C1_MAX = 1e6


@dataclass(frozen=True, eq=False)
class CompletenessCertificate:
    """Outcome of :func:`minimal_c1`.

    ``deficit_curve`` holds ``-min{...} - n (c1^2 s^2 + c1)`` on ``s_grid``
    at the returned ``c1`` (at ``C1_MAX`` when infeasible).
    """

    feasible: bool
    c1: float
    worst_s: float
    s_grid: np.ndarray
    deficit_curve: np.ndarray
    n: int
    bounds: FoliationBounds = field(repr=False)
    refinement_depth: int = 0
    s_max: float = 0.0


def deficit(bounds, n, c1, s):
    """``-min{rho1 - kappa/eps, rho2/eps} - n (c1^2 s^2 + c1)``; feasible where ``<= 0``."""
    s = np.asarray(s, dtype=float)
    lower = np.asarray(bounds.lower_curvature(s), dtype=float)
    if not np.all(np.isfinite(lower)):
        bad = s[~np.isfinite(np.broadcast_to(lower, s.shape))]
        raise ValueError(f"curvature bounds not finite at s={bad[:3]}")
    return -lower - n * (c1 * c1 * s * s + c1)


def _scale(bounds, n, c1, s):
    # size of the terms, for a roundoff-aware comparison with zero
    lower = np.abs(np.asarray(bounds.lower_curvature(s), dtype=float))
    return lower + n * (c1 * c1 * s * s + c1) + 1.0


def _worst(bounds, n, c1, grid, depth):
    """Largest scaled deficit on ``grid`` after refining around local maxima."""
    d = deficit(bounds, n, c1, grid) / _scale(bounds, n, c1, grid)
    best = int(np.argmax(d))
    worst_val, worst_s = float(d[best]), float(grid[best])
    if depth > 0:
        interior = np.flatnonzero((d[1:-1] >= d[:-2]) & (d[1:-1] >= d[2:])) + 1
        # refine the largest few local maxima
        for i in interior[np.argsort(d[interior])[::-1][:8]]:
            lo, hi = grid[i - 1], grid[i + 1]
            res = optimize.minimize_scalar(
                lambda s: -float(deficit(bounds, n, c1, s) / _scale(bounds, n, c1, s)),
                bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-12 * max(hi, 1e-300), "maxiter": 200})
            if -res.fun > worst_val:
                worst_val, worst_s = float(-res.fun), float(res.x)
    return worst_val, worst_s


def is_feasible(bounds, n, c1, s_max=1e15, n_grid=4000, depth=1, rtol=1e-12):
    """Feasibility of ``c1`` on the sampled ``s`` grid (roundoff tolerance ``rtol``)."""
    grid = _s_grid(s_max, n_grid)
    return _worst(bounds, n, c1, grid, depth)[0] <= rtol


def _s_grid(s_max, n_grid):
    return np.concatenate([[0.0], np.geomspace(1e-8, s_max, n_grid - 1)])


def minimal_c1(bounds, n, s_max=1e15, tol=1e-9, n_grid=4000, depth=1, rtol=1e-12,
               c1_max=C1_MAX):
    """Smallest feasible ``c1`` by bisection on the monotone feasibility predicate.

    Feasibility is monotone because ``c1^2 s^2 + c1`` increases with ``c1``.
    ``tol`` is relative to ``max(c1, 1)``.
    """
    grid = _s_grid(s_max, n_grid)

    def feasible(c):
        return _worst(bounds, n, c, grid, depth)[0] <= rtol

    if not feasible(c1_max):
        curve = deficit(bounds, n, c1_max, grid)
        return CompletenessCertificate(False, float("inf"), float(grid[np.argmax(curve)]), grid,
                                       curve, n, bounds, depth, s_max)
    if feasible(0.0):
        c1 = 0.0
    else:
        lo, hi = 0.0, 1.0
        while not feasible(hi):
            lo, hi = hi, 2.0 * hi
        hi = min(hi, c1_max)
        while hi - lo > tol * max(hi, 1.0):
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        c1 = hi
    curve = deficit(bounds, n, c1, grid)
    worst_s = _worst(bounds, n, c1, grid, depth)[1]
    return CompletenessCertificate(True, float(c1), worst_s, grid, curve, n, bounds, depth, s_max)


@dataclass(frozen=True)
class GIdentityResidual:
    analytic: float
    finite_difference: float
    relative_finite_difference: float


@lru_cache(maxsize=1)
def _symbolic_residual():
    s, c = sp.symbols("s c1", nonnegative=True)
    G = sp.exp(c * s ** 2 / 2)
    res = sp.simplify(sp.diff(G, s, 2) - (c ** 2 * s ** 2 + c) * G)
    return sp.lambdify((c, s), res, "numpy")


def g_identity_check(c1, s_grid, h=1e-4):
    """Residuals of ``G'' = (c1^2 s^2 + c1) G`` for ``G = exp(c1 s^2 / 2)``.

    The analytic residual comes from symbolic differentiation (and is
    identically zero); the finite-difference one uses the central second
    difference with step ``h``.
    """
    if c1 < 0:
        raise ValueError("c1 must be >= 0")
    s = np.atleast_1d(np.asarray(s_grid, dtype=float))
    analytic = np.broadcast_to(_symbolic_residual()(c1, s), s.shape)

    def G(x):
        return np.exp(0.5 * c1 * x * x)

    fd = (G(s + h) - 2.0 * G(s) + G(s - h)) / (h * h)
    err = np.abs(fd - (c1 * c1 * s * s + c1) * G(s))
    return GIdentityResidual(float(np.max(np.abs(analytic))), float(err.max()),
                             float(np.max(err / G(s))))


def default_c0(certificate):
    """``general_bound_integral`` at ``r = c1`` with ``G(s) = s``, floored at 0.

    The criterion only asserts that some ``C0`` exists; this is a concrete,
    documented choice.  For ``c1 = 0`` the radius 1 is used.
    """
    r = certificate.c1 if certificate.c1 > 0 else 1.0
    val = general_bound_integral(r, lambda s: s, lambda s: 1.0, certificate.bounds,
                                 n=certificate.n)
    return max(0.0, float(val))


@dataclass(frozen=True, eq=False)
class ProbeResult:
    finite: bool
    verdict: bool
    max_sup: float
    violation_fraction: float
    times: np.ndarray
    envelope: np.ndarray
    sup_per_checkpoint: np.ndarray
    mean_check: np.ndarray = field(repr=False)


def explosion_probe(certificate, C0=None, horizon=1.0, config=None, r0=0.0, sigma2=1.0,
                    n_checkpoints=20, max_violation=1e-2):
    """Simulate the barrier process and compare it with ``e^{n c1 t}(r0 + C0 t + 6 sqrt(sigma2 t))``.

    The verdict requires every path to stay finite and the fraction of
    ``(path, checkpoint)`` pairs above the envelope to be below
    ``max_violation``.
    """
    if not certificate.feasible:
        raise ValueError("explosion_probe needs a feasible certificate")
    if config is None:
        config = SimConfig(dt=1e-3, horizon=horizon, n_paths=10000, seed=0)
    elif abs(config.horizon - horizon) > 1e-12:
        raise ValueError("config.horizon must equal horizon")
    if C0 is None:
        C0 = default_c0(certificate)
    n, c1 = certificate.n, certificate.c1
    times, paths = barrier_path(c1, C0, n, r0, config, sigma2)
    idx = np.unique(np.linspace(0, times.size - 1, n_checkpoints + 1).round().astype(int))[1:]
    t = times[idx]
    env = np.exp(n * c1 * t) * (r0 + C0 * t + 6.0 * np.sqrt(sigma2 * t))
    vals = paths[:, idx]
    finite = bool(np.all(np.isfinite(paths)))
    running = np.maximum.accumulate(paths, axis=1)[:, idx]
    frac = float(np.mean(vals > env[None, :]))
    means = np.array([barrier_moments(tt, c1, C0, n, r0, sigma2)[0] for tt in t])
    return ProbeResult(finite, finite and frac < max_violation, float(np.max(running)), frac,
                       t, env, running.max(axis=0), means)
