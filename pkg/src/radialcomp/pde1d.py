"""Deterministic solvers for the one-dimensional comparison generator.

``L u = u'' + drift(r) u' = (1/w) (w u')'`` with speed weight
``w = exp(int drift)``.  The interval ``[0, R]`` is split into cells; the
left end is an entrance boundary (``w(0) = 0``, zero flux) and ``R`` is
absorbing.  Everything is assembled as the symmetric pair

    stiffness  A_ij  (finite-volume fluxes w(face)/h)
    mass       M_ii = int_cell w

so ``-L`` becomes the generalized symmetric problem ``A u = lambda M u``.

Probabilities returned by :func:`survival_cdf` are with respect to Lebesgue
measure in the radial variable, i.e. ``int_0^s q(t, r0, r) dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, special

from .drifts import SasakianModelSpec, sasakian_drift

__all__ = [
    "Grid1D",
    "EigenEstimate",
    "build_grid",
    "stiffness_mass",
    "eigen_1d",
    "eigen_1d_raw",
    "bessel_zero",
    "bessel_reference",
    "survival_cdf",
    "propagate",
    "mean_exit_1d",
    "mean_exit_bessel",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class EigenEstimate:
    value: float
    method: str
    resolution: str
    error_indicator: float
    extra: dict = field(default_factory=dict, compare=False)


def _remainder(spec, r):
    # bounded part of the drift: drift - a/r
    return sasakian_drift(r, spec) - spec.singular_coefficient / r


def _log_weight(spec, points):
    """``log w`` at increasing ``points > 0`` up to an additive constant."""
    points = np.asarray(points, dtype=float)
    a = spec.singular_coefficient
    edges = np.concatenate([[0.0], points])
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = _remainder(spec, nodes.ravel()).reshape(nodes.shape)
    pieces = half * (vals @ _GL_W)
    return a * np.log(points) + np.cumsum(pieces)


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Cell-centred grid on ``[0, R]`` with speed weights.

    ``weight`` is ``w`` at the cell centres, ``face_weight`` at the
    ``n_cells + 1`` faces (``face_weight[0] = 0``) and ``cell_mass`` the
    integral of ``w`` over each cell, all scaled by a common constant.
    """

    R: float
    n_cells: int
    nodes: np.ndarray
    weight: np.ndarray
    face_weight: np.ndarray
    cell_mass: np.ndarray
    spec: SasakianModelSpec

    @property
    def h(self):
        return self.R / self.n_cells


def build_grid(spec, R, n_cells):
    lim = spec.domain_limit()
    if R >= lim:
        raise ValueError(f"R={R} is outside the drift domain (limit {lim})")
    if n_cells < 4:
        raise ValueError("need at least 4 cells")
    h = R / n_cells
    faces = np.arange(n_cells + 1) * h
    nodes = faces[:-1] + 0.5 * h
    # Gauss points inside every cell for the mass integrals
    gauss = nodes[:, None] + 0.5 * h * _GL_X[None, :]
    pts = np.concatenate([faces[1:], nodes, gauss.ravel()])
    order = np.argsort(pts, kind="stable")
    logw_sorted = _log_weight(spec, pts[order])
    logw = np.empty_like(logw_sorted)
    logw[order] = logw_sorted
    shift = logw.max()
    logw -= shift
    nf = n_cells
    face_w = np.concatenate([[0.0], np.exp(logw[:nf])])
    node_w = np.exp(logw[nf: 2 * nf])
    gauss_w = np.exp(logw[2 * nf:]).reshape(n_cells, _GL_X.size)
    mass = 0.5 * h * (gauss_w @ _GL_W)
    return Grid1D(float(R), int(n_cells), nodes, node_w, face_w, mass, spec)


def stiffness_mass(grid, right="dirichlet"):
    """Tridiagonal stiffness ``(diag, off)`` and mass vector.

    ``right`` is ``"dirichlet"`` (absorbing at ``R``) or ``"neumann"``.
    """
    h = grid.h
    c = grid.face_weight / h
    if right == "dirichlet":
        c = c.copy()
        c[-1] = grid.face_weight[-1] / (0.5 * h)
    elif right == "neumann":
        c = c.copy()
        c[-1] = 0.0
    else:
        raise ValueError(f"unknown boundary condition {right!r}")
    diag = c[:-1] + c[1:]
    off = -c[1:-1]
    return diag, off, grid.cell_mass


def eigen_1d_raw(grid, tol=1e-14, max_iter=500):
    """Smallest eigenvalue of ``A u = lambda M u`` by inverse iteration."""
    diag, off, mass = stiffness_mass(grid)
    s = 1.0 / np.sqrt(mass)
    bd = diag * s * s
    bo = off * s[:-1] * s[1:]
    ab = np.zeros((2, bd.size))
    ab[0, 1:] = bo
    ab[1] = bd
    chol = linalg.cholesky_banded(ab, lower=False)
    v = np.sqrt(mass)  # ground state is close to positive and smooth
    v /= np.linalg.norm(v)
    lam = np.inf
    for it in range(max_iter):
        y = linalg.cho_solve_banded((chol, False), v)
        new = 1.0 / float(v @ y)
        v = y / np.linalg.norm(y)
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    else:
        raise RuntimeError("inverse iteration did not converge")
    bv = bd * v
    bv[:-1] += bo * v[1:]
    bv[1:] += bo * v[:-1]
    rayleigh = float(v @ bv)
    resid = float(np.linalg.norm(bv - rayleigh * v))
    return rayleigh, resid, it + 1, v * s


def eigen_1d(spec, R, n_cells=4096, richardson=True):
    """Smallest Dirichlet eigenvalue of ``-L`` on ``[0, R]``.

    With ``richardson`` the value is extrapolated from ``n_cells`` and
    ``n_cells / 2`` assuming second-order convergence, and the error
    indicator is the size of that correction.
    """
    fine, resid, iters, _ = eigen_1d_raw(build_grid(spec, R, n_cells))
    if not richardson:
        return EigenEstimate(fine, "sturm_liouville_fd", f"n_cells={n_cells}", resid,
                             {"iterations": iters})
    coarse, _, _, _ = eigen_1d_raw(build_grid(spec, R, n_cells // 2))
    value = fine + (fine - coarse) / 3.0
    return EigenEstimate(value, "sturm_liouville_fd", f"n_cells={n_cells},{n_cells // 2}",
                         abs(value - fine), {"fine": fine, "coarse": coarse, "residual": resid})


def bessel_zero(nu, k=1, tol=1e-12):
    """``k``-th positive zero of ``J_nu`` by scanning for sign changes and bisection."""
    if nu < 0:
        raise ValueError("order must be >= 0")
    x = max(nu, 1e-3)  # j_{nu,1} > nu
    f = special.jv(nu, x)
    found = 0
    step = 0.1  # well below the zero spacing (> pi for nu >= 1/2, about pi otherwise)
    while True:
        x2 = x + step
        f2 = special.jv(nu, x2)
        if f == 0.0 or f * f2 < 0.0:
            found += 1
            if found == k:
                lo, hi = x, x2
                break
        x, f = x2, f2
    flo = special.jv(nu, lo)
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        fm = special.jv(nu, mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bessel_reference(d, R):
    """First Dirichlet eigenvalue ``(j_{d/2-1,1} / R)^2`` of the ``d``-ball (generator Laplacian)."""
    return EigenEstimate((bessel_zero(d / 2.0 - 1.0) / R) ** 2, "bessel_zero_reference",
                         f"d={d}", 0.0)


def _theta_steps(diag, off, mass, dt, theta):
    # banded matrices for (M + theta dt A) u' = (M - (1-theta) dt A) u
    n = diag.size
    lhs = np.zeros((2, n))
    lhs[1] = mass + theta * dt * diag
    lhs[0, 1:] = theta * dt * off
    chol = linalg.cholesky_banded(lhs, lower=False)

    def step(u):
        rhs = mass * u
        if theta < 1.0:
            au = diag * u
            au[:-1] += off * u[1:]
            au[1:] += off * u[:-1]
            rhs = rhs - (1.0 - theta) * dt * au
        return linalg.cho_solve_banded((chol, False), rhs)

    return step


def propagate(grid, u0, times, right="dirichlet", dt=None, rannacher=True):
    """March ``du/dt = L u`` from ``u0`` and return ``u`` at each of ``times``.

    Crank-Nicolson with step about ``dt`` (default: the cell width) and a
    Rannacher start of two implicit-Euler half steps.
    """
    diag, off, mass = stiffness_mass(grid, right)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be sorted and non-negative")
    if dt is None:
        dt = grid.h
    u = np.asarray(u0, dtype=float).copy()
    out = np.empty((times.size, u.size))
    t_now = 0.0
    started = False
    for j, t_target in enumerate(times):
        span = t_target - t_now
        if span > 0:
            n = max(1, int(math.ceil(span / dt - 1e-12)))
            h = span / n
            cn = _theta_steps(diag, off, mass, h, 0.5)
            start = 0
            if rannacher and not started:
                ie = _theta_steps(diag, off, mass, 0.5 * h, 1.0)
                u = ie(ie(u))
                start = 1
            started = True
            for _ in range(start, n):
                u = cn(u)
            t_now = t_target
        out[j] = u
    return out


def _read_at(grid, u, r0):
    h = grid.h
    if r0 <= 0.5 * h:
        # u is even in r near the entrance boundary: fit a + b r^2
        a = (9.0 * u[0] - u[1]) / 8.0
        b = (u[1] - u[0]) / (2.0 * h * h)
        return a + b * r0 * r0
    return float(np.interp(r0, grid.nodes, u))


def indicator(grid, s):
    """``1_[0, s)`` smoothed over two cells around ``s``."""
    h = grid.h
    return np.clip((s - grid.nodes) / (2.0 * h) + 0.5, 0.0, 1.0)


def survival_cdf(spec, R, r0, t, s, n_cells=2048, grid=None, dt=None):
    """``P_r0(xi_t < s, t < tau_R)`` for the comparison diffusion.

    ``t`` and ``s`` may be scalars or 1-d arrays; the result has shape
    ``(len(s), len(t))`` in the array case.
    """
    if grid is None:
        grid = build_grid(spec, R, n_cells)
    if not 0 <= r0 < R:
        raise ValueError("need 0 <= r0 < R")
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(s_arr <= 0) or np.any(s_arr > R):
        raise ValueError("thresholds must lie in (0, R]")
    if np.any(s_arr < 2.0 * grid.h):
        raise ValueError("grid too coarse for the smallest threshold")
    order = np.argsort(t_arr)
    out = np.empty((s_arr.size, t_arr.size))
    for i, s_val in enumerate(s_arr):
        u0 = indicator(grid, s_val)
        sol = propagate(grid, u0, t_arr[order], dt=dt)
        for jj, j in enumerate(order):
            out[i, j] = 1.0 if (t_arr[j] == 0 and r0 < s_val) else (
                0.0 if t_arr[j] == 0 else _read_at(grid, sol[jj], r0))
    if np.ndim(s) == 0 and np.ndim(t) == 0:
        return float(out[0, 0])
    return out


def mean_exit_bessel(d, R, r0):
    """``(R^2 - r0^2) / (2 d)``, the mean exit time of the ``d``-dimensional radial process."""
    return (R * R - r0 * r0) / (2.0 * d)


def mean_exit_1d(spec, R, r0, epsabs=1e-12, epsrel=1e-10):
    """Mean exit time from ``[0, R)`` started at ``r0``.

    Solves ``L u = -1``, ``u(R) = 0``, ``u`` bounded at 0 via
    ``u(r0) = int_r0^R w(y)^-1 int_0^y w(z) dz dy``.
    """
    if not 0 <= r0 <= R:
        raise ValueError("need 0 <= r0 <= R")
    if R >= spec.domain_limit():
        raise ValueError("R outside the drift domain")
    if r0 == R:
        return 0.0
    a = spec.singular_coefficient

    def remainder_integral(lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x20, w20 = _GL20
        pts = mid + half * x20
        return half * float(_remainder(spec, pts) @ w20)

    def inner(y):
        # int_0^y w(z)/w(y) dz; w(z)/w(y) = (z/y)^a exp(-int_z^y g)
        def ratio(z):
            if z <= 0.0:
                return 0.0
            return (z / y) ** a * math.exp(-remainder_integral(z, y))

        val, _ = integrate.quad(ratio, 0.0, y, epsabs=epsabs, epsrel=epsrel, limit=200)
        return val

    val, _ = integrate.quad(inner, r0, R, epsabs=epsabs, epsrel=epsrel, limit=200)
    return val


_GL20 = np.polynomial.legendre.leggauss(20)
