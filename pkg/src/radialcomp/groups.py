"""Step-two Carnot groups: Heisenberg and H-type groups.

Points are ``(x, z)`` with ``x`` horizontal (``R^n``) and ``z`` vertical
(``R^m``).  The law is ``(x, z)(x', z') = (x + x', z + z' + w/2)`` with
``w_a = <J_a x, x'>``.  The left-invariant horizontal fields are
``X_i = d/dx_i + 1/2 sum_a <J_a x, e_i> d/dz_a`` so that the vertical gain
along a closed horizontal loop equals its signed enclosed area.  With this
convention a point on the centre axis at height ``zeta`` has distance
``sqrt(4 pi zeta)`` from the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import rng

__all__ = [
    "GroupSpec",
    "GroupPoint",
    "heisenberg",
    "quaternionic_heisenberg",
    "group_multiply",
    "group_inverse",
    "dilate",
    "cc_distance",
    "cc_distance_rz",
    "cc_distance_xz",
    "horizontal_bm_step",
    "horizontal_gradient_norm",
    "ball_volume_mc",
]


@dataclass(frozen=True, eq=False)
class GroupSpec:
    """Structure maps ``J_1..J_m`` (skew ``n x n``) of a step-two group."""

    j_maps: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        j = np.asarray(self.j_maps, dtype=float)
        if j.ndim != 3 or j.shape[1] != j.shape[2]:
            raise ValueError("j_maps must have shape (m, n, n)")
        if not np.allclose(j, -np.transpose(j, (0, 2, 1)), atol=1e-12, rtol=0):
            raise ValueError("structure maps must be skew-symmetric")
        object.__setattr__(self, "j_maps", j)

    @property
    def n(self):
        return self.j_maps.shape[1]

    @property
    def m(self):
        return self.j_maps.shape[0]

    @property
    def is_htype(self):
        eye = np.eye(self.n)
        for a in range(self.m):
            for b in range(self.m):
                anti = self.j_maps[a] @ self.j_maps[b] + self.j_maps[b] @ self.j_maps[a]
                if not np.allclose(anti, -2.0 * eye * (a == b), atol=1e-12, rtol=0):
                    return False
        return True

    @property
    def homogeneous_dimension(self):
        return self.n + 2 * self.m

    @property
    def comparison_dimension(self):
        """Dimension ``n + 3m`` of the Bessel process bounding the radial part."""
        return self.n + 3 * self.m


def heisenberg():
    """First Heisenberg group, ``n = 2``, ``m = 1``, ``J`` = rotation by pi/2."""
    return GroupSpec(np.array([[[0.0, -1.0], [1.0, 0.0]]]), name="heisenberg")


def quaternionic_heisenberg():
    """Quaternionic Heisenberg group, ``n = 4``, ``m = 3``.

    ``J_1, J_2, J_3`` are left multiplication by ``i, j, k`` on ``H = R^4``.
    """
    ji = [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]]
    jj = [[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]]
    jk = [[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]]
    return GroupSpec(np.array([ji, jj, jk], dtype=float), name="quaternionic")


@dataclass(frozen=True, eq=False)
class GroupPoint:
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "z", np.atleast_1d(np.asarray(self.z, dtype=float)))

    @classmethod
    def identity(cls, spec):
        return cls(np.zeros(spec.n), np.zeros(spec.m))


def _check(p, spec):
    if p.x.shape[-1] != spec.n or p.z.shape[-1] != spec.m:
        raise ValueError(
            f"point with dimensions ({p.x.shape[-1]}, {p.z.shape[-1]}) does not match "
            f"group with (n, m) = ({spec.n}, {spec.m})"
        )


def _area(spec, x, y):
    # w_a = <J_a x, y>, broadcast over leading axes
    return np.einsum("aij,...j,...i->...a", spec.j_maps, x, y)


def group_multiply(p, q, spec):
    _check(p, spec)
    _check(q, spec)
    return GroupPoint(p.x + q.x, p.z + q.z + 0.5 * _area(spec, p.x, q.x))


def group_inverse(p):
    return GroupPoint(-p.x, -p.z)


def dilate(p, lam):
    """Anisotropic dilation ``(x, z) -> (lam x, lam^2 z)``."""
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    return GroupPoint(lam * p.x, lam * lam * p.z)


# --------------------------------------------------------------------------
# Carnot-Caratheodory distance from the origin.  Geodesics from 0 reaching
# (rho, zeta) have length theta rho / sin(theta) where theta in (0, pi)
# solves mu(theta) = (theta - sin cos) / sin^2 = 4 zeta / rho^2.


@njit(cache=True)
def _v_minus_sin(v):
    # v - sin v, accurate for small v
    if v > 0.5:
        return v - math.sin(v)
    v2 = v * v
    term = v * v2 / 6.0
    total = 0.0
    sign = 1.0
    for j in range(1, 10):
        total += sign * term
        term *= v2 / ((2 * j + 2) * (2 * j + 3))
        sign = -sign
    return total


@njit(cache=True)
def _theta_residual(theta, c):
    # (mu(theta) - c) (sin theta / theta)^2 and its derivative; no pole at pi
    s = math.sin(theta)
    co = math.cos(theta)
    t2 = theta * theta
    nn = 0.5 * _v_minus_sin(2.0 * theta)  # theta - sin cos
    sinc = s / theta
    val = nn / t2 - c * sinc * sinc
    dval = 2.0 * s * s / t2 - 2.0 * nn / (t2 * theta) - c * 2.0 * sinc * (theta * co - s) / t2
    return val, dval


@njit(cache=True)
def _solve_theta(c, guess):
    lo = 0.0
    hi = math.pi
    th = guess
    for _ in range(200):
        val, dval = _theta_residual(th, c)
        if val == 0.0:
            return th
        if val > 0.0:
            hi = th
        else:
            lo = th
        new = th - val / dval if dval > 0.0 else -1.0
        if not (lo <= new <= hi):
            new = 0.5 * (lo + hi)
        elif abs(new - th) <= 1e-8 * th:  # quadratic convergence: remaining error ~1e-16
            return new
        if hi - lo <= 4e-16 * hi:
            return 0.5 * (lo + hi)
        th = new
    return -1.0


@njit(cache=True)
def _solve_gap(c, guess):
    # u = pi - theta in (0, pi/2) for c > 10: (pi - u) + sin u cos u = c sin^2 u
    lo = 0.0
    hi = 0.5 * math.pi
    u = guess
    for _ in range(200):
        s = math.sin(u)
        co = math.cos(u)
        val = (math.pi - u) + s * co - c * s * s
        dval = -2.0 * s * s - 2.0 * c * s * co
        if val == 0.0:
            return u
        if val > 0.0:
            lo = u
        else:
            hi = u
        new = u - val / dval if dval < 0.0 else -1.0
        if not (lo <= new <= hi):
            new = 0.5 * (lo + hi)
        elif abs(new - u) <= 1e-8 * u:
            return new
        if hi - lo <= 4e-16 * hi:
            return 0.5 * (lo + hi)
        u = new
    return -1.0


# initial guesses: log(theta) and log(pi - theta) tabulated against log(c)
_TAB_N = 512
_LO_C, _MID_C, _HI_C = math.log(1e-8), math.log(10.0), math.log(1e16)


def _build_tables():
    lc1 = np.linspace(_LO_C, _MID_C, _TAB_N)
    lc2 = np.linspace(_MID_C, _HI_C, _TAB_N)
    t1 = np.array([math.log(_solve_theta(math.exp(v), min(1.5 * math.exp(v), 1.5))) for v in lc1])
    t2 = np.array([math.log(_solve_gap(math.exp(v), min(math.sqrt(math.pi / math.exp(v)), 0.75)))
                   for v in lc2])
    return t1, t2


_TAB_THETA, _TAB_GAP = _build_tables()


@njit(cache=True)
def _interp(table, lo, hi, v):
    pos = (v - lo) / (hi - lo) * (table.size - 1)
    i = min(max(int(pos), 0), table.size - 2)
    f = pos - i
    return math.exp((1.0 - f) * table[i] + f * table[i + 1])


@njit(cache=True)
def _cc_rho_zeta(rho, zeta):
    if zeta == 0.0:
        return rho
    if rho == 0.0:
        return math.sqrt(4.0 * math.pi * zeta)
    c = 4.0 * zeta / (rho * rho)
    if c > 10.0:
        if c > 1e16:
            guess = math.sqrt(math.pi / c)
        else:
            guess = _interp(_TAB_GAP, _MID_C, _HI_C, math.log(c))
        u = _solve_gap(c, guess)
        if u < 0.0:
            return np.nan
        return (math.pi - u) * rho / math.sin(u)
    if c < 1e-8:
        # theta ~ 3c/2, theta/sin(theta) = 1 + theta^2/6 + ...
        th = 1.5 * c
        return rho * (1.0 + th * th / 6.0)
    th = _solve_theta(c, _interp(_TAB_THETA, _LO_C, _MID_C, math.log(c)))
    if th < 0.0:
        return np.nan
    return th * rho / math.sin(th)


@njit(cache=True)
def _cc_array(rho, zeta, out):
    for i in range(rho.size):
        out[i] = _cc_rho_zeta(rho[i], zeta[i])


class RootSolveError(RuntimeError):
    pass


def cc_distance_rz(rho, zeta):
    """Distance from the origin as a function of ``rho = |x|`` and ``zeta = |z|``."""
    rho_a, zeta_a = np.broadcast_arrays(np.asarray(rho, dtype=float), np.asarray(zeta, dtype=float))
    shape = rho_a.shape
    r = np.ascontiguousarray(rho_a.ravel())
    zz = np.ascontiguousarray(np.abs(zeta_a).ravel())
    out = np.empty_like(r)
    _cc_array(r, zz, out)
    if np.isnan(out).any():
        raise RootSolveError("geodesic parameter solve did not converge")
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def cc_distance_xz(x, z):
    """Vectorised distance from the origin for arrays ``x (..., n)``, ``z (..., m)``."""
    return cc_distance_rz(np.linalg.norm(x, axis=-1), np.linalg.norm(z, axis=-1))


def cc_distance(p, spec):
    """Carnot-Caratheodory distance of ``p`` from the identity (H-type groups).

    Use ``cc_distance(group_multiply(group_inverse(q), p, spec), spec)`` for
    the distance between two points.
    """
    _check(p, spec)
    if not spec.is_htype:
        raise ValueError("closed-form distance is only available for H-type groups")
    return cc_distance_xz(p.x, p.z)


def horizontal_bm_step(p, dW, dt, spec):
    """One Euler step of the horizontal Brownian motion with generator sum X_i^2.

    ``dW`` is a Normal(0, dt I_n) increment.  The step is right
    multiplication by the horizontal element ``(sqrt(2) dW, 0)``, i.e.
    ``z += <J x_old, sqrt(2) dW> / 2``; the Levy-area term is dropped
    (weak order one in z, exact in x).
    """
    _check(p, spec)
    dW = np.asarray(dW, dtype=float)
    if dW.shape[-1] != spec.n:
        raise ValueError("increment dimension does not match the group")
    if not dt > 0:
        raise ValueError("dt must be positive")
    dx = math.sqrt(2.0) * dW
    return GroupPoint(p.x + dx, p.z + 0.5 * _area(spec, p.x, dx))


def horizontal_gradient_norm(p, spec, h=1e-5):
    """Central-difference norm of the horizontal gradient of the distance at ``p``.

    Directional derivatives are taken along ``t -> p (t e_i, 0)``.
    """
    grads = []
    for i in range(spec.n):
        e = np.zeros(spec.n)
        e[i] = h
        fwd = cc_distance(group_multiply(p, GroupPoint(e, np.zeros(spec.m)), spec), spec)
        bwd = cc_distance(group_multiply(p, GroupPoint(-e, np.zeros(spec.m)), spec), spec)
        grads.append((fwd - bwd) / (2.0 * h))
    return float(np.linalg.norm(grads))


def ball_volume_mc(spec, radii, n_samples, seed, chunk=1 << 18):
    """Monte Carlo Lebesgue volume of the balls ``B(0, s)`` for each ``s`` in ``radii``.

    Uniform points in the box ``[-S, S]^n x [-S^2/(2 pi), S^2/(2 pi)]^m``
    with ``S = max(radii)`` (the box contains the largest ball).  Returns
    ``(volumes, counts, box_volume)``.
    """
    radii = np.asarray(radii, dtype=float)
    s_max = float(radii.max())
    half = np.concatenate([np.full(spec.n, s_max), np.full(spec.m, s_max ** 2 / (2.0 * math.pi))])
    box_volume = float(np.prod(2.0 * half))
    counts = np.zeros(radii.size, dtype=np.int64)
    dim = spec.n + spec.m
    for start in range(0, n_samples, chunk):
        stop = min(start + chunk, n_samples)
        u = rng.uniforms(seed, (start, stop), dim=dim, stream=rng.STREAM_UNIFORM)
        pts = (2.0 * u - 1.0) * half
        d = cc_distance_xz(pts[:, : spec.n], pts[:, spec.n:])
        counts += (d[:, None] < radii[None, :]).sum(axis=0)
    return box_volume * counts / n_samples, counts, box_volume
