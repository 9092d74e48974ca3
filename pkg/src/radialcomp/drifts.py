"""Drift and comparison functions for the radial model diffusions.

The one-dimensional comparison diffusion has generator
``drift(r) d/dr + d^2/dr^2``.  For a Sasakian model with horizontal
dimension ``n`` and curvature bounds ``k1``, ``k2`` the drift is
``f_sas(r, k1) + (n - 2) f_rie(r, k2)``; H-type groups use
``(n + 3m - 1) / r``; warped Riemannian models use ``n h'(r) / h(r)``.

Scalar kernels are compiled with numba so the SDE engine can call them
inside its path loops.  They signal domain violations by returning NaN;
the public wrappers turn that into :class:`DomainError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

__all__ = [
    "DomainError",
    "QuadratureError",
    "f_rie",
    "f_sas",
    "sas_domain_limit",
    "SasakianModelSpec",
    "WarpingModel",
    "FoliationBounds",
    "sasakian_drift",
    "htype_drift",
    "model_drift",
    "model_curvature",
    "kappa_eps",
    "kappa_eps_bound",
    "general_bound_integral",
    "flat_model",
    "hyperbolic_model",
    "spherical_model",
]


class DomainError(ValueError):
    """A drift was evaluated outside the interval where it is defined."""


class QuadratureError(RuntimeError):
    pass


# kind codes shared with the compiled SDE kernels
KIND_SASAKIAN = 0
KIND_HTYPE = 1
KIND_WARPED = 2

_SERIES_X = 1e-3


@njit(cache=True)
def _g_trig(x):
    # sin x - x cos x without cancellation for small x
    if x >= 1.0:
        return math.sin(x) - x * math.cos(x)
    x2 = x * x
    term = x * x2 / 6.0  # x^3 / 3!
    total = 0.0
    sign = 1.0
    for j in range(1, 12):
        total += sign * 2.0 * j * term
        term *= x2 / ((2 * j + 2) * (2 * j + 3))
        sign = -sign
    return total


@njit(cache=True)
def _g_hyp(x):
    # x cosh x - sinh x without cancellation for small x
    if x >= 1.0:
        return x * math.cosh(x) - math.sinh(x)
    x2 = x * x
    term = x * x2 / 6.0
    total = 0.0
    for j in range(1, 12):
        total += 2.0 * j * term
        term *= x2 / ((2 * j + 2) * (2 * j + 3))
    return total


@njit(cache=True)
def _f_rie(r, k):
    if not r > 0.0:
        return np.nan
    x = math.sqrt(abs(k)) * r
    if x < _SERIES_X:
        u = k * r * r
        return (1.0 - u / 3.0 - u * u / 45.0 - 2.0 * u * u * u / 945.0) / r
    sk = math.sqrt(abs(k))
    if k > 0.0:
        if x >= math.pi:
            return np.nan
        return sk / math.tan(x)
    return sk / math.tanh(x)


@njit(cache=True)
def _f_sas(r, k):
    if not r > 0.0:
        return np.nan
    x = math.sqrt(abs(k)) * r
    if x < _SERIES_X:
        u = k * r * r
        return 4.0 * (1.0 - u / 30.0 - 11.0 * u * u / 25200.0 - u * u * u / 108000.0) / r
    sk = math.sqrt(abs(k))
    y = 0.5 * x
    if k > 0.0:
        if x >= 2.0 * math.pi:
            return np.nan
        return sk * _g_trig(x) / (4.0 * math.sin(y) * _g_trig(y))
    if x <= 2.0:
        return sk * _g_hyp(x) / (4.0 * math.sinh(y) * _g_hyp(y))
    e1 = math.exp(-x)
    e2 = e1 * e1
    num = x * (1.0 + e2) - (1.0 - e2)
    den = (1.0 - e1) * (y * (1.0 + e1) - (1.0 - e1))
    return 0.5 * sk * num / den


@njit(cache=True)
def _drift(r, kind, n, k1, k2, m):
    """Total comparison drift for the compiled kinds (sasakian, htype)."""
    if kind == KIND_HTYPE:
        if not r > 0.0:
            return np.nan
        return (n + 3.0 * m - 1.0) / r
    val = _f_sas(r, k1)
    if n > 2:
        val += (n - 2) * _f_rie(r, k2)
    return val


@njit(cache=True)
def _f_rie_array(r, k, out):
    for i in range(r.size):
        out[i] = _f_rie(r[i], k)


@njit(cache=True)
def _f_sas_array(r, k, out):
    for i in range(r.size):
        out[i] = _f_sas(r[i], k)


def _apply(kernel, r, k, name):
    arr = np.asarray(r, dtype=float)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    kernel(flat, float(k), out)
    if np.isnan(out).any():
        bad = flat[np.isnan(out)][0]
        raise DomainError(f"{name}(r={bad!r}, k={k!r}) is outside the domain of the drift")
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def f_rie(r, k):
    """Riemannian comparison function.

    ``sqrt(k) cot(sqrt(k) r)`` for ``k > 0``, ``1/r`` for ``k = 0`` and
    ``sqrt(|k|) coth(sqrt(|k|) r)`` for ``k < 0``.  Defined for
    ``0 < r < pi / sqrt(k)`` when ``k > 0``.  Accepts scalars or arrays.
    """
    return _apply(_f_rie_array, r, k, "f_rie")


def f_sas(r, k):
    """Sasakian comparison function.

    Equals ``4/r`` at ``k = 0``; for ``k != 0`` the trigonometric or
    hyperbolic ratio is evaluated through the factorisation
    ``2 - 2cos x - x sin x = 4 sin(x/2) (sin(x/2) - (x/2) cos(x/2))`` so the
    O(x^4) denominator never cancels.  For ``k > 0`` the domain ends at the
    first zero of that denominator, ``r = 2 pi / sqrt(k)``.
    """
    return _apply(_f_sas_array, r, k, "f_sas")


def sas_domain_limit(k, tol=1e-13):
    """First positive root ``r*`` of ``2 - 2cos(sqrt(k) r) - sqrt(k) r sin(sqrt(k) r)``.

    Returns ``inf`` for ``k <= 0``.  Found by a coarse scan followed by
    bisection on the variable ``x = sqrt(k) r``.
    """
    if k <= 0:
        return math.inf

    def den(x):
        return 2.0 - 2.0 * math.cos(x) - x * math.sin(x)

    # den > 0 just to the right of 0 (it behaves like x^4 / 12)
    step = 0.05
    lo = 0.5
    while den(lo + step) > 0.0:
        lo += step
        if lo > 20.0:
            raise RuntimeError("no sign change found for the Sasakian denominator")
    hi = lo + step
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if den(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) / math.sqrt(k)


@dataclass(frozen=True)
class WarpingModel:
    """Rotationally symmetric model ``dr^2 + h(r)^2 g_sphere``.

    ``h(0) = 0``, ``h'(0) = 1`` and ``h > 0`` on ``(0, inf)``; the radial
    curvature is ``-h''/h``.  Derivatives are supplied by the caller.
    """

    h: Callable
    h_prime: Callable
    h_second: Callable
    name: str = "custom"

    def check(self, r_grid=None, tol=1e-10):
        """Verify the model conditions at 0 and on a sample grid."""
        if abs(self.h(0.0)) > tol or abs(self.h_prime(0.0) - 1.0) > tol:
            raise ValueError(f"warping {self.name!r} must satisfy h(0)=0, h'(0)=1")
        if r_grid is None:
            r_grid = np.linspace(1e-3, 5.0, 101)
        if np.any(np.asarray(self.h(np.asarray(r_grid))) <= 0):
            raise ValueError(f"warping {self.name!r} is not positive on the sample grid")


def flat_model():
    return WarpingModel(lambda r: r, lambda r: np.ones_like(np.asarray(r, float)),
                        lambda r: np.zeros_like(np.asarray(r, float)), name="flat")


def hyperbolic_model(curvature=-1.0):
    """Constant negative curvature ``K < 0``: ``h = sinh(sqrt(-K) r) / sqrt(-K)``."""
    if curvature >= 0:
        raise ValueError("hyperbolic model needs negative curvature")
    a = math.sqrt(-curvature)
    return WarpingModel(lambda r: np.sinh(a * r) / a, lambda r: np.cosh(a * r),
                        lambda r: a * np.sinh(a * r), name=f"hyperbolic({curvature:g})")


def spherical_model(curvature=1.0):
    """Constant positive curvature ``K > 0``: ``h = sin(sqrt(K) r) / sqrt(K)``."""
    if curvature <= 0:
        raise ValueError("spherical model needs positive curvature")
    a = math.sqrt(curvature)
    return WarpingModel(lambda r: np.sin(a * r) / a, lambda r: np.cos(a * r),
                        lambda r: -a * np.sin(a * r), name=f"spherical({curvature:g})")


@dataclass(frozen=True)
class SasakianModelSpec:
    """Parameters of a one-dimensional comparison diffusion.

    kind is ``"sasakian"`` (drift ``f_sas(r,k1) + (n-2) f_rie(r,k2)``),
    ``"htype"`` (drift ``(n+3m-1)/r``, needs ``m``) or ``"warped"``
    (drift ``n h'/h``, needs ``model``).  ``k2`` is ignored when ``n = 2``.
    """

    n: int = 2
    k1: float = 0.0
    k2: float = 0.0
    kind: str = "sasakian"
    m: Optional[int] = None
    model: Optional[WarpingModel] = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"horizontal dimension must be an integer >= 2, got {self.n}")
        if self.kind not in ("sasakian", "htype", "warped"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "htype" and (self.m is None or self.m < 1):
            raise ValueError("htype models need a vertical dimension m >= 1")
        if self.kind == "warped" and self.model is None:
            raise ValueError("warped models need a WarpingModel")

    @property
    def kind_code(self):
        return {"sasakian": KIND_SASAKIAN, "htype": KIND_HTYPE, "warped": KIND_WARPED}[self.kind]

    @property
    def singular_coefficient(self):
        """Coefficient ``a`` of the ``a/r`` part of the drift near the origin."""
        if self.kind == "sasakian":
            return float(self.n + 2)
        if self.kind == "htype":
            return float(self.n + 3 * self.m - 1)
        return float(self.n)

    @property
    def bessel_dimension(self):
        """Dimension ``d`` with ``drift ~ (d - 1)/r`` near the origin."""
        return self.singular_coefficient + 1.0

    def domain_limit(self):
        """Largest radius (exclusive) where the drift is defined."""
        if self.kind != "sasakian":
            return math.inf
        lim = sas_domain_limit(self.k1)
        if self.n > 2 and self.k2 > 0:
            lim = min(lim, math.pi / math.sqrt(self.k2))
        return lim


def htype_drift(r, n, m):
    """``(n + 3m - 1) / r``, the H-type sub-Laplacian bound on the distance."""
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("htype_drift needs r > 0")
    out = (n + 3 * m - 1) / r
    return float(out) if out.ndim == 0 else out


def model_drift(r, model, n):
    """``n h'(r) / h(r)``."""
    r = np.asarray(r, dtype=float)
    h = np.asarray(model.h(r), dtype=float)
    if np.any(h == 0):
        raise DomainError(f"warping {model.name!r} vanishes at the evaluation radius")
    out = n * np.asarray(model.h_prime(r), dtype=float) / h
    return float(out) if out.ndim == 0 else out


def model_curvature(r, model):
    """Radial curvature ``-h''(r) / h(r)``."""
    r = np.asarray(r, dtype=float)
    h = np.asarray(model.h(r), dtype=float)
    if np.any(h == 0):
        raise DomainError(f"warping {model.name!r} vanishes at the evaluation radius")
    out = -np.asarray(model.h_second(r), dtype=float) / h
    return float(out) if out.ndim == 0 else out


def sasakian_drift(r, spec):
    """Comparison drift of ``spec`` at radius ``r`` (dispatches on ``spec.kind``)."""
    if spec.kind == "htype":
        return htype_drift(r, spec.n, spec.m)
    if spec.kind == "warped":
        return model_drift(r, spec.model, spec.n)
    val = f_sas(r, spec.k1)
    if spec.n > 2:
        val = val + (spec.n - 2) * f_rie(r, spec.k2)
    return val


def _as_function(v):
    if callable(v):
        return v
    c = float(v)
    return lambda r: c + 0.0 * np.asarray(r, dtype=float)


@dataclass(frozen=True)
class FoliationBounds:
    """Curvature lower bounds ``rho1``, ``rho2`` and the bound ``kappa`` as functions of r.

    Constants are accepted and wrapped.  ``epsilon`` is the scale of the
    approximating Riemannian metric.
    """

    rho1: object = 0.0
    rho2: object = 0.0
    kappa: object = 1.0
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "_constant", not any(callable(v) for v in (self.rho1, self.rho2, self.kappa)))
        for name in ("rho1", "rho2", "kappa"):
            object.__setattr__(self, name, _as_function(getattr(self, name)))

    @property
    def is_constant(self):
        return self._constant

    def check(self, r_grid):
        """True when ``kappa > 0`` and ``rho2 >= 0`` on ``r_grid``."""
        r_grid = np.asarray(r_grid, dtype=float)
        return bool(np.all(self.kappa(r_grid) > 0) and np.all(self.rho2(r_grid) >= 0))

    def horizontal(self, r):
        """``rho1(r) - kappa(r) / epsilon``."""
        return self.rho1(r) - self.kappa(r) / self.epsilon

    def lower_curvature(self, r):
        """``min(rho1 - kappa/eps, rho2/eps)``, the quantity entering the criteria."""
        return np.minimum(self.horizontal(r), self.rho2(r) / self.epsilon)


def kappa_eps(bounds):
    """``min(rho1 - kappa/eps, rho2/eps)`` for constant bounds."""
    if not bounds.is_constant:
        raise ValueError("kappa_eps needs constant curvature bounds")
    return float(bounds.lower_curvature(1.0))


def kappa_eps_bound(r, n, bounds=None, *, kappa=None):
    """Bound on the sub-Laplacian of the approximating distance, constant curvature.

    Either pass ``bounds`` (constant) or the value ``kappa`` of kappa_eps
    directly.  The three branches collapse to ``n * f_rie(r, kappa / n)``.
    """
    if kappa is None:
        if bounds is None:
            raise ValueError("need bounds or kappa")
        kappa = kappa_eps(bounds)
    return n * f_rie(r, kappa / n)


def _adaptive_simpson(f, a, b, tol, max_depth=60):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
        right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise QuadratureError(f"adaptive Simpson did not converge on [{a}, {b}]")
        return (recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def general_bound_integral(r, G, dG, bounds, gamma_h=1.0, gamma_v=0.0, n=2, tol=1e-10):
    """General sub-Laplacian bound for a test function ``G`` with ``G(0) = 0``.

    Returns ``G(r)^-2 * int_0^r (n G'(s)^2 - [(rho1 - kappa/eps) gamma_h
    + rho2 gamma_v] G(s)^2) ds``.  ``gamma_h`` and ``gamma_v`` stand for the
    horizontal and vertical gradient norms of the distance, which the
    caller provides (1 and 0 for a unit horizontal gradient).
    """
    if not r > 0:
        raise DomainError("general_bound_integral needs r > 0")
    if abs(G(0.0)) > 1e-12:
        raise ValueError("G must vanish at 0")
    probe = np.linspace(r * 1e-6, r, 33)
    if any(G(float(s)) <= 0 for s in probe):
        raise ValueError("G must be positive on (0, r]")
    if not 0.0 <= gamma_h <= 1.0 or gamma_v < 0:
        raise ValueError("need gamma_h in [0, 1] and gamma_v >= 0")

    def integrand(s):
        g = G(s)
        curv = float(bounds.horizontal(s)) * gamma_h + float(bounds.rho2(s)) * gamma_v
        return n * dG(s) ** 2 - curv * g * g

    total = _adaptive_simpson(integrand, 0.0, float(r), tol)
    return total / G(r) ** 2
