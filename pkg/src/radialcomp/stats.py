"""Estimators and verdict machinery for the comparison experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

__all__ = [
    "CensoredSample",
    "DominanceReport",
    "dkw_epsilon",
    "censored_cdf",
    "dominance_test",
    "mean_with_ci",
    "realized_qv",
    "loglog_slope",
    "lil_statistic",
    "ks_distance",
]


def dkw_epsilon(n, delta):
    """Uniform CDF error ``sqrt(ln(2/delta) / (2 n))`` holding with probability ``1 - delta``."""
    if n <= 0 or not 0 < delta < 1:
        raise ValueError("need n > 0 and 0 < delta < 1")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


@dataclass(frozen=True)
class CensoredSample:
    """Radii at a fixed time plus a flag for paths not yet absorbed."""

    values: np.ndarray
    alive: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        a = np.asarray(self.alive, dtype=bool)
        if v.shape != a.shape or v.ndim != 1:
            raise ValueError("values and alive must be 1-d arrays of equal length")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "alive", a)

    @property
    def n(self):
        return self.values.size

    @classmethod
    def from_batch(cls, batch, t):
        return cls(batch.values_at(t), batch.alive_at(t))

    @classmethod
    def uncensored(cls, values):
        v = np.asarray(values, dtype=float)
        return cls(v, np.ones(v.shape, dtype=bool))


def censored_cdf(sample, thresholds):
    """Empirical ``P(radius < s, not absorbed)`` for each threshold ``s``."""
    s = np.asarray(thresholds, dtype=float)
    vals = np.sort(sample.values[sample.alive])
    return np.searchsorted(vals, s, side="left") / sample.n


@dataclass(frozen=True)
class DominanceReport:
    thresholds: np.ndarray
    lhs_cdf: np.ndarray
    rhs_cdf: np.ndarray
    margin: np.ndarray
    passed: np.ndarray

    @property
    def verdict(self):
        return bool(np.all(self.passed))

    @property
    def worst_gap(self):
        """Largest ``rhs - lhs - margin`` (positive means a failure)."""
        return float(np.max(self.rhs_cdf - self.lhs_cdf - self.margin))


def dominance_test(lhs, rhs, thresholds, delta=1e-3, R=None, rhs_tolerance=0.0, min_n=1000):
    """One-sided test of ``F_lhs(s) >= F_rhs(s)`` on a threshold grid.

    Parameters
    ----------
    lhs : CensoredSample
        Group-side radii.
    rhs : CensoredSample or array_like
        Model-side radii, or exact probabilities (one per threshold) whose
        numerical error is bounded by ``rhs_tolerance``.
    thresholds : array_like
        Values of ``s``; must lie in ``[0, R]`` when ``R`` is given.
    delta : float
        Failure probability per side for the DKW margin.
    """
    s = np.asarray(thresholds, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("thresholds must be a non-empty 1-d array")
    if np.any(s < 0) or (R is not None and np.any(s > R)):
        raise ValueError("threshold outside [0, R]")
    if lhs.n < min_n:
        raise ValueError(f"need at least {min_n} samples on the left side")
    f_lhs = censored_cdf(lhs, s)
    margin = dkw_epsilon(lhs.n, delta)
    if isinstance(rhs, CensoredSample):
        if rhs.n < min_n:
            raise ValueError(f"need at least {min_n} samples on the right side")
        f_rhs = censored_cdf(rhs, s)
        margin += dkw_epsilon(rhs.n, delta)
    else:
        f_rhs = np.asarray(rhs, dtype=float)
        if f_rhs.shape != s.shape:
            raise ValueError("exact right side needs one probability per threshold")
        margin += rhs_tolerance
    margins = np.full(s.shape, margin)
    return DominanceReport(s, f_lhs, f_rhs, margins, f_lhs >= f_rhs - margins)


def mean_with_ci(samples, confidence=0.99):
    """Sample mean and CLT half width at the given two-sided confidence."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 30:
        raise ValueError("need at least 30 samples for a CLT interval")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    if np.ptp(x) == 0:
        raise ValueError("degenerate sample: all values equal")
    z = sps.norm.ppf(0.5 + 0.5 * confidence)
    return float(x.mean()), float(z * x.std(ddof=1) / math.sqrt(x.size))


def realized_qv(paths):
    """Sum of squared increments along the last axis."""
    p = np.asarray(paths, dtype=float)
    return np.sum(np.diff(p, axis=-1) ** 2, axis=-1)


def loglog_slope(s, values, confidence=0.95):
    """Least-squares slope of ``log values`` against ``log s`` with a t-interval half width."""
    s = np.asarray(s, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.shape != v.shape or s.size < 2:
        raise ValueError("need at least two (s, value) pairs")
    if np.any(s <= 0) or np.any(v <= 0):
        raise ValueError("log-log fit needs positive data")
    if np.ptp(s) == 0:
        raise ValueError("degenerate abscissae")
    res = sps.linregress(np.log(s), np.log(v))
    if s.size > 2:
        half = sps.t.ppf(0.5 + 0.5 * confidence, s.size - 2) * res.stderr
    else:
        half = float("nan")
    return float(res.slope), float(half)


def lil_statistic(radii, T, level=1.0):
    """Fraction of ``radii / sqrt(2 T ln ln T)`` exceeding ``level``."""
    if T <= math.e:
        raise ValueError("need T > e so that ln ln T > 0")
    r = np.asarray(radii, dtype=float)
    if r.size == 0:
        raise ValueError("empty sample")
    scale = math.sqrt(2.0 * T * math.log(math.log(T)))
    return float(np.mean(r / scale > level))


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(sps.ks_2samp(a, b).statistic)
