"""Reproducible Monte Carlo for radial processes.

Four samplers:

* :func:`simulate_radial_paths` -- the comparison diffusion
  ``dr = drift(r) dt + sqrt(2) dB`` by drift-implicit Euler in the singular
  ``a/r`` part, absorbed (or just monitored) at ``R``;
* :func:`sample_radial_exact` -- exact Bessel transition ``|r0 e1 + sqrt(2t) Z|``;
* :func:`simulate_group_paths` -- horizontal Brownian motion on an H-type
  group with its Carnot-Caratheodory radius read out along the path;
* :func:`barrier_path` -- exact sampling of ``dr = sigma dB + (n c1 r + C0) dt``.

All randomness comes from :mod:`radialcomp.rng`, addressed by
``(seed, path, step)``, so results do not depend on how paths are split
across workers.
"""

from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from . import rng
from .drifts import KIND_WARPED, DomainError, SasakianModelSpec, _drift
from .groups import GroupPoint, GroupSpec, _cc_rho_zeta

__all__ = [
    "SimConfig",
    "RadialBatch",
    "default_workers",
    "simulate_radial_paths",
    "sample_radial_exact",
    "simulate_group_paths",
    "first_hitting_time",
    "barrier_path",
    "barrier_moments",
    "dump_paths",
    "load_paths",
]

WORKERS_ENV = "RADIALCOMP_WORKERS"


def default_workers():
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    horizon: float = 0.25
    n_paths: int = 10_000
    seed: int = 0
    r_floor: float = 1e-8
    bridge: bool = False  # Brownian-bridge crossing correction for hitting times

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.r_floor < 0:
            raise ValueError("r_floor must be >= 0")
        if not self.horizon >= 0:
            raise ValueError("horizon must be >= 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass
class RadialBatch:
    """Per-path radial readouts of one ensemble.

    ``hit_times`` holds ``inf`` for paths that did not reach ``R`` before the
    horizon.  ``checkpoint_values[:, j]`` is the radius at
    ``checkpoint_times[j]``; the last checkpoint is the horizon.  When paths
    are frozen at absorption the value after the hit is ``R``.
    """

    terminal_values: np.ndarray
    hit_times: np.ndarray
    qv: Optional[np.ndarray]
    alive_mask: np.ndarray
    checkpoint_times: np.ndarray
    checkpoint_values: np.ndarray
    R: float
    horizon: float
    qv_levels: Optional[np.ndarray] = None  # (n_paths, levels), stride 2**level steps
    clamped_steps: int = 0
    total_steps: int = 0
    paths: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self):
        return self.terminal_values.size

    def alive_at(self, t):
        return self.hit_times > t

    def values_at(self, t):
        idx = np.flatnonzero(np.isclose(self.checkpoint_times, t, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"no checkpoint at t={t}")
        return self.checkpoint_values[:, idx[0]]


def _checkpoint_steps(config, checkpoints):
    times = [] if checkpoints is None else [float(t) for t in checkpoints]
    if not times or abs(times[-1] - config.horizon) > 1e-12:
        times.append(config.horizon)
    times = np.array(sorted(set(times)))
    steps = np.rint(times / config.dt).astype(np.int64)
    if np.any(np.abs(steps * config.dt - times) > 1e-9 * max(1.0, config.horizon)):
        raise ValueError("checkpoint times must be multiples of dt")
    if times[-1] > config.horizon + 1e-12:
        raise ValueError("checkpoints beyond the horizon")
    return times, steps


def _run_chunks(func, n_paths, workers, chunk, kwargs):
    bounds = [(s, min(s + chunk, n_paths)) for s in range(0, n_paths, chunk)]
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(bounds) == 1:
        parts = [func(a, b, **kwargs) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(func, a, b, **kwargs) for a, b in bounds]
            parts = [f.result() for f in futures]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


# --------------------------------------------------------------------------
# one-dimensional comparison diffusion


@njit(cache=True)
def _remainder(r, kind, n, k1, k2, m, a):
    if r <= 0.0:
        return 0.0
    return _drift(r, kind, n, k1, k2, m) - a / r


@njit(cache=True)
def _implicit_step(r, g, a, dt, dw):
    b = r + g * dt + math.sqrt(2.0) * dw
    if a == 0.0:
        return b
    return 0.5 * (b + math.sqrt(b * b + 4.0 * a * dt))


@njit(cache=True)
def _radial_kernel(seed, start, stop, r0, R, dt, n_steps, kind, n, k1, k2, m, a,
                   r_floor, bridge, freeze, ckpt, vals, hits, qv, clamped, status):
    sdt = math.sqrt(dt)
    for i in range(stop - start):
        path = start + i
        r = r0
        hit = np.inf
        acc = 0.0
        j = 0
        nclamp = 0
        g1 = 0.0
        if r0 >= R:
            hit = 0.0
        for step in range(n_steps):
            if hit < np.inf and freeze:
                break
            if step % 2 == 0:
                z, g1 = rng.normal_pair(seed, path, step // 2, 0, rng.STREAM_RADIAL)
            else:
                z = g1
            g = _remainder(r, kind, n, k1, k2, m, a)
            if math.isnan(g):
                status[0] = 1
                return
            new = _implicit_step(r, g, a, dt, sdt * z)
            if new < r_floor:
                new = r_floor
                nclamp += 1
            if hit == np.inf:
                if new >= R:
                    hit = (step + (R - r) / (new - r)) * dt
                elif bridge:
                    p = math.exp(-(R - r) * (R - new) / dt)
                    u, _ = rng.uniform_pair(seed, path, step, 0, rng.STREAM_BRIDGE)
                    if u < p:
                        hit = (step + 0.5) * dt
            acc += (new - r) * (new - r)
            r = new
            while j < ckpt.size and ckpt[j] == step + 1:
                vals[i, j] = r
                j += 1
        # frozen (absorbed) paths sit at R for the remaining checkpoints
        while j < ckpt.size:
            vals[i, j] = R if (freeze and hit < np.inf) else r
            j += 1
        hits[i] = hit
        qv[i] = acc
        clamped[i] = nclamp


def _radial_chunk(start, stop, spec, r0, R, config, ckpt, freeze):
    n_ck = ckpt.size
    vals = np.empty((stop - start, n_ck))
    hits = np.empty(stop - start)
    qv = np.empty(stop - start)
    clamped = np.zeros(stop - start, dtype=np.int64)
    status = np.zeros(1, dtype=np.int64)
    if spec.kind_code == KIND_WARPED:
        _radial_numpy(start, stop, spec, r0, R, config, ckpt, freeze, vals, hits, qv, clamped)
    else:
        _radial_kernel(np.uint64(config.seed), start, stop, float(r0), float(R), config.dt,
                       config.n_steps, spec.kind_code, spec.n, float(spec.k1), float(spec.k2),
                       float(spec.m or 0), spec.singular_coefficient, config.r_floor,
                       config.bridge, freeze, ckpt, vals, hits, qv, clamped, status)
        if status[0]:
            raise DomainError("radial path left the domain of the comparison drift")
    return {"vals": vals, "hits": hits, "qv": qv, "clamped": clamped}


def _radial_numpy(start, stop, spec, r0, R, config, ckpt, freeze, vals, hits, qv, clamped):
    # warped models carry Python callables; vectorise across paths instead
    from .drifts import model_drift

    count = stop - start
    r = np.full(count, float(r0))
    hits[:] = np.where(r0 >= R, 0.0, np.inf)
    qv[:] = 0.0
    a = spec.singular_coefficient
    dt = config.dt
    j = 0
    for step in range(config.n_steps):
        active = ~((hits < np.inf) & freeze)
        if not active.any():
            break
        z = rng.normals(config.seed, (start, stop), step=step, dim=1, stream=rng.STREAM_RADIAL)[:, 0]
        rr = np.maximum(r, config.r_floor)
        g = model_drift(rr, spec.model, spec.n) - a / rr
        b = r + g * dt + math.sqrt(2.0 * dt) * z
        new = 0.5 * (b + np.sqrt(b * b + 4.0 * a * dt))
        low = new < config.r_floor
        new[low] = config.r_floor
        new = np.where(active, new, r)
        clamped += low & active
        fresh = (hits == np.inf) & active
        crossed = fresh & (new >= R)
        with np.errstate(divide="ignore", invalid="ignore"):
            hits[crossed] = (step + (R - r[crossed]) / (new[crossed] - r[crossed])) * dt
        if config.bridge:
            u = rng.uniforms(config.seed, (start, stop), step=step, stream=rng.STREAM_BRIDGE)[:, 0]
            p = np.exp(-(R - r) * (R - new) / dt)
            late = fresh & ~crossed & (u < p)
            hits[late] = (step + 0.5) * dt
        qv += np.where(active, (new - r) ** 2, 0.0)
        r = new
        while j < ckpt.size and ckpt[j] == step + 1:
            vals[:, j] = np.where(freeze & (hits < np.inf), R, r)
            j += 1
    while j < ckpt.size:
        vals[:, j] = np.where(freeze & (hits < np.inf), R, r)
        j += 1


def simulate_radial_paths(spec: SasakianModelSpec, r0, R, config: SimConfig, *,
                          checkpoints=None, freeze=True, workers=1, chunk=8192):
    """Simulate the comparison diffusion of ``spec`` from ``r0``.

    Drift-implicit Euler: with drift ``a/r + g(r)``, each step solves
    ``r' = r + (a/r' + g(r)) dt + sqrt(2) dW`` for its positive root, so the
    scheme stays positive without reflection.  ``R = inf`` disables
    absorption.  With ``freeze`` absorbed paths stop at ``R``; otherwise
    they keep moving and only their hitting time is recorded.
    """
    if r0 < 0:
        raise ValueError("r0 must be >= 0")
    R = float(R)
    lim = spec.domain_limit()
    if R > lim or (R == math.inf and lim < math.inf):
        raise DomainError(f"absorbing level {R} exceeds the drift domain (limit {lim})")
    times, ckpt = _checkpoint_steps(config, checkpoints)
    out = _run_chunks(_radial_chunk, config.n_paths, workers, chunk,
                      dict(spec=spec, r0=r0, R=R, config=config, ckpt=ckpt, freeze=freeze))
    vals = out["vals"]
    hits = out["hits"]
    return RadialBatch(
        terminal_values=vals[:, -1].copy(),
        hit_times=hits,
        qv=out["qv"],
        alive_mask=hits > config.horizon,
        checkpoint_times=times,
        checkpoint_values=vals,
        R=R,
        horizon=config.horizon,
        clamped_steps=int(out["clamped"].sum()),
        total_steps=config.n_paths * config.n_steps,
        meta={"sampler": "radial-implicit-euler", "spec": spec, "r0": r0, "config": config},
    )


def sample_radial_exact(d, r0, t, n_paths, seed):
    """Exact law at time ``t`` of the radial process with generator
    ``d^2/dr^2 + (d-1)/r d/dr`` started at ``r0``: ``|r0 e1 + sqrt(2t) Z|``.
    """
    if int(d) != d or d < 1:
        raise ValueError("dimension must be a positive integer")
    if t < 0:
        raise ValueError("t must be >= 0")
    z = rng.normals(seed, (0, n_paths), step=0, dim=int(d), stream=rng.STREAM_EXACT)
    v = math.sqrt(2.0 * t) * z
    v[:, 0] += r0
    return np.sqrt(np.einsum("ij,ij->i", v, v))


# --------------------------------------------------------------------------
# horizontal Brownian motion on a group


@njit(cache=True)
def _radius(x, z):
    rho = 0.0
    for v in x:
        rho += v * v
    zeta = 0.0
    for v in z:
        zeta += v * v
    return _cc_rho_zeta(math.sqrt(rho), math.sqrt(zeta)), math.sqrt(rho) + math.sqrt(4.0 * math.pi * math.sqrt(zeta))


@njit(cache=True)
def _group_kernel(seed, start, stop, J, x0, z0, R, dt, n_steps, bridge, freeze, ckpt,
                  n_levels, record, vals, hits, qv, paths, status):
    m = J.shape[0]
    nh = J.shape[1]
    sdt = math.sqrt(2.0 * dt)
    margin = math.sqrt(40.0 * dt)  # bridge crossing probability below e^-40 beyond this
    need_all = n_levels > 0 or record
    x = np.empty(nh)
    z = np.empty(m)
    xp = np.empty(nh)
    zp = np.empty(m)
    dx = np.empty(nh)
    last = np.empty(max(n_levels, 1))
    for i in range(stop - start):
        path = start + i
        x[:] = x0
        z[:] = z0
        d, ub = _radius(x, z)
        d_known = True
        hit = np.inf
        if d >= R:
            hit = 0.0
        for lev in range(n_levels):
            last[lev] = d
            qv[i, lev] = 0.0
        if record:
            paths[i, 0] = d
        j = 0
        for step in range(n_steps):
            if hit < np.inf and freeze:
                break
            xp[:] = x
            zp[:] = z
            for c in range(0, nh, 2):
                g0, g1 = rng.normal_pair(seed, path, step, c // 2, rng.STREAM_GROUP)
                dx[c] = sdt * g0
                if c + 1 < nh:
                    dx[c + 1] = sdt * g1
            for a in range(m):
                w = 0.0
                for p in range(nh):
                    s = 0.0
                    for q in range(nh):
                        s += J[a, p, q] * x[q]
                    w += s * dx[p]
                z[a] += 0.5 * w
            for p in range(nh):
                x[p] += dx[p]
            checkpoint = j < ckpt.size and ckpt[j] == step + 1
            d_prev = d
            prev_known = d_known
            rho = 0.0
            for v in x:
                rho += v * v
            zeta = 0.0
            for v in z:
                zeta += v * v
            ub = math.sqrt(rho) + math.sqrt(4.0 * math.pi * math.sqrt(zeta))
            near = ub >= R - margin or (prev_known and d_prev >= R - margin)
            if need_all or checkpoint or (hit == np.inf and near):
                d = _cc_rho_zeta(math.sqrt(rho), math.sqrt(zeta))
                if math.isnan(d):
                    status[0] = 1
                    return
                d_known = True
            else:
                d = ub
                d_known = False
            if hit == np.inf and d_known:
                if d >= R:
                    if not prev_known:
                        d_prev, _ = _radius(xp, zp)
                    hit = (step + (R - d_prev) / (d - d_prev)) * dt
                elif bridge:
                    if not prev_known:
                        d_prev, _ = _radius(xp, zp)
                    p = math.exp(-(R - d_prev) * (R - d) / dt)
                    u, _ = rng.uniform_pair(seed, path, step, 0, rng.STREAM_BRIDGE)
                    if u < p:
                        hit = (step + 0.5) * dt
            k = step + 1
            for lev in range(n_levels):
                if k % (1 << lev) == 0:
                    qv[i, lev] += (d - last[lev]) ** 2
                    last[lev] = d
            if record:
                paths[i, k] = d
            while j < ckpt.size and ckpt[j] == k:
                vals[i, j] = d
                j += 1
        while j < ckpt.size:
            if freeze and hit < np.inf:
                vals[i, j] = R
            else:
                dd, _ = _radius(x, z)
                vals[i, j] = dd
            j += 1
        hits[i] = hit


def _group_chunk(start, stop, spec, start_point, R, config, ckpt, freeze, n_levels, record):
    count = stop - start
    vals = np.empty((count, ckpt.size))
    hits = np.empty(count)
    qv = np.zeros((count, max(n_levels, 1)))
    paths = np.full((count if record else 1, config.n_steps + 1 if record else 1), np.nan)
    status = np.zeros(1, dtype=np.int64)
    _group_kernel(np.uint64(config.seed), start, stop, spec.j_maps, start_point.x.copy(),
                  start_point.z.copy(), float(R), config.dt, config.n_steps, config.bridge,
                  freeze, ckpt, n_levels, record, vals, hits, qv, paths, status)
    if status[0]:
        from .groups import RootSolveError

        raise RootSolveError("distance solve failed inside the path loop")
    out = {"vals": vals, "hits": hits, "qv": qv}
    if record:
        out["paths"] = paths
    return out


def simulate_group_paths(spec: GroupSpec, start: Optional[GroupPoint], R, config: SimConfig, *,
                         checkpoints=None, freeze=True, qv_levels=0, record_paths=False,
                         workers=1, chunk=4096):
    """Horizontal Brownian motion (generator ``sum X_i^2``) with radial readout.

    The radius is the distance from the identity.  Hitting of ``R`` is
    checked every step (an upper bound ``|x| + sqrt(4 pi |z|)`` skips the
    distance solve when the path is far from the sphere).  ``qv_levels = L``
    accumulates the realized quadratic variation of the radius on the
    partitions with strides ``1, 2, ..., 2**(L-1)`` steps.
    """
    if not spec.is_htype:
        raise ValueError("radial readout needs an H-type group")
    if start is None:
        start = GroupPoint.identity(spec)
    times, ckpt = _checkpoint_steps(config, checkpoints)
    out = _run_chunks(
        _group_chunk, config.n_paths, workers, chunk,
        dict(spec=spec, start_point=start, R=float(R), config=config, ckpt=ckpt, freeze=freeze,
             n_levels=int(qv_levels), record=bool(record_paths)),
    )
    vals = out["vals"]
    hits = out["hits"]
    qv_lv = out["qv"] if qv_levels else None
    return RadialBatch(
        terminal_values=vals[:, -1].copy(),
        hit_times=hits,
        qv=None if qv_lv is None else qv_lv[:, 0].copy(),
        alive_mask=hits > config.horizon,
        checkpoint_times=times,
        checkpoint_values=vals,
        R=float(R),
        horizon=config.horizon,
        qv_levels=qv_lv,
        total_steps=config.n_paths * config.n_steps,
        paths=out.get("paths"),
        meta={"sampler": "group-euler", "group": spec.name, "config": config},
    )


def first_hitting_time(radii, R, dt=1.0, t0=0.0):
    """First time a sampled path reaches ``R``, linearly interpolated; ``inf`` if never.

    ``radii[k]`` is the value at ``t0 + k dt``.
    """
    radii = np.asarray(radii, dtype=float)
    above = np.flatnonzero(radii >= R)
    if above.size == 0:
        return math.inf
    k = above[0]
    if k == 0:
        return t0
    a, b = radii[k - 1], radii[k]
    return t0 + (k - 1 + (R - a) / (b - a)) * dt


# --------------------------------------------------------------------------
# linear barrier process


def _barrier_coefficients(a, dt, C0, sigma2):
    # one exact step r -> growth r + shift + sd Z of dr = sigma dB + (a r + C0) dt
    if a == 0.0:
        return 1.0, C0 * dt, math.sqrt(sigma2 * dt)
    growth = math.exp(a * dt)
    shift = C0 * math.expm1(a * dt) / a
    sd = math.sqrt(sigma2 * math.expm1(2.0 * a * dt) / (2.0 * a))
    return growth, shift, sd


def barrier_moments(t, c1, C0, n, r0, sigma2=1.0):
    """Mean and variance of ``r_t`` for ``dr = sigma dB + (n c1 r + C0) dt``."""
    growth, shift, sd = _barrier_coefficients(n * c1, t, C0, sigma2)
    return growth * r0 + shift, sd * sd


def barrier_path(c1, C0, n, r0, config: SimConfig, sigma2=1.0):
    """Exact samples of the barrier process on the grid ``k dt``, ``k = 0..n_steps``.

    The process ``dr = sigma dB + (n c1 r + C0) dt`` is Gaussian, so each
    step uses the exact transition.  ``c1 = 0`` gives Brownian motion with
    drift ``C0``.  Returns ``(times, paths)`` with ``paths`` of shape
    ``(n_paths, n_steps + 1)``.
    """
    if c1 < 0:
        raise ValueError("c1 must be >= 0")
    if C0 < 0:
        raise ValueError("C0 must be >= 0")
    steps = config.n_steps
    growth, shift, sd = _barrier_coefficients(n * c1, config.dt, C0, sigma2)
    paths = np.empty((config.n_paths, steps + 1))
    paths[:, 0] = r0
    for k in range(steps):
        z = rng.normals(config.seed, (0, config.n_paths), step=k, stream=rng.STREAM_BARRIER)[:, 0]
        paths[:, k + 1] = growth * paths[:, k] + shift + sd * z
    return np.arange(steps + 1) * config.dt, paths


# --------------------------------------------------------------------------
# binary dump: little-endian header {u64 n_paths, u64 n_steps, f64 dt}, then
# row-major f64 radii of shape (n_paths, n_steps + 1)

_HEADER = struct.Struct("<QQd")


def dump_paths(path, radii, dt):
    radii = np.ascontiguousarray(radii, dtype="<f8")
    if radii.ndim != 2:
        raise ValueError("radii must be (n_paths, n_steps + 1)")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(radii.shape[0], radii.shape[1] - 1, float(dt)))
        fh.write(radii.tobytes(order="C"))


def load_paths(path):
    with open(path, "rb") as fh:
        n_paths, n_steps, dt = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(n_paths, n_steps + 1), dt
