"""Dirichlet spectrum of the sub-Laplacian on Heisenberg CC balls.

The operator is assembled in quadratic-form shape ``A = X_h^T X_h + Y_h^T Y_h``
where ``X_h, Y_h`` are centred differences of the left-invariant fields
restricted to the grid nodes inside the ball (zero outside).  ``A`` then
approximates ``-Delta_H`` and is symmetric positive semidefinite by
construction.  A Monte Carlo tail fit of exit times gives an independent
estimate usable on any group or radial model.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse, stats
from scipy.sparse import linalg as spla

from .drifts import SasakianModelSpec
from .groups import GroupSpec, cc_distance_rz
from .pde1d import EigenEstimate
from .sde import SimConfig, simulate_group_paths, simulate_radial_paths

__all__ = [
    "Grid3D",
    "SparseOperator",
    "build_grid3d",
    "assemble_sub_laplacian",
    "smallest_dirichlet_eigenvalue",
    "eigen_3d",
    "mc_lambda1",
    "survival_tail_fit",
    "export_coo",
    "SolverStagnation",
]

_MEMORY_BUDGET = 3.0e9  # bytes, rough cap on the assembled operator


class SolverStagnation(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Grid3D:
    """Node grid ``[-a, a] x [-a, a] x [-c, c]`` with ``cells + 1`` nodes per axis."""

    half_widths: tuple
    cells: tuple
    R: float
    periodic: bool = False
    interior_mask: np.ndarray = field(default=None, repr=False)

    @property
    def spacings(self):
        return tuple(2.0 * w / n for w, n in zip(self.half_widths, self.cells))

    @property
    def shape(self):
        if self.periodic:
            return tuple(self.cells)
        return tuple(n + 1 for n in self.cells)

    def axes(self):
        out = []
        for w, n, h in zip(self.half_widths, self.shape, self.spacings):
            out.append(-w + h * np.arange(n))
        return out

    @property
    def n_interior(self):
        return int(self.interior_mask.sum())


def build_grid3d(R=1.0, cells=96, pad=1.1, periodic=False):
    """Box grid containing the CC ball of radius ``R`` about the identity.

    The vertical half width scales as ``R^2`` like the dilations.  The ball
    is highest off the axis: the semicircle geodesic of length ``R`` ends at
    height ``R^2 / (2 pi)``, twice the height of the pole.  Both extents are
    multiplied by ``pad``.
    """
    if np.isscalar(cells):
        cells = (int(cells),) * 3
    if pad < 1.0:
        raise ValueError("pad must be >= 1 so that the box contains the ball")
    a = pad * R
    c = pad * R * R / (2.0 * math.pi)
    g = Grid3D((a, a, c), tuple(cells), float(R), periodic)
    x, y, z = g.axes()
    if periodic:
        mask = np.ones(g.shape, dtype=bool)
    else:
        X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
        d = cc_distance_rz(np.hypot(X, Y).ravel(), np.abs(Z).ravel())
        mask = (d < R).reshape(g.shape)
    if not mask.any():
        raise ValueError("empty interior mask")
    object.__setattr__(g, "interior_mask", mask)
    return g


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """``A`` (CSR, interior unknowns only) with the grid it lives on."""

    matrix: sparse.csr_matrix
    grid: Grid3D
    index: np.ndarray  # flat grid index of each unknown

    @property
    def dimension(self):
        return self.matrix.shape[0]


def _diff1d(n, h, periodic, forward):
    """One-sided difference with zero (or periodic) values beyond the ends."""
    inv = 1.0 / h
    if forward:
        d = sparse.diags([np.full(n, -inv), np.full(n - 1, inv)], [0, 1], shape=(n, n),
                         format="lil")
        if periodic:
            d[n - 1, 0] = inv
    else:
        d = sparse.diags([np.full(n, inv), np.full(n - 1, -inv)], [0, -1], shape=(n, n),
                         format="lil")
        if periodic:
            d[0, n - 1] = -inv
    return d.tocsr()


def assemble_sub_laplacian(grid):
    """Assemble ``A ~ -Delta_H`` on the masked nodes with Dirichlet exterior.

    ``A = (X+^T X+ + X-^T X- + Y+^T Y+ + Y-^T Y-) / 2`` with ``X+-, Y+-`` the
    fields built from forward (backward) differences in every direction.
    Centred differences would be cheaper but admit grid-scale modes on which
    the discrete fields commute, which pollutes the bottom of the spectrum.
    """
    nx, ny, nz = grid.shape
    n_full = nx * ny * nz
    # four field matrices with three entries per full row plus the product
    if 8 * 4 * 3 * 3 * n_full + 12 * 40 * grid.n_interior > _MEMORY_BUDGET:
        raise MemoryError("grid exceeds the operator memory budget")
    hx, hy, hz = grid.spacings
    x, y, _ = grid.axes()
    ix = sparse.identity(nx, format="csr")
    iy = sparse.identity(ny, format="csr")
    iz = sparse.identity(nz, format="csr")
    half_x = sparse.diags(0.5 * np.repeat(x, ny * nz))
    half_y = sparse.diags(0.5 * np.tile(np.repeat(y, nz), nx))
    index = np.flatnonzero(grid.interior_mask.ravel())
    a = None
    for forward in (True, False):
        dx = sparse.kron(sparse.kron(_diff1d(nx, hx, grid.periodic, forward), iy), iz,
                         format="csr")
        dy = sparse.kron(sparse.kron(ix, _diff1d(ny, hy, grid.periodic, forward)), iz,
                         format="csr")
        dz = sparse.kron(sparse.kron(ix, iy), _diff1d(nz, hz, grid.periodic, forward),
                         format="csr")
        xf = (dx - half_y @ dz).tocsc()[:, index]
        yf = (dy + half_x @ dz).tocsc()[:, index]
        part = xf.T @ xf + yf.T @ yf
        a = part if a is None else a + part
    a = a.tocsr() * 0.5
    a = ((a + a.T) * 0.5).tocsr()
    a.sum_duplicates()
    a.sort_indices()
    return SparseOperator(a, grid, index)


def _preconditioner(a, kind):
    if kind == "amg":
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(a, symmetry="symmetric", max_coarse=500)
        return ml.aspreconditioner(cycle="V")
    if kind == "jacobi":
        inv = 1.0 / a.diagonal()
        return spla.LinearOperator(a.shape, matvec=lambda v: inv * v, dtype=float)
    if kind is None:
        return None
    raise ValueError(f"unknown preconditioner {kind!r}")


def smallest_dirichlet_eigenvalue(op, tol=1e-8, max_iter=200, inner_tol=1e-10,
                                  preconditioner="jacobi", seed=0):
    """Smallest eigenvalue of ``op.matrix`` by inverse iteration.

    Each iteration solves ``A y = v`` with preconditioned conjugate gradients
    (``"jacobi"``, ``"amg"`` via pyamg, or ``None``).  The error indicator
    is the eigen-residual ``|A v - lambda v|``.
    """
    a = op.matrix
    m = _preconditioner(a, preconditioner)
    rng = np.random.default_rng(seed)
    # positive start vector: the ground state has one sign
    v = 1.0 + 0.01 * rng.random(a.shape[0])
    v /= np.linalg.norm(v)
    lam = np.inf
    y = None
    inner = 0
    for it in range(max_iter):
        count = [0]

        def cb(_):
            count[0] += 1

        y, info = spla.cg(a, v, x0=y, rtol=inner_tol, atol=0.0, maxiter=2000, M=m,
                          callback=cb)
        inner += count[0]
        if info != 0:
            raise SolverStagnation(f"inner CG did not converge (info={info}, iteration {it})")
        nrm = np.linalg.norm(y)
        v = y / nrm
        av = a @ v
        ray = float(v @ av)
        resid = float(np.linalg.norm(av - ray * v))
        if abs(ray - lam) <= tol * ray and resid <= 1e3 * tol * ray:
            lam = ray
            break
        lam = ray
        y = v / ray  # warm start: next solution is close to v / lambda
    else:
        raise SolverStagnation("inverse iteration did not converge")
    return EigenEstimate(lam, "fd_3d", f"cells={op.grid.cells},unknowns={op.dimension}",
                         resid, {"outer": it + 1, "inner": inner, "vector": v})


def eigen_3d(R=1.0, cells=(48, 96), pad=1.1, **kw):
    """Eigenvalue on the finest grid of ``cells`` with a two-grid Richardson indicator."""
    values = []
    info = {}
    for c in cells:
        t0 = time.perf_counter()
        op = assemble_sub_laplacian(build_grid3d(R, c, pad))
        est = smallest_dirichlet_eigenvalue(op, **kw)
        values.append(est.value)
        info[f"cells{c}"] = {"value": est.value, "unknowns": op.dimension,
                             "seconds": time.perf_counter() - t0, "residual": est.error_indicator}
    fine = values[-1]
    if len(values) >= 2:
        ratio = cells[-1] / cells[-2]
        indicator = abs(values[-1] - values[-2]) / (ratio ** 2 - 1.0)
    else:
        indicator = float("nan")
    return EigenEstimate(fine, "fd_3d", f"cells={tuple(cells)}", indicator,
                         {"levels": info, "values": values})


def export_coo(op, path):
    """Write ``row col value`` lines (0-based, shortest round-trip floats)."""
    coo = op.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {op.dimension} {op.dimension} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {float(v)!r}\n")


def survival_tail_fit(hit_times, horizon, n_grid=200, min_survivors=100, start_fraction=0.3,
                      confidence=0.95):
    """Decay rate of ``P(tau > t)`` from a late-time log-linear fit.

    The window ``[t1, t2]`` starts at ``start_fraction * t2`` and ends at the
    last grid time with at least ``min_survivors`` paths alive.  Returns
    ``(rate, half_width, (t1, t2))``; the half width combines the regression
    standard error with a weighted fit (binomial variances).
    """
    hit = np.asarray(hit_times, dtype=float)
    n = hit.size
    ts = np.linspace(0.0, horizon, n_grid + 1)[1:]
    sorted_hits = np.sort(hit)
    alive = n - np.searchsorted(sorted_hits, ts, side="right")
    ok = alive >= min_survivors
    if not ok.any():
        raise ValueError("insufficient survivors for a tail fit")
    t2 = ts[ok][-1]
    t1 = start_fraction * t2
    sel = ok & (ts >= t1)
    if sel.sum() < 5:
        raise ValueError("insufficient survivors for a tail fit")
    t = ts[sel]
    p = alive[sel] / n
    y = np.log(p)
    # Var(log p) ~ (1 - p) / (n p)
    w = n * p / (1.0 - p + 1e-300)
    sw = w.sum()
    tm = (w * t).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (t - tm) ** 2).sum()
    slope = (w * (t - tm) * (y - ym)).sum() / sxx
    # survival points are strongly correlated, so use the endpoint variance
    # as a conservative error instead of the naive regression one
    se = math.sqrt((1.0 - p[-1]) / (n * p[-1])) / (t[-1] - t[0]) * math.sqrt(2.0)
    z = stats.norm.ppf(0.5 + 0.5 * confidence)
    return -slope, z * se, (float(t1), float(t2))


def mc_lambda1(spec, R, config, start=None, workers=1, bridge=True, **fit_kw):
    """Exit-rate estimate of the first Dirichlet eigenvalue from simulated hitting times.

    ``spec`` may be a :class:`GroupSpec` (paths from ``start``, default the
    identity) or a :class:`SasakianModelSpec` (radial paths from ``start``,
    default 0).
    """
    cfg = config if not bridge or config.bridge else _with_bridge(config)
    if isinstance(spec, GroupSpec):
        batch = simulate_group_paths(spec, start, R, cfg, workers=workers)
        label = spec.name
    elif isinstance(spec, SasakianModelSpec):
        r0 = 0.0 if start is None else float(start)
        batch = simulate_radial_paths(spec, r0, R, cfg, workers=workers)
        label = f"radial n={spec.n}"
    else:
        raise TypeError("spec must be a GroupSpec or SasakianModelSpec")
    rate, half, window = survival_tail_fit(batch.hit_times, config.horizon, **fit_kw)
    return EigenEstimate(rate, "mc_tail_fit",
                         f"{label}, N={config.n_paths}, dt={config.dt}", half,
                         {"window": window, "hit_times": batch.hit_times})


def _with_bridge(config):
    from dataclasses import replace

    return replace(config, bridge=True)
