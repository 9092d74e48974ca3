"""Counter-based random numbers keyed by (seed, path, step).

Every variate is a pure function of the master seed, the path index, the
step index and a stream tag, so ensembles can be split across workers in
any way and still reproduce bit for bit.  The block cipher is Philox4x32
with 10 rounds.
"""

import numpy as np
from numba import njit

_MASK = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0

# stream tags keep unrelated draws of the same seed independent
STREAM_GROUP = 1
STREAM_RADIAL = 2
STREAM_EXACT = 3
STREAM_BRIDGE = 4
STREAM_BARRIER = 5
STREAM_UNIFORM = 6


@njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """One Philox4x32-10 block.  All arguments are uint64 holding 32-bit words."""
    c0 = np.uint64(c0) & _MASK
    c1 = np.uint64(c1) & _MASK
    c2 = np.uint64(c2) & _MASK
    c3 = np.uint64(c3) & _MASK
    k0 = np.uint64(k0) & _MASK
    k1 = np.uint64(k1) & _MASK
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & _MASK
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & _MASK
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit(cache=True)
def uniform_pair(seed, path, step, draw, stream):
    """Two doubles in the open interval (0, 1) with 53 random bits each."""
    s = np.uint64(seed)
    p = np.uint64(path)
    t = np.uint64(step)
    a, b, c, d = philox4x32(
        t & _MASK,
        (t >> np.uint64(32)) ^ (np.uint64(draw) << np.uint64(16)),
        p & _MASK,
        (p >> np.uint64(32)) ^ (np.uint64(stream) << np.uint64(24)),
        s & _MASK,
        s >> np.uint64(32),
    )
    u1 = ((a >> np.uint64(5)) * np.uint64(67108864) + (b >> np.uint64(6)))
    u2 = ((c >> np.uint64(5)) * np.uint64(67108864) + (d >> np.uint64(6)))
    return (float(u1) + 0.5) * _INV_2_53, (float(u2) + 0.5) * _INV_2_53


@njit(cache=True)
def normal_pair(seed, path, step, draw, stream):
    """Two independent standard normals (Box-Muller on :func:`uniform_pair`)."""
    u1, u2 = uniform_pair(seed, path, step, draw, stream)
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = _TWO_PI * u2
    return rad * np.cos(ang), rad * np.sin(ang)


@njit(cache=True)
def _normals_block(seed, path_start, n_paths, step, stream, dim, out):
    for i in range(n_paths):
        path = path_start + i
        j = 0
        draw = 0
        while j < dim:
            g0, g1 = normal_pair(seed, path, step, draw, stream)
            out[i, j] = g0
            if j + 1 < dim:
                out[i, j + 1] = g1
            j += 2
            draw += 1


@njit(cache=True)
def _uniforms_block(seed, path_start, n_paths, step, stream, dim, out):
    for i in range(n_paths):
        path = path_start + i
        j = 0
        draw = 0
        while j < dim:
            u0, u1 = uniform_pair(seed, path, step, draw, stream)
            out[i, j] = u0
            if j + 1 < dim:
                out[i, j + 1] = u1
            j += 2
            draw += 1


def normals(seed, paths, step=0, dim=1, stream=STREAM_UNIFORM):
    """Standard normals of shape ``(len(paths), dim)`` for a contiguous path range.

    ``paths`` is a ``range`` (or ``(start, stop)`` pair); entry ``[i, j]``
    depends only on ``(seed, start + i, step, j, stream)``.
    """
    start, stop = _as_range(paths)
    out = np.empty((stop - start, dim))
    _normals_block(np.uint64(seed), start, stop - start, step, stream, dim, out)
    return out


def uniforms(seed, paths, step=0, dim=1, stream=STREAM_UNIFORM):
    """Uniforms on (0, 1), same addressing as :func:`normals`."""
    start, stop = _as_range(paths)
    out = np.empty((stop - start, dim))
    _uniforms_block(np.uint64(seed), start, stop - start, step, stream, dim, out)
    return out


def _as_range(paths):
    if isinstance(paths, range):
        if paths.step != 1:
            raise ValueError("path ranges must be contiguous")
        return paths.start, paths.stop
    start, stop = paths
    return int(start), int(stop)
