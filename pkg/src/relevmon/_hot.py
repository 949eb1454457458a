"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

The public dispatchers (``loclin``, ``gaussian_sups``, ``brownian_functionals``)
pick the numba kernel when it is available. Random numbers are always drawn
by the caller, so both backends see identical inputs.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

QUARTIC_C = 15.0 / 16.0
SINGULAR_TOL = 1e-12
_CHUNK = 256
BAND_MATRIX_BYTES = 256 * 2**20


# -- local linear regression ---------------------------------------------------


@njit(cache=True, nogil=True)
def _loclin_quartic_nb(x, y, t, h):
    m = t.shape[0]
    b0 = np.empty(m)
    b1 = np.empty(m)
    ok = np.ones(m, dtype=np.bool_)
    for j in range(m):
        tj = t[j]
        lo = np.searchsorted(x, tj - h, side="left")
        hi = np.searchsorted(x, tj + h, side="right")
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        r0 = 0.0
        r1 = 0.0
        for i in range(lo, hi):
            d = x[i] - tj
            u = d / h
            if u >= 1.0 or u <= -1.0:
                continue
            v = 1.0 - u * u
            w = QUARTIC_C * v * v
            s0 += w
            s1 += w * d
            s2 += w * d * d
            r0 += w * y[i]
            r1 += w * d * y[i]
        if s0 <= 0.0:
            ok[j] = False
            b0[j] = np.nan
            b1[j] = np.nan
            continue
        det = s0 * s2 - s1 * s1
        if det / (s0 * s0) < SINGULAR_TOL:
            ok[j] = False
            b0[j] = np.nan
            b1[j] = np.nan
            continue
        b0[j] = (s2 * r0 - s1 * r1) / det
        b1[j] = (s0 * r1 - s1 * r0) / det
    return b0, b1, ok


def _loclin_np(x, y, t, h, kernel):
    m = t.shape[0]
    b0 = np.empty(m)
    b1 = np.empty(m)
    ok = np.ones(m, dtype=bool)
    for start in range(0, m, _CHUNK):
        tc = t[start : start + _CHUNK]
        d = x[None, :] - tc[:, None]
        w = kernel(d / h)
        s0 = w.sum(axis=1)
        s1 = (w * d).sum(axis=1)
        s2 = (w * d * d).sum(axis=1)
        r0 = w @ y
        r1 = (w * d) @ y
        det = s0 * s2 - s1 * s1
        with np.errstate(divide="ignore", invalid="ignore"):
            good = (s0 > 0) & (det / (s0 * s0) >= SINGULAR_TOL)
            sl = slice(start, start + tc.shape[0])
            b0[sl] = np.where(good, (s2 * r0 - s1 * r1) / det, np.nan)
            b1[sl] = np.where(good, (s0 * r1 - s1 * r0) / det, np.nan)
        ok[sl] = good
    return b0, b1, ok


def quartic_np(u):
    u = np.asarray(u, dtype=float)
    v = 1.0 - u * u
    return np.where(np.abs(u) < 1.0, QUARTIC_C * v * v, 0.0)


def loclin(x, y, t, h, kernel=None, use_numba=None):
    """Weighted least-squares line at each point of ``t``.

    ``x`` must be sorted ascending. ``kernel`` is a vectorised kernel; ``None``
    means the quartic kernel, which is the only one with a compiled path.
    Returns ``(intercept, slope, ok)``; entries with ``ok == False`` had a
    singular local design and hold NaN.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    t = np.ascontiguousarray(np.atleast_1d(t), dtype=np.float64)
    if use_numba is None:
        use_numba = HAS_NUMBA
    if kernel is None and use_numba:
        return _loclin_quartic_nb(x, y, t, float(h))
    return _loclin_np(x, y, t, float(h), quartic_np if kernel is None else kernel)


# -- suprema of kernel-smoothed Gaussian noise ---------------------------------


@njit(cache=True, nogil=True)
def _gaussian_sups_nb(v, kvec, half, g_start, absolute):
    reps, n_obs = v.shape
    out = np.empty(reps)
    for r in range(reps):
        best = -np.inf
        for g in range(g_start, n_obs + 1):
            # observation index i (1-based) has offset i - g
            lo = max(1, g - half)
            hi = min(n_obs, g + half)
            acc = 0.0
            for i in range(lo, hi + 1):
                acc += v[r, i - 1] * kvec[i - g + half]
            if absolute:
                acc = abs(acc)
            if acc > best:
                best = acc
        out[r] = best
    return out


def _band_matrix(kvec, half, n_obs, g_start):
    grid = np.arange(g_start, n_obs + 1)
    obs = np.arange(1, n_obs + 1)
    off = obs[:, None] - grid[None, :]
    inside = np.abs(off) <= half
    mat = np.zeros(off.shape)
    mat[inside] = kvec[off[inside] + half]
    return mat


def _gaussian_sups_np(v, kvec, half, g_start, absolute):
    mat = _band_matrix(kvec, half, v.shape[1], g_start)
    out = np.empty(v.shape[0])
    for start in range(0, v.shape[0], _CHUNK):
        s = v[start : start + _CHUNK] @ mat
        if absolute:
            s = np.abs(s)
        out[start : start + s.shape[0]] = s.max(axis=1)
    return out


def gaussian_sups(v, kvec, g_start=0, absolute=False, use_numba=None):
    """Per-row sup over grid points g = g_start..N of sum_i v[i] * kvec[i - g].

    ``kvec`` holds kernel weights at integer offsets -half..half. By default
    the dense band-matrix product is used (BLAS beats the loop); the compiled
    loop takes over when that matrix would be large.
    """
    v = np.ascontiguousarray(v, dtype=np.float64)
    kvec = np.ascontiguousarray(kvec, dtype=np.float64)
    half = (kvec.shape[0] - 1) // 2
    if use_numba is None:
        n_obs = v.shape[1]
        use_numba = HAS_NUMBA and 8 * n_obs * (n_obs + 1 - g_start) > BAND_MATRIX_BYTES
    fn = _gaussian_sups_nb if use_numba else _gaussian_sups_np
    return fn(v, kvec, half, int(g_start), bool(absolute))


# -- Brownian functionals ------------------------------------------------------


@njit(cache=True, nogil=True)
def _brownian_functionals_nb(z):
    reps, grid = z.shape
    scale = 1.0 / np.sqrt(grid)
    sup_abs = np.empty(reps)
    page = np.empty(reps)
    for r in range(reps):
        w = 0.0
        best = 0.0
        # s = 0 is the closure of (0, t]; W(0) = 0 gives Y = 0
        ymax = 0.0
        ymin = 0.0
        pbest = 0.0
        for j in range(1, grid + 1):
            w += z[r, j - 1] * scale
            aw = abs(w)
            if aw > best:
                best = aw
            if j == grid:
                break
            t = j / grid
            y = w / (1.0 - t)
            if y > ymax:
                ymax = y
            if y < ymin:
                ymin = y
            val = (1.0 - t) * max(ymax - y, y - ymin)
            if val > pbest:
                pbest = val
        sup_abs[r] = best
        page[r] = pbest
    return sup_abs, page


def _brownian_functionals_np(z):
    grid = z.shape[1]
    w = np.cumsum(z, axis=1) / np.sqrt(grid)
    sup_abs = np.abs(w).max(axis=1)
    t = np.arange(1, grid) / grid
    y = w[:, :-1] / (1.0 - t)
    ymax = np.maximum(np.maximum.accumulate(y, axis=1), 0.0)
    ymin = np.minimum(np.minimum.accumulate(y, axis=1), 0.0)
    page = ((1.0 - t) * np.maximum(ymax - y, y - ymin)).max(axis=1)
    return sup_abs, page


def brownian_functionals(z, use_numba=None):
    """Return (sup_t |W(t)|, Page functional) for each row of increments ``z``.

    Row ``r`` of ``z`` holds ``grid`` standard normal draws; the path is
    W(j/grid) = sum(z[:j]) / sqrt(grid).
    """
    z = np.ascontiguousarray(z, dtype=np.float64)
    if use_numba is None:
        use_numba = HAS_NUMBA
    fn = _brownian_functionals_nb if use_numba else _brownian_functionals_np
    return fn(z)
