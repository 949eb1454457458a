"""Synthetic model-quality trajectories: four mean profiles and three noise processes."""
import enum
import math
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .smoothing import QualitySeries

AR_BURN_IN = 1000
NOISE_SD = 1.0 / 20.0


class MeanKind(str, enum.Enum):
    MU1 = "mu1"
    MU2 = "mu2"
    MU3 = "mu3"
    MU4 = "mu4"


class ErrorKind(str, enum.Enum):
    IID = "iid"
    MA = "ma"
    AR = "ar"
    # AR recursion with the scale applied inside the recursion, as printed
    AR_PRINTED = "ar-printed"


def mean_value(kind, u):
    """Mean profile at rescaled time u in [0, 1] (scalar or array)."""
    kind = MeanKind(kind)
    ua = np.asarray(u, dtype=float)
    if np.any((ua < 0) | (ua > 1)) or not np.all(np.isfinite(ua)):
        raise ValueError("mean profiles are defined on [0, 1]")
    if kind is MeanKind.MU1:
        out = np.full(ua.shape, 0.9)
    elif kind is MeanKind.MU2:
        out = np.where(ua <= 0.25, 0.9, np.where(ua <= 0.75, 0.8 + 0.1 * np.sin(2 * np.pi * ua), 0.7))
    elif kind is MeanKind.MU3:
        out = 0.85 + 0.05 * np.sin(8 * np.pi * ua) - np.where(ua > 0.25, 0.145 * (ua - 0.25), 0.0)
    else:
        out = np.where(ua <= 0.2, 0.9, 0.7)
    return float(out) if out.ndim == 0 else out


def first_relevant_time(kind, delta: float, baseline: float, T: int = 5,
                        tol: float = 1e-10) -> Optional[float]:
    """Infimum of {t in [1, T] : |mu(t / T) - baseline| > delta}, or None if empty.

    Scans a fine grid for the first exceedance, then bisects the bracketing
    interval. The profiles are piecewise smooth, so one crossing per cell.
    At a jump the set is open on the left and the jump location is returned.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")

    def exceeds(t):
        return abs(mean_value(kind, t / T) - baseline) > delta

    grid = np.linspace(1.0, float(T), 40 * (T - 1) * 100 + 1)
    dev = np.abs(mean_value(kind, grid / T) - baseline)
    hits = np.flatnonzero(dev > delta)
    if hits.size == 0:
        return None
    i = hits[0]
    if i == 0:
        return 1.0
    lo, hi = grid[i - 1], grid[i]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if exceeds(mid):
            hi = mid
        else:
            lo = mid
    return float(lo)


def generate_errors(kind, length: int, seed, scale: float = 1.0) -> np.ndarray:
    """Noise path of the given kind; ``scale=0`` gives the noiseless trajectory.

    All kinds except ``ar-printed`` have stationary variance 1/400 (times scale^2).
    """
    kind = ErrorKind(kind)
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    if kind is ErrorKind.IID:
        eps = NOISE_SD * rng.standard_normal(length)
    elif kind is ErrorKind.MA:
        eta = rng.standard_normal(length + 1)
        eps = NOISE_SD * math.sqrt(4 / 5) * (eta[1:] + 0.5 * eta[:-1])
    else:
        eta = rng.standard_normal(length + AR_BURN_IN)
        c = NOISE_SD * math.sqrt(15 / 16)
        eps = _ar_recursion(eta, c, kind is ErrorKind.AR_PRINTED)[AR_BURN_IN:]
    return scale * eps


def _ar_recursion(eta, c, printed):
    phi = 0.25 * c if printed else 0.25
    return lfilter([c], [1.0, -phi], eta)


def simulate_quality(mean, errors, n: int, T: int = 5, seed=0, noise_scale: float = 1.0) -> QualitySeries:
    """X_t = mu(t / (T n)) + eps_t for t = 1..T n."""
    N = T * n
    u = np.arange(1, N + 1) / N
    values = mean_value(mean, u) + generate_errors(errors, N, seed, noise_scale)
    return QualitySeries(values, n, T)
