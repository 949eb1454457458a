"""Long-run variance from differences of adjacent block sums, and the block-length rule."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeries, TooShort

LRV_FLOOR = 1e-12


@dataclass(frozen=True)
class LrvEstimate:
    sigma2: float
    block_length: int
    blocks_used: int
    floored: bool = False

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def to_dict(self) -> dict:
        return {
            "sigma2": self.sigma2,
            "block_length": self.block_length,
            "blocks_used": self.blocks_used,
            "floored": self.floored,
        }


def empirical_autocovariance(x, lag: int) -> float:
    """(1/N) sum_{i=1}^{N-lag} (x_i - xbar)(x_{i+lag} - xbar)."""
    x = np.asarray(x, dtype=float)
    N = x.shape[0]
    if N < 2:
        raise TooShort("need at least two values")
    if not 0 <= lag < N:
        raise ValueError(f"lag {lag} must lie in [0, {N})")
    c = x - x.mean()
    return float(np.dot(c[: N - lag], c[lag:]) / N)


def block_length(resid, n: int) -> int:
    """m = max(floor(sqrt(sum_{1..4}|g_k| / sum_{0..4}|g_k|) * n^(1/3)), 1).

    ``n`` is the number of observations per time unit, not the series length.
    """
    resid = np.asarray(resid, dtype=float)
    if resid.shape[0] < 5:
        raise TooShort("block length needs at least 5 residuals")
    gam = np.abs([empirical_autocovariance(resid, k) for k in range(5)])
    if gam[0] == 0.0:
        raise DegenerateSeries("residuals are constant")
    ratio = gam[1:].sum() / gam.sum()
    return max(int(math.floor(math.sqrt(ratio) * n ** (1.0 / 3.0))), 1)


def long_run_variance(values, m: int) -> LrvEstimate:
    """Average of squared differences of adjacent non-overlapping block sums over 2m.

    The result is floored at ``LRV_FLOOR`` (``floored=True``) so that thresholds
    never see a zero variance.
    """
    x = np.asarray(values, dtype=float)
    if m < 1:
        raise ValueError("block length must be >= 1")
    nb = x.shape[0] // m
    if nb < 2:
        raise TooShort(f"{x.shape[0]} values give fewer than two blocks of length {m}")
    sums = x[: nb * m].reshape(nb, m).sum(axis=1)
    d = sums[:-1] - sums[1:]
    sigma2 = float(np.dot(d, d) / (2.0 * m) / (nb - 1))
    floored = sigma2 < LRV_FLOOR
    return LrvEstimate(max(sigma2, LRV_FLOOR), m, nb - 1, floored)
