"""Local linear and jackknife smoothing of a quality series, plus CV bandwidth choice."""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _hot
from .errors import AllCandidatesSingular, OutOfRange, SingularDesign
from .kernels import KernelSpec, quartic

DEFAULT_BANDWIDTHS = (0.25, 0.30, 0.35, 0.40, 0.45, 0.50)
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class QualitySeries:
    """Observed quality X_1..X_{Tn}; observation i (1-based) sits at time i/n."""

    values: np.ndarray
    n: int
    T: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if self.n < 1 or self.T < 1:
            raise ValueError("n and T must be positive")
        if vals.ndim != 1 or vals.shape[0] != self.n * self.T:
            raise ValueError(f"expected {self.n * self.T} values, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("series contains non-finite values")

    @classmethod
    def from_values(cls, values, n: int) -> "QualitySeries":
        """Build a series whose horizon is inferred from its length (must be a multiple of n)."""
        values = np.asarray(values, dtype=float)
        if values.shape[0] % n:
            raise ValueError(f"length {values.shape[0]} is not a multiple of n={n}")
        return cls(values, n, values.shape[0] // n)

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.values.shape[0] + 1) / self.n

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SmootherConfig:
    bandwidth: float
    kernel: KernelSpec = field(default_factory=quartic)


def _kernel_arg(kernel: KernelSpec):
    return None if kernel.is_quartic else kernel.evaluate


def fit_curve(x, y, t, h, kernel: Optional[KernelSpec] = None):
    """Vectorised local linear fit of (x, y) at points ``t``; returns (intercepts, slopes)."""
    kernel = kernel or quartic()
    b0, b1, ok = _hot.loclin(x, y, t, h, _kernel_arg(kernel))
    if not ok.all():
        bad = np.asarray(t)[~ok][0]
        raise SingularDesign(f"singular local design at t={bad:.6g} with h={h:.6g}")
    return b0, b1


def jackknife_curve(x, y, t, h, kernel: Optional[KernelSpec] = None) -> np.ndarray:
    """2 * mu_hat_{h/sqrt2}(t) - mu_hat_h(t) at every point of ``t``."""
    narrow, _ = fit_curve(x, y, t, h / SQRT2, kernel)
    wide, _ = fit_curve(x, y, t, h, kernel)
    return 2.0 * narrow - wide


def local_linear_fit(series: QualitySeries, t: float, h: float, kernel: Optional[KernelSpec] = None):
    """Local linear fit at a single time ``t``; returns (intercept, slope)."""
    if not 0.0 <= t <= series.T:
        raise OutOfRange(f"t={t} outside [0, {series.T}]")
    b0, b1 = fit_curve(series.times, series.values, [t], h, kernel)
    return float(b0[0]), float(b1[0])


def jackknife_estimate(series: QualitySeries, t, config: SmootherConfig):
    """Bias-corrected estimate at ``t`` (scalar or array)."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any((ts < 0) | (ts > series.T)):
        raise OutOfRange(f"evaluation points outside [0, {series.T}]")
    est = jackknife_curve(series.times, series.values, ts, config.bandwidth, config.kernel)
    return float(est[0]) if np.ndim(t) == 0 else est


def cv_errors(
    series: QualitySeries,
    candidates: Sequence[float] = DEFAULT_BANDWIDTHS,
    folds: int = 10,
    kernel: Optional[KernelSpec] = None,
) -> np.ndarray:
    """Total squared held-out error per candidate bandwidth (NaN where a fit was singular).

    Observation i (1-based) belongs to fold ``i % folds``.
    """
    kernel = kernel or quartic()
    x, y = series.times, series.values
    if folds < 2 or len(y) < folds:
        raise ValueError("need folds >= 2 and at least `folds` observations")
    fold_of = np.arange(1, len(y) + 1) % folds
    errs = np.zeros(len(candidates))
    for c, h in enumerate(candidates):
        if not 0 < h <= series.T:
            raise ValueError(f"candidate bandwidth {h} outside (0, T]")
        total = 0.0
        for f in range(folds):
            held = fold_of == f
            if not held.any():
                continue
            try:
                pred = jackknife_curve(x[~held], y[~held], x[held], h, kernel)
            except SingularDesign:
                total = math.nan
                break
            total += float(np.sum((y[held] - pred) ** 2))
        errs[c] = total
    return errs


def cv_select_bandwidth(
    series: QualitySeries,
    candidates: Sequence[float] = DEFAULT_BANDWIDTHS,
    folds: int = 10,
    kernel: Optional[KernelSpec] = None,
) -> float:
    """Candidate with the smallest cross-validation error; ties go to the smaller bandwidth."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate bandwidths")
    errs = cv_errors(series, candidates, folds, kernel)
    valid = ~np.isnan(errs)
    if not valid.any():
        raise AllCandidatesSingular("every candidate bandwidth gave a singular fit")
    best = np.min(errs[valid])
    # rounding noise on exactly reproducible inputs must not break ties
    tol = 1e-12 * float(np.dot(series.values, series.values))
    order = sorted(range(len(candidates)), key=lambda k: candidates[k])
    for k in order:
        if valid[k] and errs[k] <= best + tol:
            return float(candidates[k])
    raise AssertionError("unreachable")


def residuals(series: QualitySeries, config: SmootherConfig) -> np.ndarray:
    """X_i - mu_tilde(i/n) for every observation."""
    x = series.times
    return series.values - jackknife_curve(x, series.values, x, config.bandwidth, config.kernel)


def _loclin_weights(x, t, h, kernel: KernelSpec) -> np.ndarray:
    d = x[None, :] - t[:, None]
    w = kernel.evaluate(d / h)
    s0 = w.sum(axis=1)
    s1 = (w * d).sum(axis=1)
    s2 = (w * d * d).sum(axis=1)
    det = s0 * s2 - s1 * s1
    if np.any(det / (s0 * s0) < _hot.SINGULAR_TOL):
        raise SingularDesign(f"singular local design with h={h:.6g}")
    return w * (s2[:, None] - s1[:, None] * d) / det[:, None]


def jackknife_weight_norm(x, t, h, kernel: Optional[KernelSpec] = None) -> np.ndarray:
    """Euclidean norm of the linear weights that map y to the jackknife estimate at each t.

    Under unit-variance white noise this is the standard deviation of the estimate.
    """
    kernel = kernel or quartic()
    x = np.asarray(x, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.shape[0])
    for start in range(0, t.shape[0], _hot._CHUNK):
        tc = t[start : start + _hot._CHUNK]
        wts = 2.0 * _loclin_weights(x, tc, h / SQRT2, kernel) - _loclin_weights(x, tc, h, kernel)
        out[start : start + tc.shape[0]] = np.sqrt(np.einsum("ij,ij->i", wts, wts))
    return out
