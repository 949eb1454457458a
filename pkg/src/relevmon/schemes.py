"""Monitoring decision rules over the monitored region t in [1, T].

Batch detectors evaluate every statistic on the full trajectory and report the
first grid exceedance. ``StreamingDetector`` replays the same rules one
observation at a time.
"""
import enum
import functools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import quantiles as qmod
from .errors import DeltaNotZero, NotWarmedUp, SeriesTooShort
from .kernels import KernelSpec, kernel_norms, quartic, scaling_sequence
from .smoothing import (
    DEFAULT_BANDWIDTHS,
    QualitySeries,
    SmootherConfig,
    cv_select_bandwidth,
    jackknife_curve,
    jackknife_weight_norm,
    residuals,
)
from .variance import LrvEstimate, block_length, long_run_variance

log = logging.getLogger(__name__)


BOUNDARY_MODES = ("standardize", "none")


class Scheme(str, enum.Enum):
    NAIVE = "naive"
    TTEST = "ttest"
    TTEST_CORRECTED = "ttest-corrected"
    CUSUM = "cusum"
    PAGE_CUSUM = "page-cusum"
    RELEVANT_GUMBEL = "relevant-gumbel"
    RELEVANT_APPROX = "relevant-approx"

    @property
    def is_relevant(self) -> bool:
        return self in (Scheme.RELEVANT_GUMBEL, Scheme.RELEVANT_APPROX)

    @property
    def is_cusum(self) -> bool:
        return self in (Scheme.CUSUM, Scheme.PAGE_CUSUM)


@dataclass(frozen=True)
class DetectorConfig:
    """Scheme choice and calibration.

    ``smoother=None`` selects the bandwidth by cross validation over
    ``bandwidths``. The baseline is always the mean of the first n observations.
    ``boundary="standardize"`` widens the relevant-scheme threshold wherever the
    one-sided estimate near the ends of the data is noisier than in the
    interior; ``"none"`` keeps a constant threshold.
    """

    scheme: Scheme
    delta: float = 0.0
    alpha: float = 0.05
    baseline: str = "MeanFirstUnit"
    smoother: Optional[SmootherConfig] = None
    kernel: KernelSpec = field(default_factory=quartic)
    bandwidths: Tuple[float, ...] = DEFAULT_BANDWIDTHS
    folds: int = 10
    quantile_reps: int = 1000
    seed: int = qmod.DEFAULT_SEED
    brownian_reps: int = qmod.BROWNIAN_REPS
    brownian_grid: int = qmod.BROWNIAN_GRID
    restrict_quantile_sup: bool = False
    boundary: str = "standardize"

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.baseline != "MeanFirstUnit":
            raise ValueError(f"unsupported baseline {self.baseline!r}")
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {self.boundary!r}")

    def with_delta(self, delta: float) -> "DetectorConfig":
        from dataclasses import replace

        return replace(self, delta=delta)


@dataclass
class MonitorReport:
    scheme: Scheme
    delta: float
    alpha: float
    rejected: bool
    first_detection_time: Optional[float]
    times: np.ndarray
    statistics: np.ndarray
    thresholds: np.ndarray
    baseline_estimate: float
    lrv_estimate: Optional[LrvEstimate] = None
    bandwidth: Optional[float] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def statistic_trace(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.times.tolist(), self.statistics.tolist(), self.thresholds.tolist()))

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "delta": self.delta,
            "alpha": self.alpha,
            "rejected": self.rejected,
            "first_detection_time": self.first_detection_time,
            "baseline": self.baseline_estimate,
            "lrv": None if self.lrv_estimate is None else self.lrv_estimate.to_dict(),
            "bandwidth": self.bandwidth,
            "warnings": list(self.warnings),
            "trace": [
                {"t": t, "stat": _finite_or_none(s), "thresh": _finite_or_none(c)}
                for t, s, c in self.statistic_trace
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _report(cfg: DetectorConfig, times, stats, thresh, baseline, **extra) -> MonitorReport:
    hits = np.flatnonzero(stats > thresh)
    first = float(times[hits[0]]) if hits.size else None
    return MonitorReport(
        scheme=cfg.scheme, delta=cfg.delta, alpha=cfg.alpha, rejected=first is not None,
        first_detection_time=first, times=np.asarray(times, dtype=float),
        statistics=np.asarray(stats, dtype=float), thresholds=np.asarray(thresh, dtype=float),
        baseline_estimate=float(baseline), **extra,
    )


def _need(series: QualitySeries, length: int, what: str):
    if len(series) < length:
        raise SeriesTooShort(f"{what} needs at least {length} observations, got {len(series)}")


def training_mean(x, n: int) -> float:
    w = np.asarray(x[:n], dtype=float)
    if w.size and np.all(w == w[0]):
        return float(w[0])  # exact, so constant series give statistics of exactly zero
    return math.fsum(w) / w.size


# -- naive ---------------------------------------------------------------------------


def run_naive(series: QualitySeries, cfg: DetectorConfig) -> MonitorReport:
    """Alarm at the first k > n with |X_k - mean(X_1..X_n)| > delta."""
    n = series.n
    _need(series, n + 1, "naive scheme")
    x = series.values
    xbar = training_mean(x, n)
    k = np.arange(n + 1, len(x) + 1)
    stats = np.abs(x[n:] - xbar)
    return _report(cfg, k / n, stats, np.full(stats.shape, cfg.delta), xbar)


# -- t-test --------------------------------------------------------------------------


def window_stats(windows: np.ndarray, xbar: float):
    """|mean| and sample sd of each row of (windows - xbar)."""
    c = np.ascontiguousarray(windows, dtype=float) - xbar
    return np.abs(c.mean(axis=1)), c.std(axis=1, ddof=1)


def ttest_statistics(series: QualitySeries):
    """(times, D_k, sd_k) for windows k = n..(T-1)n; the window covers k+1..k+n."""
    n, T = series.n, series.T
    _need(series, 2 * n, "t-test scheme")
    if T < 2:
        raise SeriesTooShort("t-test scheme needs T >= 2")
    x = series.values
    xbar = training_mean(x, n)
    k = np.arange(n, (T - 1) * n + 1)
    windows = sliding_window_view(x, n)[k]
    d, sd = window_stats(windows, xbar)
    return (k + n) / n, d, sd, xbar


def ttest_quantile(delta: float, alpha: float, n: int, T: int, corrected: bool) -> float:
    level = alpha / ((T - 1) * n) if corrected else alpha
    return qmod.normal_quantile(1.0 - level / 2.0 if delta == 0 else 1.0 - level)


def run_ttest(series: QualitySeries, cfg: DetectorConfig, corrected: Optional[bool] = None,
              stats=None) -> MonitorReport:
    """Windowed mean-difference test; with ``corrected`` the level is split over (T-1)n tests."""
    if corrected is None:
        corrected = cfg.scheme is Scheme.TTEST_CORRECTED
    n, T = series.n, series.T
    times, d, sd, xbar = stats if stats is not None else ttest_statistics(series)
    q = ttest_quantile(cfg.delta, cfg.alpha, n, T, corrected)
    thresh = cfg.delta + q * sd / math.sqrt(n)
    return _report(cfg, times, d, thresh, xbar)


# -- CUSUM ---------------------------------------------------------------------------


def cusum_quantile(cfg: DetectorConfig, page: bool, cache=None) -> float:
    p = 1.0 - cfg.alpha
    fn = qmod.page_brownian_quantile if page else qmod.brownian_sup_quantile
    return fn(p, cfg.brownian_reps, cfg.brownian_grid, cfg.seed, cache)


def _cusum_stat(gamma, k, n, sd):
    weight = math.sqrt(n) / (n + k)
    if sd > 0:
        return weight * gamma / sd
    return np.where(gamma == 0, 0.0, np.inf)


def run_cusum(series: QualitySeries, cfg: DetectorConfig, page: Optional[bool] = None,
              q: Optional[float] = None) -> MonitorReport:
    """Ordinary or Page CUSUM against the training mean (delta must be 0)."""
    if page is None:
        page = cfg.scheme is Scheme.PAGE_CUSUM
    if cfg.delta != 0:
        raise DeltaNotZero("CUSUM detectors only test delta = 0")
    n, T = series.n, series.T
    _need(series, n + 1, "CUSUM scheme")
    x = series.values
    xbar = training_mean(x, n)
    sd = float(np.std(x[:n], ddof=1))
    K = (T - 1) * n
    gamma = np.cumsum(xbar - x[n : n + K])
    k = np.arange(1, K + 1)
    if page:
        gmax = np.maximum(np.maximum.accumulate(gamma), 0.0)
        gmin = np.minimum(np.minimum.accumulate(gamma), 0.0)
        raw = np.maximum(gmax - gamma, gamma - gmin)
    else:
        raw = np.abs(gamma)
    stats = _cusum_stat(raw, k, n, sd)
    if q is None:
        q = cusum_quantile(cfg, page)
    return _report(cfg, (n + k) / n, stats, np.full(stats.shape, q), xbar)


# -- relevant-deviation schemes ------------------------------------------------------


@dataclass
class RelevantFit:
    """Everything the relevant schemes need that does not depend on delta."""

    n: int
    T: int
    bandwidth: float
    times: np.ndarray
    estimate: np.ndarray
    baseline: float
    lrv: LrvEstimate
    ell: float
    kernel: KernelSpec
    warnings: List[str] = field(default_factory=list)
    inflation: Optional[np.ndarray] = None

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.estimate - self.baseline)

    def scale(self) -> float:
        """sigma_lrv ||K*||_2 / (sqrt(n h) l_n)."""
        return self.lrv.sigma * self.kernel.l2_norm_Kstar / (math.sqrt(self.n * self.bandwidth) * self.ell)


def _interior_norm(kernel: KernelSpec) -> float:
    if kernel.norm_convention == "full":
        return kernel.l2_norm_Kstar
    return kernel_norms(kernel.evaluate, kernel.derivative, kernel.breakpoints, "full")[1]


def boundary_inflation(x, t, n: int, h: float, kernel: KernelSpec) -> np.ndarray:
    """Ratio of the estimator's noise level at ``t`` to its interior level, floored at 1."""
    ratio = jackknife_weight_norm(x, t, h, kernel) * math.sqrt(n * h) / _interior_norm(kernel)
    return np.maximum(ratio, 1.0)


@functools.lru_cache(maxsize=64)
def _grid_inflation(n: int, T: int, h: float, kernel: KernelSpec) -> np.ndarray:
    x = np.arange(1, T * n + 1) / n
    out = boundary_inflation(x, np.arange(n, T * n + 1) / n, n, h, kernel)
    out.setflags(write=False)
    return out


def estimate_lrv(series: QualitySeries, h: float, kernel: KernelSpec) -> LrvEstimate:
    resid = residuals(series, SmootherConfig(h, kernel))
    m = block_length(resid, series.n)
    return long_run_variance(series.values, m)


def fit_relevant(series: QualitySeries, cfg: DetectorConfig) -> RelevantFit:
    n, T = series.n, series.T
    _need(series, n, "relevant scheme")
    kernel = cfg.kernel if cfg.smoother is None else cfg.smoother.kernel
    if cfg.smoother is not None:
        h = cfg.smoother.bandwidth
    else:
        h = cv_select_bandwidth(series, cfg.bandwidths, cfg.folds, kernel)
    x = series.times
    grid = np.arange(n, T * n + 1) / n
    est = jackknife_curve(x, series.values, grid, h, kernel)
    lrv = estimate_lrv(series, h, kernel)
    warnings = []
    if lrv.floored:
        warnings.append("DegenerateVariance: long-run variance floored")
        log.warning("long-run variance floored at %g", lrv.sigma2)
    ell = scaling_sequence(T, h, kernel)
    infl = _grid_inflation(n, T, h, kernel) if cfg.boundary == "standardize" else None
    return RelevantFit(n, T, h, grid, est, training_mean(series.values, n), lrv, ell, kernel, warnings, infl)


def relevant_quantile(fit: RelevantFit, cfg: DetectorConfig, scheme: Optional[Scheme] = None) -> float:
    scheme = scheme or cfg.scheme
    if scheme is Scheme.RELEVANT_GUMBEL:
        return qmod.gumbel_quantile(math.log(2.0) if cfg.delta == 0 else 0.0, 1.0 - cfg.alpha)
    src = qmod.Source.GAUSSIAN_ABS if cfg.delta == 0 else qmod.Source.GAUSSIAN_SIGNED
    req = qmod.QuantileRequest(
        cfg.alpha, src, n=fit.n, T=fit.T, h=fit.bandwidth, reps=cfg.quantile_reps, seed=cfg.seed,
        restrict_to_monitored=cfg.restrict_quantile_sup,
    )
    return qmod.gaussian_approx_quantile(req, fit.kernel)


def relevant_threshold(fit: RelevantFit, delta: float, q: float) -> float:
    return delta + (q + fit.ell**2) * fit.scale()


def run_relevant(series: QualitySeries, cfg: DetectorConfig, fit: Optional[RelevantFit] = None) -> MonitorReport:
    """Jackknife local-linear scheme with Gumbel or simulated Gaussian critical values."""
    if not cfg.scheme.is_relevant:
        raise ValueError(f"{cfg.scheme.value} is not a relevant-deviation scheme")
    fit = fit or fit_relevant(series, cfg)
    q = relevant_quantile(fit, cfg)
    band = (q + fit.ell**2) * fit.scale()
    infl = 1.0 if fit.inflation is None else fit.inflation
    thresh = cfg.delta + band * np.broadcast_to(infl, fit.times.shape)
    return _report(cfg, fit.times, fit.deviation, thresh, fit.baseline,
                   lrv_estimate=fit.lrv, bandwidth=fit.bandwidth, warnings=list(fit.warnings))


def run_detector(series: QualitySeries, cfg: DetectorConfig) -> MonitorReport:
    s = cfg.scheme
    if s is Scheme.NAIVE:
        return run_naive(series, cfg)
    if s in (Scheme.TTEST, Scheme.TTEST_CORRECTED):
        return run_ttest(series, cfg)
    if s.is_cusum:
        return run_cusum(series, cfg)
    return run_relevant(series, cfg)


# -- streaming -----------------------------------------------------------------------


@dataclass(frozen=True)
class Alarm:
    time: float
    statistic: float
    threshold: float


class StreamingDetector:
    """Online wrapper around the batch rules for a horizon of T time units.

    The first n observations are the warm-up. Naive, t-test and CUSUM
    decisions are identical to the batch run. Relevant schemes evaluate the
    jackknife estimate at the newest time point from the data seen so far,
    with bandwidth, baseline, critical value and long-run variance frozen at
    the end of warm-up; ``refresh_every`` re-estimates the long-run variance
    every that many observations.
    """

    def __init__(self, cfg: DetectorConfig, n: int, T: int, refresh_every: Optional[int] = None):
        if cfg.scheme.is_cusum and cfg.delta != 0:
            raise DeltaNotZero("CUSUM detectors only test delta = 0")
        self.cfg = cfg
        self.n = n
        self.T = T
        self.refresh_every = refresh_every
        self.values: List[float] = []
        self.alarm: Optional[Alarm] = None
        self._xbar = None
        self._sd = None
        self._q = None
        self._gamma = 0.0
        self._gmax = 0.0
        self._gmin = 0.0
        self._fit: Optional[RelevantFit] = None
        self._last = None
        self.trace: List[Tuple[float, float, float]] = []

    @property
    def baseline(self) -> Optional[float]:
        return self._xbar

    @property
    def lrv(self) -> Optional[LrvEstimate]:
        return None if self._fit is None else self._fit.lrv

    @property
    def warmed_up(self) -> bool:
        return len(self.values) >= self.n

    @property
    def bandwidth(self) -> Optional[float]:
        return None if self._fit is None else self._fit.bandwidth

    def update(self, value: float) -> Optional[Alarm]:
        if self.alarm is not None:
            self.values.append(float(value))
            return None
        if len(self.values) >= self.n * self.T:
            raise SeriesTooShort(f"horizon of {self.n * self.T} observations exhausted")
        self.values.append(float(value))
        L = len(self.values)
        if L < self.n:
            return None
        if L == self.n:
            self._warm_up()
        hit = self._evaluate(L)
        if hit is not None:
            self.alarm = hit
        return hit

    def last_statistic(self):
        if not self.warmed_up:
            raise NotWarmedUp(f"need {self.n} observations, have {len(self.values)}")
        return self._last

    def _warm_up(self):
        cfg, n = self.cfg, self.n
        x = np.asarray(self.values, dtype=float)
        self._xbar = training_mean(x, n)
        s = cfg.scheme
        if s in (Scheme.TTEST, Scheme.TTEST_CORRECTED):
            self._q = ttest_quantile(cfg.delta, cfg.alpha, n, self.T, s is Scheme.TTEST_CORRECTED)
        elif s.is_cusum:
            self._sd = float(np.std(x[:n], ddof=1))
            self._q = cusum_quantile(cfg, s is Scheme.PAGE_CUSUM)
        elif s.is_relevant:
            warm = QualitySeries(x[:n], n, 1)
            kernel = cfg.kernel if cfg.smoother is None else cfg.smoother.kernel
            if cfg.smoother is not None:
                h = cfg.smoother.bandwidth
            else:
                h = cv_select_bandwidth(warm, cfg.bandwidths, cfg.folds, kernel)
            lrv = estimate_lrv(warm, h, kernel)
            ell = scaling_sequence(self.T, h, kernel)
            self._fit = RelevantFit(n, self.T, h, np.empty(0), np.empty(0), self._xbar, lrv, ell, kernel)
            self._q = relevant_quantile(self._fit, cfg)

    def _evaluate(self, L: int) -> Optional[Alarm]:
        cfg, n, T = self.cfg, self.n, self.T
        s = cfg.scheme
        x = self.values
        if s is Scheme.NAIVE:
            if L <= n:
                return None
            stat, thresh = abs(x[-1] - self._xbar), cfg.delta
        elif s in (Scheme.TTEST, Scheme.TTEST_CORRECTED):
            k = L - n
            if k < n or k > (T - 1) * n:
                return None
            d, sd = window_stats(np.asarray(x[-n:], dtype=float)[None, :], self._xbar)
            stat, thresh = float(d[0]), cfg.delta + self._q * float(sd[0]) / math.sqrt(n)
        elif s.is_cusum:
            k = L - n
            if k < 1 or k > (T - 1) * n:
                return None
            self._gamma = self._gamma + (self._xbar - x[-1])
            if s is Scheme.PAGE_CUSUM:
                self._gmax = max(self._gmax, self._gamma)
                self._gmin = min(self._gmin, self._gamma)
                raw = max(self._gmax - self._gamma, self._gamma - self._gmin)
            else:
                raw = abs(self._gamma)
            stat, thresh = float(_cusum_stat(np.asarray(raw), k, n, self._sd)), self._q
        else:
            fit = self._fit
            if self.refresh_every and L > n and (L - n) % self.refresh_every == 0:
                fit.lrv = _lrv_prefix(np.asarray(x, dtype=float), n, fit.bandwidth, fit.kernel)
            t = L / n
            xs = np.arange(1, L + 1) / n
            est = jackknife_curve(xs, np.asarray(x, dtype=float), np.array([t]), fit.bandwidth, fit.kernel)
            stat = abs(float(est[0]) - self._xbar)
            thresh = relevant_threshold(fit, cfg.delta, self._q)
            if cfg.boundary == "standardize":
                infl = boundary_inflation(xs, np.array([t]), n, fit.bandwidth, fit.kernel)[0]
                thresh = cfg.delta + (thresh - cfg.delta) * infl
        self._last = (L / n, stat, thresh)
        self.trace.append(self._last)
        if stat > thresh:
            return Alarm(L / n, stat, thresh)
        return None


def _lrv_prefix(vals: np.ndarray, n: int, h: float, kernel: KernelSpec) -> LrvEstimate:
    xs = np.arange(1, len(vals) + 1) / n
    resid = vals - jackknife_curve(xs, vals, xs, h, kernel)
    return long_run_variance(vals, block_length(resid, n))


def monitor_stream(state: StreamingDetector, new_value: float) -> Optional[Alarm]:
    """Feed one observation; returns an Alarm the first time the threshold is crossed."""
    return state.update(new_value)


def replay(cfg: DetectorConfig, values: Sequence[float], n: int, T: int,
           refresh_every: Optional[int] = None) -> Tuple[StreamingDetector, Optional[Alarm]]:
    det = StreamingDetector(cfg, n, T, refresh_every)
    for v in values:
        det.update(v)
    return det, det.alarm
