import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relevmon.errors import DeltaNotZero, NotWarmedUp, SeriesTooShort
from relevmon.schemes import (
    DetectorConfig,
    Scheme,
    StreamingDetector,
    boundary_inflation,
    fit_relevant,
    replay,
    run_cusum,
    run_detector,
    run_naive,
    run_relevant,
    run_ttest,
)
from relevmon.kernels import quartic
from relevmon.simgen import simulate_quality
from relevmon.smoothing import QualitySeries

def const_series(n=20, T=5, c=0.9):
    return QualitySeries.from_values(np.full(n * T, c), n)


def test_naive_spike():
    n = 40
    x = np.full(5 * n, 0.9)
    x[n + 7 - 1] += 0.2
    r = run_naive(QualitySeries.from_values(x, n), DetectorConfig(Scheme.NAIVE, delta=0.1))
    assert r.first_detection_time == pytest.approx((n + 7) / n)


@pytest.mark.parametrize("scheme", [Scheme.NAIVE, Scheme.TTEST, Scheme.TTEST_CORRECTED, Scheme.CUSUM,
                                    Scheme.PAGE_CUSUM])
def test_constant_series_never_rejects(scheme):
    r = run_detector(const_series(), DetectorConfig(scheme))
    assert not r.rejected and r.first_detection_time is None
    assert np.all(r.statistics == 0)


def test_naive_strict_inequality():
    n = 10
    x = np.full(3 * n, 0.5)
    x[n] = 0.75  # deviation exactly 0.25, representable
    r = run_naive(QualitySeries.from_values(x, n), DetectorConfig(Scheme.NAIVE, delta=0.25))
    assert not r.rejected


def test_ttest_window_grid():
    s = simulate_quality("mu1", "iid", 20, 5, seed=1)
    r = run_ttest(s, DetectorConfig(Scheme.TTEST))
    assert r.times[0] == pytest.approx(2.0)
    assert r.times[-1] == pytest.approx(5.0)
    assert r.times.size == 3 * 20 + 1


def test_corrected_threshold_exceeds_uncorrected():
    s = simulate_quality("mu2", "iid", 40, seed=3)
    for delta in (0.0, 0.05):
        a = run_ttest(s, DetectorConfig(Scheme.TTEST, delta=delta))
        b = run_ttest(s, DetectorConfig(Scheme.TTEST_CORRECTED, delta=delta))
        assert np.all(b.thresholds > a.thresholds)


def test_cusum_rejects_delta():
    with pytest.raises(DeltaNotZero):
        run_cusum(const_series(), DetectorConfig(Scheme.CUSUM, delta=0.1))
    with pytest.raises(DeltaNotZero):
        StreamingDetector(DetectorConfig(Scheme.PAGE_CUSUM, delta=0.1), 20, 5)


def test_cusum_statistic_by_hand():
    n, T = 4, 3
    x = np.array([1.0, 2.0, 3.0, 2.0, 5.0, 1.0, 2.0, 2.0, 4.0, 0.0, 2.0, 2.0])
    s = QualitySeries(x, n, T)
    r = run_cusum(s, DetectorConfig(Scheme.CUSUM), q=1e9)
    xbar, sd = 2.0, np.std(x[:4], ddof=1)
    k = np.arange(1, 9)
    gamma = np.cumsum(xbar - x[4:])
    assert np.allclose(r.statistics, math.sqrt(n) / (n + k) * np.abs(gamma) / sd)
    p = run_cusum(s, DetectorConfig(Scheme.PAGE_CUSUM), q=1e9)
    g = np.concatenate([[0.0], gamma])
    brute = [max(abs(g[j] - g[l]) for l in range(j + 1)) for j in range(1, 9)]
    assert np.allclose(p.statistics, math.sqrt(n) / (n + k) * np.array(brute) / sd)


def test_series_too_short():
    s = QualitySeries.from_values(np.full(10, 0.9), 10)
    for scheme in (Scheme.NAIVE, Scheme.TTEST, Scheme.CUSUM):
        with pytest.raises(SeriesTooShort):
            run_detector(s, DetectorConfig(scheme))


def test_report_json_keys():
    s = simulate_quality("mu4", "iid", 20, seed=0)
    r = run_detector(s, DetectorConfig(Scheme.RELEVANT_GUMBEL, delta=0.1))
    d = json.loads(r.to_json(allow_nan=False))
    assert {"scheme", "delta", "alpha", "rejected", "first_detection_time", "baseline", "lrv", "bandwidth",
            "warnings", "trace"} <= d.keys()
    assert d["trace"][0].keys() == {"t", "stat", "thresh"}
    assert len(d["trace"]) == 4 * 20 + 1


def test_relevant_detects_step():
    s = simulate_quality("mu4", "iid", 40, seed=5)
    r = run_relevant(s, DetectorConfig(Scheme.RELEVANT_GUMBEL, delta=0.1))
    assert r.rejected and 1.0 <= r.first_detection_time < 2.0


def test_boundary_modes():
    s = simulate_quality("mu2", "iid", 40, seed=2)
    std = fit_relevant(s, DetectorConfig(Scheme.RELEVANT_GUMBEL))
    none = fit_relevant(s, DetectorConfig(Scheme.RELEVANT_GUMBEL, boundary="none"))
    assert none.inflation is None
    assert np.all(std.inflation >= 1.0)
    assert std.inflation[-1] > 2.0
    a = run_relevant(s, DetectorConfig(Scheme.RELEVANT_GUMBEL, delta=0.1), fit=std)
    b = run_relevant(s, DetectorConfig(Scheme.RELEVANT_GUMBEL, delta=0.1, boundary="none"), fit=none)
    assert np.all(a.thresholds >= b.thresholds - 1e-15)
    assert np.allclose(np.ptp(b.thresholds), 0.0)
    with pytest.raises(ValueError):
        DetectorConfig(Scheme.RELEVANT_GUMBEL, boundary="reflect")


def test_boundary_inflation_interior_is_one():
    n, h = 100, 0.3
    x = np.arange(1, 501) / n
    infl = boundary_inflation(x, np.array([2.5, 5.0]), n, h, quartic())
    assert infl[0] == pytest.approx(1.0, abs=1e-3)
    assert 2.0 < infl[1] < 2.6


def test_location_invariance():
    s = simulate_quality("mu2", "iid", 40, seed=7)
    shifted = QualitySeries(s.values + 3.0, s.n, s.T)
    for scheme in Scheme:
        cfg = DetectorConfig(scheme, delta=0.0 if scheme.is_cusum else 0.12, quantile_reps=200)
        a, b = run_detector(s, cfg), run_detector(shifted, cfg)
        assert a.first_detection_time == b.first_detection_time


def test_scale_equivariance_relevant():
    s = simulate_quality("mu2", "iid", 40, seed=8)
    scaled = QualitySeries(s.values * 4.0, s.n, s.T)
    a = run_detector(s, DetectorConfig(Scheme.RELEVANT_GUMBEL, delta=0.12))
    b = run_detector(scaled, DetectorConfig(Scheme.RELEVANT_GUMBEL, delta=0.48))
    assert a.first_detection_time == b.first_detection_time


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from([Scheme.NAIVE, Scheme.TTEST, Scheme.RELEVANT_GUMBEL]))
def test_delta_monotonicity(seed, scheme):
    s = simulate_quality("mu2", "iid", 20, seed=seed)
    prev = -math.inf
    cfg = DetectorConfig(scheme, quantile_reps=100)
    fit = fit_relevant(s, cfg) if scheme.is_relevant else None
    for delta in (0.02, 0.08, 0.14, 0.20):
        c = cfg.with_delta(delta)
        r = run_relevant(s, c, fit=fit) if fit else run_detector(s, c)
        t = math.inf if r.first_detection_time is None else r.first_detection_time
        assert t >= prev
        prev = t


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_corrected_rejections_subset(seed):
    s = simulate_quality("mu1", "ma", 20, seed=seed)
    a = run_ttest(s, DetectorConfig(Scheme.TTEST))
    b = run_ttest(s, DetectorConfig(Scheme.TTEST_CORRECTED))
    assert np.all((b.statistics > b.thresholds) <= (a.statistics > a.thresholds))


@pytest.mark.parametrize("scheme", [Scheme.NAIVE, Scheme.TTEST, Scheme.TTEST_CORRECTED, Scheme.CUSUM,
                                    Scheme.PAGE_CUSUM])
def test_stream_matches_batch(scheme):
    for seed in range(5):
        s = simulate_quality("mu2", "iid", 20, seed=seed)
        cfg = DetectorConfig(scheme, delta=0.0 if scheme.is_cusum else 0.1)
        _, alarm = replay(cfg, s.values, s.n, s.T)
        batch = run_detector(s, cfg).first_detection_time
        if batch is None:
            assert alarm is None
        else:
            assert alarm.time == pytest.approx(batch)


def test_stream_latching_and_errors():
    n, T = 10, 3
    det = StreamingDetector(DetectorConfig(Scheme.NAIVE, delta=0.1), n, T)
    with pytest.raises(NotWarmedUp):
        det.last_statistic()
    for _ in range(n):
        det.update(0.9)
    assert det.warmed_up and det.baseline == pytest.approx(0.9)
    alarm = det.update(0.5)
    assert alarm is not None and alarm.time == pytest.approx(1.1)
    assert det.update(0.9) is None
    assert det.alarm is alarm
    quiet = StreamingDetector(DetectorConfig(Scheme.NAIVE, delta=0.1), n, T)
    for _ in range(n * T):
        quiet.update(0.9)
    with pytest.raises(SeriesTooShort):
        quiet.update(0.9)


def test_stream_relevant_close_to_batch():
    s = simulate_quality("mu4", "iid", 40, seed=11)
    cfg = DetectorConfig(Scheme.RELEVANT_GUMBEL, delta=0.1)
    det, alarm = replay(cfg, s.values, s.n, s.T)
    batch = run_detector(s, cfg)
    assert alarm is not None
    assert abs(alarm.time - batch.first_detection_time) <= det.bandwidth
    assert det.trace[0][0] == pytest.approx(1.0)
