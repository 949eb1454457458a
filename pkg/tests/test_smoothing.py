import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relevmon import _hot
from relevmon.errors import AllCandidatesSingular, OutOfRange, SingularDesign
from relevmon.kernels import KernelSpec, quartic
from relevmon.smoothing import (
    QualitySeries,
    SmootherConfig,
    cv_errors,
    cv_select_bandwidth,
    fit_curve,
    jackknife_curve,
    jackknife_estimate,
    jackknife_weight_norm,
    local_linear_fit,
    residuals,
)


def series(values, n):
    return QualitySeries.from_values(values, n)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.05, 1.0), st.integers(0, 2**31))
def test_local_linear_exact_on_lines(a, b, h, seed):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 5, 300))
    t = np.linspace(0.2, 4.8, 25)
    try:
        b0, b1 = fit_curve(x, a + b * x, t, h)
    except SingularDesign:
        return
    assert np.max(np.abs(b0 - (a + b * t))) < 1e-9
    assert np.max(np.abs(b1 - b)) < 1e-7


def test_jackknife_exact_on_lines_including_boundary():
    n = 40
    s = series(0.7 + 0.02 * np.arange(1, 201) / n, n)
    est = jackknife_estimate(s, np.array([0.0, 1.0, 2.5, 5.0]), SmootherConfig(0.3))
    assert np.allclose(est, 0.7 + 0.02 * np.array([0.0, 1.0, 2.5, 5.0]), atol=1e-12)


def test_constant_series_reproduced():
    s = series(np.full(200, 0.9), 40)
    assert local_linear_fit(s, 3.0, 0.25)[0] == pytest.approx(0.9, abs=1e-14)
    assert local_linear_fit(s, 3.0, 0.25)[1] == pytest.approx(0.0, abs=1e-12)


def test_out_of_range():
    s = series(np.zeros(200), 40)
    with pytest.raises(OutOfRange):
        local_linear_fit(s, 5.5, 0.25)
    with pytest.raises(OutOfRange):
        jackknife_estimate(s, [-0.1], SmootherConfig(0.25))


def test_singular_design():
    x = np.array([0.0, 1.0, 2.0])
    with pytest.raises(SingularDesign):
        fit_curve(x, x, [1.0], 0.5)


def test_series_validation():
    with pytest.raises(ValueError):
        QualitySeries(np.zeros(10), 4, 2)
    with pytest.raises(ValueError):
        QualitySeries(np.array([0.0, np.nan]), 1, 2)
    with pytest.raises(ValueError):
        QualitySeries.from_values(np.zeros(7), 2)
    s = QualitySeries.from_values(np.zeros(8), 4)
    assert s.T == 2 and len(s) == 8
    assert s.times[0] == 0.25 and s.times[-1] == 2.0


def test_backends_agree_on_loclin():
    rng = np.random.default_rng(3)
    x = np.arange(1, 1001) / 200
    y = np.sin(x) + 0.05 * rng.standard_normal(x.size)
    t = np.linspace(0, 5, 333)
    nb = _hot.loclin(x, y, t, 0.3, use_numba=True)
    npy = _hot.loclin(x, y, t, 0.3, use_numba=False)
    generic = _hot.loclin(x, y, t, 0.3, kernel=_hot.quartic_np, use_numba=True)
    assert np.array_equal(nb[2], npy[2])
    assert np.allclose(nb[0], npy[0], atol=1e-12)
    assert np.allclose(nb[1], npy[1], atol=1e-10)
    assert np.allclose(generic[0], npy[0], atol=1e-12)


def test_cv_prefers_wide_bandwidth_for_flat_truth():
    rng = np.random.default_rng(4)
    picks = [cv_select_bandwidth(series(0.9 + 0.05 * rng.standard_normal(200), 40)) for _ in range(10)]
    assert np.mean(picks) > 0.4


def test_cv_prefers_narrow_bandwidth_for_wiggly_truth():
    n = 100
    x = np.arange(1, 501) / n
    rng = np.random.default_rng(5)
    s = series(np.sin(4 * math.pi * x) + 0.01 * rng.standard_normal(500), n)
    assert cv_select_bandwidth(s) == 0.25


def test_cv_tie_goes_to_smaller_bandwidth():
    n = 40
    s = series(0.5 + 0.1 * np.arange(1, 201) / n, n)
    assert cv_select_bandwidth(s, (0.5, 0.3, 0.4)) == 0.3


def test_cv_fold_assignment_interleaved():
    n = 40
    rng = np.random.default_rng(6)
    s = series(rng.standard_normal(200), n)
    errs = cv_errors(s, (0.3,), folds=10)
    x, y = s.times, s.values
    manual = 0.0
    for f in range(10):
        held = (np.arange(1, 201) % 10) == f
        manual += np.sum((y[held] - jackknife_curve(x[~held], y[~held], x[held], 0.3)) ** 2)
    assert errs[0] == pytest.approx(manual, rel=1e-12)


def test_cv_all_singular():
    s = series(np.arange(20.0), 10)
    with pytest.raises(AllCandidatesSingular):
        cv_select_bandwidth(s, (0.01, 0.02), folds=2)


def test_residuals_shape_and_mean():
    rng = np.random.default_rng(7)
    s = series(0.9 + 0.05 * rng.standard_normal(200), 40)
    r = residuals(s, SmootherConfig(0.4))
    assert r.shape == (200,)
    assert abs(r.mean()) < 0.01


def test_weight_norm_matches_monte_carlo_and_interior_value():
    n, h = 40, 0.4
    x = np.arange(1, 201) / n
    t = np.array([2.5, 5.0])
    wn = jackknife_weight_norm(x, t, h)
    assert wn[0] * math.sqrt(n * h) == pytest.approx(quartic().l2_norm_Kstar, rel=0.02)
    rng = np.random.default_rng(8)
    draws = np.array([jackknife_curve(x, rng.standard_normal(200), t, h) for _ in range(4000)])
    assert draws.std(axis=0) == pytest.approx(wn, rel=0.05)
    assert wn[1] > 1.8 * wn[0]


def test_generic_kernel_path():
    epan = KernelSpec("epanechnikov", lambda u: np.where(np.abs(u) < 1, 0.75 * (1 - np.asarray(u) ** 2), 0.0),
                      lambda u: np.where(np.abs(u) < 1, -1.5 * np.asarray(u), 0.0))
    n = 40
    s = series(0.2 + 0.3 * np.arange(1, 201) / n, n)
    assert jackknife_estimate(s, 2.0, SmootherConfig(0.3, epan)) == pytest.approx(0.8, abs=1e-12)
