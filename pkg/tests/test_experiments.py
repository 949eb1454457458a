import json

import pytest

from relevmon.experiments import (
    COLUMNS,
    ExperimentSpec,
    ResultTable,
    Row,
    aggregate,
    emit,
    parse_csv,
    replication_seed,
    run_grid,
)
from relevmon.schemes import DetectorConfig, Scheme, run_detector
from relevmon.simgen import simulate_quality

SMALL = dict(scenarios=("mu2", "mu4"), variants=("iid",), ns=(20,), deltas=(0.0, 0.1),
             replications=6, quantile_reps=100)


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(replications=0)
    with pytest.raises(ValueError):
        ExperimentSpec(deltas=(0.1, 0.0))
    with pytest.raises(ValueError):
        ExperimentSpec(schemes=("bogus",))
    spec = ExperimentSpec(**SMALL)
    assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
    ml = ExperimentSpec.from_dict({"study": "ml"})
    assert ml.T == 20 and ml.replications == 100 and ml.ns == (100,)


def test_single_replication_matches_direct_call():
    spec = ExperimentSpec(**{**SMALL, "replications": 1, "schemes": ("relevant-gumbel", "ttest")})
    table = run_grid(spec)
    s = simulate_quality("mu4", "iid", 20, 5, seed=replication_seed(spec.base_seed, "mu4/iid/20", 0))
    for delta in spec.deltas:
        for scheme in spec.schemes:
            cfg = DetectorConfig(Scheme(scheme), delta=delta, quantile_reps=100, seed=spec.base_seed)
            direct = run_detector(s, cfg).first_detection_time
            row = table.get("mu4", "iid", 20, delta, scheme)
            assert row.detections == (direct is not None)
            assert row.mean_detection_time == direct


def test_row_count_and_cusum_pairing():
    spec = ExperimentSpec(**{**SMALL, "replications": 2})
    table = run_grid(spec)
    n_schemes, n_cusum = len(spec.schemes), 2
    per_cell = (n_schemes - n_cusum) * len(spec.deltas) + n_cusum
    assert len(table.rows) == 2 * 1 * 1 * per_cell
    assert all(r.delta == 0 for r in table.rows if r.scheme in ("cusum", "page-cusum"))
    for r in table.rows:
        assert 0 <= r.rejection_rate <= 1 and r.detections <= r.replications
        assert (r.mean_detection_time is None) == (r.detections == 0)


def test_grid_is_independent_of_parallelism():
    spec = ExperimentSpec(**SMALL)
    a = emit(run_grid(spec, jobs=1, chunk=4))
    b = emit(run_grid(spec, jobs=2, chunk=3))
    assert a == b


def test_common_random_numbers_across_schemes():
    spec = ExperimentSpec(**{**SMALL, "schemes": ("ttest", "ttest-corrected")})
    table = run_grid(spec)
    for delta in spec.deltas:
        loose = table.get("mu2", "iid", 20, delta, "ttest")
        tight = table.get("mu2", "iid", 20, delta, "ttest-corrected")
        assert tight.detections <= loose.detections


def test_emit_formats():
    assert emit(ResultTable()).decode() == ",".join(COLUMNS) + "\n"
    row = Row("mu2", "iid", 40, 0.16, "relevant-gumbel", 3, 4, 4.125)
    rows = parse_csv(emit(ResultTable([row])))
    assert rows == [{"scenario": "mu2", "error_or_metric": "iid", "n": "40", "delta": "0.16",
                     "scheme": "relevant-gumbel", "rejection_rate": "0.7500", "mean_detection_time": "4.1250",
                     "detections": "3", "replications": "4", "status": "ok"}]
    js = json.loads(emit(ResultTable([row]), "json"))
    assert js[0]["rejection_rate"] == 0.75 and js[0]["mean_detection_time"] == 4.125
    with pytest.raises(ValueError):
        emit(ResultTable(), "xml")


def test_errored_replications_mark_cell_invalid():
    spec = ExperimentSpec(**{**SMALL, "scenarios": ("mu1",), "schemes": ("naive",), "deltas": (0.0,)})
    boom = RuntimeError("x")
    runs = [{(0.0, "naive"): 1.5}] * 98 + [{(0.0, "naive"): boom}] * 2
    table = aggregate(spec, {("mu1", "iid", 20): runs})
    (row,) = table.rows
    assert row.status == "invalid" and row.replications == 98 and row.detections == 98
    ok = aggregate(spec, {("mu1", "iid", 20): runs[:99] + [{(0.0, "naive"): None}]})
    assert ok.rows[0].status == "ok"
