"""Replication grids over simulated or classifier histories and their aggregation."""
import csv
import io
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import RelevmonError
from .mlexp import DriftRegime, run_history
from .schemes import (
    DetectorConfig,
    Scheme,
    fit_relevant,
    run_cusum,
    run_naive,
    run_relevant,
    run_ttest,
    ttest_statistics,
)
from .simgen import simulate_quality

log = logging.getLogger(__name__)

COLUMNS = (
    "scenario", "error_or_metric", "n", "delta", "scheme",
    "rejection_rate", "mean_detection_time", "detections", "replications", "status",
)
INVALID_SHARE = 0.01
SIM_DELTAS = (0.0, 0.01, 0.02, 0.06, 0.08, 0.10, 0.12, 0.14, 0.15, 0.16, 0.18, 0.19, 0.20, 0.21, 0.22)
ML_DELTAS = tuple(round(0.01 * k, 2) for k in range(11))


@dataclass(frozen=True)
class ExperimentSpec:
    """One replication grid.

    ``scenarios`` are mean profiles (study "sim") or drift regimes (study "ml");
    ``variants`` are error kinds or quality metrics respectively.
    """

    study: str = "sim"
    scenarios: Tuple[str, ...] = ("mu1", "mu2", "mu3", "mu4")
    variants: Tuple[str, ...] = ("iid", "ma", "ar")
    ns: Tuple[int, ...] = (40, 100, 200)
    deltas: Tuple[float, ...] = SIM_DELTAS
    schemes: Tuple[str, ...] = tuple(s.value for s in Scheme)
    replications: int = 1000
    alpha: float = 0.05
    base_seed: int = 20240101
    T: int = 5
    quantile_reps: int = 1000
    boundary: str = "standardize"

    def __post_init__(self):
        for name in ("scenarios", "variants", "ns", "deltas", "schemes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.study not in ("sim", "ml"):
            raise ValueError(f"study must be 'sim' or 'ml', got {self.study!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if list(self.deltas) != sorted(self.deltas):
            raise ValueError("deltas must be sorted ascending")
        for s in self.schemes:
            Scheme(s)

    @classmethod
    def ml_default(cls, **kw) -> "ExperimentSpec":
        base = dict(study="ml", scenarios=("stable", "concept-drift", "data-drift"),
                    variants=("accuracy", "confidence"), ns=(100,), deltas=ML_DELTAS,
                    replications=100, T=20)
        base.update(kw)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if d.get("study") == "ml":
            return cls.ml_default(**d)
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def pairs(self) -> List[Tuple[float, Scheme]]:
        """(delta, scheme) combinations that are run; CUSUM only at delta = 0."""
        out = []
        for s in map(Scheme, self.schemes):
            for d in self.deltas:
                if s.is_cusum and d != 0:
                    continue
                out.append((float(d), s))
        return out


@dataclass
class Row:
    scenario: str
    error_or_metric: str
    n: int
    delta: float
    scheme: str
    detections: int
    replications: int
    mean_detection_time: Optional[float]
    status: str = "ok"

    @property
    def rejection_rate(self) -> float:
        return self.detections / self.replications if self.replications else math.nan


@dataclass
class ResultTable:
    rows: List[Row] = field(default_factory=list)

    def get(self, scenario, variant, n, delta, scheme) -> Row:
        for r in self.rows:
            if (r.scenario, r.error_or_metric, r.n, r.scheme) == (scenario, variant, n, Scheme(scheme).value) \
                    and abs(r.delta - delta) < 1e-12:
                return r
        raise KeyError((scenario, variant, n, delta, scheme))


def replication_seed(base_seed: int, scenario_id: str, rep: int) -> List[int]:
    return [int(base_seed), zlib.crc32(scenario_id.encode()), int(rep)]


def evaluate_series(series, pairs: Sequence[Tuple[float, Scheme]], alpha: float,
                    quantile_reps: int, seed: int, boundary: str) -> Dict[Tuple[float, str], object]:
    """Run every (delta, scheme) on one trajectory, sharing delta-free work.

    Values are a detection time, None, or the exception raised.
    """
    out: Dict[Tuple[float, str], object] = {}
    base = DetectorConfig(Scheme.NAIVE, alpha=alpha, quantile_reps=quantile_reps, seed=seed, boundary=boundary)
    shared: Dict[str, object] = {}

    def once(key, make):
        if key not in shared:
            try:
                shared[key] = make()
            except RelevmonError as exc:
                shared[key] = exc
        if isinstance(shared[key], Exception):
            raise shared[key]
        return shared[key]

    for delta, scheme in pairs:
        cfg = replace(base, scheme=scheme, delta=delta)
        try:
            if scheme is Scheme.NAIVE:
                rep = run_naive(series, cfg)
            elif scheme in (Scheme.TTEST, Scheme.TTEST_CORRECTED):
                rep = run_ttest(series, cfg, stats=once("ttest", lambda: ttest_statistics(series)))
            elif scheme.is_cusum:
                rep = run_cusum(series, cfg)
            else:
                rep = run_relevant(series, cfg, fit=once("fit", lambda: fit_relevant(series, cfg)))
            out[(delta, scheme.value)] = rep.first_detection_time
        except RelevmonError as exc:
            out[(delta, scheme.value)] = exc
    return out


def _sim_task(args):
    spec, mean, err, n, reps = args
    scen = f"{mean}/{err}/{n}"
    pairs = spec.pairs()
    res = []
    for rep in reps:
        series = simulate_quality(mean, err, n, spec.T, seed=replication_seed(spec.base_seed, scen, rep))
        res.append(evaluate_series(series, pairs, spec.alpha, spec.quantile_reps, spec.base_seed,
                                   spec.boundary))
    return {(mean, err, n): res}


def _ml_task(args):
    spec, regime, _, n, reps = args
    pairs = spec.pairs()
    out: Dict[tuple, list] = {(regime, m, n): [] for m in spec.variants}
    for rep in reps:
        acc, conf = run_history(DriftRegime(regime), replication_seed(spec.base_seed, regime, rep), n)
        for metric in spec.variants:
            series = {"accuracy": acc, "confidence": conf}[metric]
            out[(regime, metric, n)].append(
                evaluate_series(series, pairs, spec.alpha, spec.quantile_reps, spec.base_seed,
                                spec.boundary))
    return out


def _tasks(spec: ExperimentSpec, chunk: int):
    reps = list(range(spec.replications))
    blocks = [reps[i : i + chunk] for i in range(0, len(reps), chunk)]
    variants = spec.variants if spec.study == "sim" else (None,)
    for scen in spec.scenarios:
        for var in variants:
            for n in spec.ns:
                for b in blocks:
                    yield (spec, scen, var, n, b)


def run_grid(spec: ExperimentSpec, jobs: int = 1, chunk: int = 25) -> ResultTable:
    """Run the grid; the result does not depend on ``jobs`` or ``chunk``."""
    task = _sim_task if spec.study == "sim" else _ml_task
    tasks = list(_tasks(spec, chunk))
    collected: Dict[tuple, list] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(task, tasks))
    else:
        parts = [task(t) for t in tasks]
    # tasks are ordered by replication block, so concatenation keeps replication order
    for part in parts:
        for key, res in part.items():
            collected.setdefault(key, []).extend(res)
    return aggregate(spec, collected)


def aggregate(spec: ExperimentSpec, collected: Dict[tuple, list]) -> ResultTable:
    table = ResultTable()
    variants = spec.variants
    for scen in spec.scenarios:
        for var in variants:
            for n in spec.ns:
                runs = collected.get((scen, var, n))
                if runs is None:
                    continue
                for delta, scheme in spec.pairs():
                    outcomes = [r[(delta, scheme.value)] for r in runs]
                    errored = sum(isinstance(o, Exception) for o in outcomes)
                    times = [o for o in outcomes if isinstance(o, float)]
                    valid = len(outcomes) - errored
                    status = "invalid" if errored > INVALID_SHARE * len(outcomes) else "ok"
                    if errored:
                        log.warning("%s/%s/n=%d delta=%g %s: %d errored replications",
                                    scen, var, n, delta, scheme.value, errored)
                    mean_t = math.fsum(times) / len(times) if times else None
                    table.rows.append(Row(scen, var, n, delta, scheme.value, len(times), valid, mean_t, status))
    return table


def _fmt(x: Optional[float], digits: int) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{digits}f}"


def emit(table: ResultTable, fmt: str = "csv") -> bytes:
    if fmt == "json":
        rows = [
            {
                "scenario": r.scenario, "error_or_metric": r.error_or_metric, "n": r.n, "delta": r.delta,
                "scheme": r.scheme, "rejection_rate": round(r.rejection_rate, 4) if r.replications else None,
                "mean_detection_time": r.mean_detection_time, "detections": r.detections,
                "replications": r.replications, "status": r.status,
            }
            for r in table.rows
        ]
        return (json.dumps(rows, indent=1) + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in table.rows:
        w.writerow([r.scenario, r.error_or_metric, r.n, f"{r.delta:g}", r.scheme, _fmt(r.rejection_rate, 4),
                    _fmt(r.mean_detection_time, 4), r.detections, r.replications, r.status])
    return buf.getvalue().encode()


def parse_csv(data: bytes) -> List[dict]:
    return list(csv.DictReader(io.StringIO(data.decode())))
