"""relevmon command line.

Exit codes: 0 ok, 1 alarm raised (monitor only), 2 usage error, 3 data error.
"""
import argparse
import csv
import io
import json
import logging
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import quantiles as qmod
from .errors import RelevmonError
from .experiments import ExperimentSpec, emit, run_grid
from .mlexp import DriftRegime, RegimeKind, run_history
from .schemes import BOUNDARY_MODES, DetectorConfig, Scheme, StreamingDetector, run_detector
from .simgen import ErrorKind, MeanKind, simulate_quality
from .smoothing import QualitySeries, SmootherConfig

EXIT_OK, EXIT_ALARM, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
_N_HEADER = re.compile(r"#\s*n\s*=\s*(\d+)")


class DataError(Exception):
    pass


def _write(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def read_series_csv(text: str):
    """Parse `index,value` rows or a single value column; returns (values, n from header or None)."""
    n = None
    values = []
    value_col = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip():
            continue
        first = row[0].strip()
        if first.startswith("#"):
            m = _N_HEADER.match(first)
            if m:
                n = int(m.group(1))
            continue
        cells = [c.strip() for c in row]
        if not values and value_col is None and any(c.lower() == "value" for c in cells):
            value_col = [c.lower() for c in cells].index("value")
            continue
        col = value_col if value_col is not None else (0 if len(cells) == 1 else 1)
        try:
            v = float(cells[col])
        except (ValueError, IndexError):
            raise DataError(f"row {lineno}: cannot parse {','.join(row)!r}")
        if not math.isfinite(v):
            raise DataError(f"row {lineno}: non-finite value {cells[col]!r}")
        values.append(v)
    return np.asarray(values, dtype=float), n


def _detector_config(args) -> DetectorConfig:
    smoother = SmootherConfig(args.bandwidth) if args.bandwidth else None
    return DetectorConfig(Scheme(args.scheme), delta=args.delta, alpha=args.alpha, smoother=smoother,
                          quantile_reps=args.quantile_reps, seed=args.seed, boundary=args.boundary)


def cmd_simulate(args) -> int:
    s = simulate_quality(args.mean, args.errors, args.n, args.T, seed=args.seed, noise_scale=args.noise_scale)
    buf = io.StringIO()
    buf.write(f"# n={args.n}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "time", "value"])
    for i, (t, v) in enumerate(zip(s.times, s.values), start=1):
        w.writerow([i, f"{t:.6g}", repr(float(v))])
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def _stream_report(cfg, values, n, T, refresh_every) -> dict:
    det = StreamingDetector(cfg, n, T, refresh_every)
    for v in values:
        if det.update(v) is not None:
            break
    a = det.alarm
    return {
        "scheme": cfg.scheme.value, "delta": cfg.delta, "alpha": cfg.alpha, "mode": "stream",
        "rejected": a is not None, "first_detection_time": None if a is None else a.time,
        "baseline": det.baseline, "bandwidth": det.bandwidth,
        "lrv": None if det.lrv is None else det.lrv.to_dict(),
        "trace": [{"t": t, "stat": _finite(st), "thresh": _finite(c)} for t, st, c in det.trace],
    }


def _finite(x):
    return x if math.isfinite(x) else None


def cmd_monitor(args) -> int:
    text = sys.stdin.read() if args.input in (None, "-") else Path(args.input).read_text()
    values, header_n = read_series_csv(text)
    n = args.n or header_n
    if not n:
        raise UsageError("n is required (flag --n or a '# n=' header line)")
    if values.size == 0:
        raise DataError("no observations")
    cfg = _detector_config(args)
    if args.stream:
        T = args.T or math.ceil(values.size / n)
        report = _stream_report(cfg, values[: n * T], n, T, args.refresh_every)
    else:
        if args.T:
            if values.size < n * args.T:
                raise DataError(f"need {n * args.T} observations, got {values.size}")
            values = values[: n * args.T]
        if values.size % n:
            raise DataError(f"{values.size} observations is not a multiple of n={n}")
        report = run_detector(QualitySeries.from_values(values, n), cfg).to_dict()
    sys.stdout.write(json.dumps(report, allow_nan=False) + "\n")
    return EXIT_ALARM if report["rejected"] else EXIT_OK


def cmd_quantiles(args) -> int:
    src = qmod.Source(args.source)
    reps = args.reps
    if reps is None:
        reps = qmod.BROWNIAN_REPS if src in (qmod.Source.BROWNIAN_SUP, qmod.Source.PAGE_BROWNIAN) else 1000
    req = qmod.QuantileRequest(args.alpha, src, n=args.n, T=args.T, h=args.h, reps=reps, seed=args.seed,
                               grid=args.grid)
    value = qmod.quantile(req)
    sys.stdout.write(json.dumps({"source": req.source.value, "alpha": args.alpha, "key": req.fingerprint(),
                                 "value": value}) + "\n")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = json.loads(Path(args.config).read_text()) if args.config else {}
    cfg["study"] = args.study
    if args.replications:
        cfg["replications"] = args.replications
    if args.seed is not None:
        cfg["base_seed"] = args.seed
    try:
        spec = ExperimentSpec.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad experiment spec: {exc}")
    data = emit(run_grid(spec, jobs=args.jobs), args.format)
    if args.out in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(args.out).write_bytes(data)
    return EXIT_OK


def cmd_mlexp(args) -> int:
    regime = DriftRegime(args.regime)
    acc, conf = run_history(regime, args.seed, args.n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "accuracy", "confidence"])
    for e, (a, c) in enumerate(zip(acc.values, conf.values), start=1):
        w.writerow([e, f"{a:.4f}", repr(float(c))])
    _write(buf.getvalue(), args.out)
    if args.spec_out:
        Path(args.spec_out).write_text(json.dumps({**regime.to_dict(), "seed": args.seed, "n": args.n}, indent=1))
    return EXIT_OK


class UsageError(Exception):
    pass


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relevmon", description="Relevant-deviation monitoring of model quality.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic quality trajectory as CSV")
    s.add_argument("--mean", choices=[m.value for m in MeanKind], default="mu1")
    s.add_argument("--errors", choices=[e.value for e in ErrorKind], default="iid")
    s.add_argument("--n", type=_positive_int, default=40)
    s.add_argument("--T", type=_positive_int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-scale", type=float, default=1.0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("monitor", help="run a detector on a CSV series; exit 1 on alarm")
    m.add_argument("input", nargs="?", default="-")
    m.add_argument("--scheme", choices=[x.value for x in Scheme], default=Scheme.RELEVANT_GUMBEL.value)
    m.add_argument("--delta", type=float, default=0.0)
    m.add_argument("--alpha", type=float, default=0.05)
    m.add_argument("--n", type=_positive_int)
    m.add_argument("--T", type=_positive_int)
    m.add_argument("--seed", type=int, default=qmod.DEFAULT_SEED)
    m.add_argument("--bandwidth", type=float, help="fixed bandwidth instead of cross validation")
    m.add_argument("--quantile-reps", type=_positive_int, default=1000)
    m.add_argument("--boundary", choices=BOUNDARY_MODES, default="standardize")
    m.add_argument("--stream", action="store_true", help="replay rows one at a time")
    m.add_argument("--refresh-every", type=_positive_int)
    m.set_defaults(func=cmd_monitor)

    q = sub.add_parser("quantiles", help="print a critical value as JSON")
    q.add_argument("--source", choices=[x.value for x in qmod.Source], default=qmod.Source.GUMBEL_LOG2.value)
    q.add_argument("--alpha", type=float, default=0.05)
    q.add_argument("--n", type=int, default=0)
    q.add_argument("--T", type=int, default=0)
    q.add_argument("--h", type=float, default=0.0)
    q.add_argument("--reps", type=_positive_int, help="default 1000, or the bundled count for Brownian sources")
    q.add_argument("--grid", type=_positive_int, default=qmod.BROWNIAN_GRID)
    q.add_argument("--seed", type=int, default=qmod.DEFAULT_SEED)
    q.set_defaults(func=cmd_quantiles)

    e = sub.add_parser("experiment", help="run a replication grid")
    e.add_argument("study", choices=["sim", "ml"])
    e.add_argument("--config", help="JSON file with ExperimentSpec fields")
    e.add_argument("--out", default="-")
    e.add_argument("--format", choices=["csv", "json"], default="csv")
    e.add_argument("--jobs", type=_positive_int, default=1)
    e.add_argument("--replications", type=_positive_int)
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_experiment)

    x = sub.add_parser("mlexp", help="write one classifier history as CSV")
    x.add_argument("--regime", choices=[r.value for r in RegimeKind], default="stable")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--n", type=_positive_int, default=100)
    x.add_argument("--out", default="-")
    x.add_argument("--spec-out", help="also write the regime as JSON here")
    x.set_defaults(func=cmd_mlexp)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"relevmon: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, RelevmonError, OSError) as exc:
        print(f"relevmon: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"relevmon: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
