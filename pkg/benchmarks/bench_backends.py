"""Time the numba and pure-numpy backends of the hot kernels on identical inputs.

    python3 benchmarks/bench_backends.py [--repeat 5]

Each kernel is warmed up once (numba compiles on first call), then timed
``--repeat`` times; the best time is reported along with the largest
absolute difference between the two backends' outputs.
"""
import argparse
import time

import numpy as np

from relevmon import _hot
from relevmon.quantiles import kstar_weights
from relevmon.kernels import quartic


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    n, T = 200, 5
    x = np.arange(1, T * n + 1) / n
    y = 0.9 + 0.05 * rng.standard_normal(x.size)
    t = np.arange(n, T * n + 1) / n
    yield "loclin n=200 T=5", lambda nb: _hot.loclin(x, y, t, 0.35, use_numba=nb)[0]

    kvec = kstar_weights(40, 0.5, quartic())
    v = rng.standard_normal((500, 200))
    yield "gaussian_sups 500x200", lambda nb: _hot.gaussian_sups(v, kvec, 0, True, use_numba=nb)

    z = rng.standard_normal((256, 10_000))
    yield "brownian 256x10000", lambda nb: np.stack(_hot.brownian_functionals(z, use_numba=nb))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _hot.HAS_NUMBA:
        print("numba unavailable; timing the numpy backend only")
    print(f"{'kernel':<24}{'numpy s':>10}{'numba s':>10}{'speedup':>9}{'max |diff|':>12}")
    for name, run in cases():
        t_np = best_of(lambda: run(False), args.repeat)
        if _hot.HAS_NUMBA:
            t_nb = best_of(lambda: run(True), args.repeat)
            diff = float(np.nanmax(np.abs(run(True) - run(False))))
            print(f"{name:<24}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>9.1f}{diff:>12.2e}")
        else:
            print(f"{name:<24}{t_np:>10.4f}{'-':>10}{'-':>9}{'-':>12}")


if __name__ == "__main__":
    main()
