"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--length 2048] [--assets 5] [--repeat 5]

Each row reports the best of ``--repeat`` runs and the speed-up of the
compiled backend. The last row is a full (Q, S, N, N) tensor on the default
grids, which is what one backtest subperiod costs.
"""

import argparse
import time

import numpy as np

from mdccp import _kernels_py, kernels, mfdcca

try:
    from mdccp import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def full_tensor(impl, values):
    saved = kernels.moving_average, kernels.box_cov, kernels.power_means
    kernels.moving_average, kernels.box_cov, kernels.power_means = impl.moving_average, impl.box_cov, impl.power_means
    try:
        return mfdcca.f_tensor(values, mfdcca.DEFAULT_Q, mfdcca.DEFAULT_S)
    finally:
        kernels.moving_average, kernels.box_cov, kernels.power_means = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=int, default=2048)
    ap.add_argument("--assets", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _kernels_c is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    rng = np.random.default_rng(args.seed)
    values = rng.standard_normal((args.length, args.assets)) * 0.01
    prof = np.cumsum(values[:, 0] - values[:, 0].mean())
    resid = np.ascontiguousarray(rng.standard_normal((args.assets, args.length)))
    s = 20
    starts = mfdcca.partition_boxes(args.length, s)
    boxes = np.ascontiguousarray(np.abs(rng.standard_normal((len(starts), args.assets * (args.assets + 1) // 2))))
    qs = np.asarray(mfdcca.DEFAULT_Q, dtype=float)

    cases = [
        ("moving_average (l=60)", lambda m: m.moving_average(prof, 60, False)),
        (f"box_cov (s={s}, {len(starts)} boxes)", lambda m: m.box_cov(resid, starts, s)),
        (f"power_means ({len(qs)} orders)", lambda m: m.power_means(boxes, qs, False)),
        ("f_tensor, default grids", lambda m: full_tensor(m, values)),
    ]
    print(f"T={args.length} N={args.assets} best of {args.repeat}")
    print(f"{'case':<34}{'python [ms]':>14}{'cython [ms]':>14}{'speed-up':>10}")
    for name, fn in cases:
        tp = best_of(lambda: fn(_kernels_py), args.repeat)
        tc = best_of(lambda: fn(_kernels_c), args.repeat)
        print(f"{name:<34}{1e3 * tp:>14.3f}{1e3 * tc:>14.3f}{tp / tc:>9.1f}x")
    a, b = full_tensor(_kernels_py, values), full_tensor(_kernels_c, values)
    print(f"max relative difference between backends: {np.max(np.abs(a - b) / b):.1e}")


if __name__ == "__main__":
    main()
