"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from expdyn import _kernels_py

try:
    from expdyn import _kernels as _compiled
except ImportError:
    _compiled = None


def escape_case(impl, size: int):
    return lambda: impl.escape_counts(-4.0, 14.0, -8.0, 8.0, size, size, 1.0, 0.0, 50, 100.0)


def bbox_case(impl, n: int):
    rng = np.random.default_rng(7)
    t = np.linspace(0, 2 * np.pi, n + 1)
    r = 1 + 0.3 * np.sin(7 * t) + 0.01 * rng.standard_normal(n + 1)
    x, y = r * np.cos(t), r * np.sin(t)
    x0, x1 = np.minimum(x[:-1], x[1:]), np.maximum(x[:-1], x[1:])
    y0, y1 = np.minimum(y[:-1], y[1:]), np.maximum(y[:-1], y[1:])
    return lambda: impl.bbox_pairs(x0, y0, x1, y1, x0, y0, x1, y1, 1e-9, True, True)


def best_of(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = [("escape_counts", escape_case, s) for s in (64, 256, 512)]
    cases += [("bbox_pairs", bbox_case, n) for n in (1_000, 10_000, 50_000)]
    print(f"{'kernel':<14} {'size':>7} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    for name, make, size in cases:
        t_py = best_of(make(_kernels_py, size), args.repeat)
        if _compiled is None:
            print(f"{name:<14} {size:>7} {t_py:>10.4f} {'n/a':>11} {'n/a':>8}")
            continue
        t_c = best_of(make(_compiled, size), args.repeat)
        print(f"{name:<14} {size:>7} {t_py:>10.4f} {t_c:>11.4f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
