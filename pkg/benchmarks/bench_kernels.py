"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from isomech import _kernels_py

try:
    from isomech import _kernels
except ImportError:
    _kernels = None


def _cases(rng):
    y = rng.normal(5, 2, 17)
    w = np.ones(17)
    long_y = rng.normal(0, 1, 5000).cumsum()
    long_w = rng.uniform(0.5, 2, 5000)
    reports = rng.uniform(1, 10, (120, 5))
    noise = rng.normal(0, 1, (20000, 5))
    return {
        "pava n=17": lambda k: k.pava_nonincreasing(y, w),
        "pava n=5000": lambda k: k.pava_nonincreasing(long_y, long_w),
        "mean_utilities 120x20000x5 power:2": lambda k: k.mean_utilities(reports, noise, k.POWER, 2.0),
        "mean_utilities 120x20000x5 accept:6": lambda k: k.mean_utilities(reports, noise, k.ACCEPT, 6.0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = {"python": _kernels_py}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'case':<38} " + " ".join(f"{b:>12}" for b in backends) + "   speedup")
    for name, fn in _cases(rng).items():
        times = {}
        for b, k in backends.items():
            t = timeit.Timer(lambda: fn(k))
            number, _ = t.autorange()
            times[b] = min(t.repeat(args.repeat, number)) / number
        cols = " ".join(f"{times[b] * 1e3:>10.3f}ms" for b in backends)
        speedup = f"{times['python'] / times['cython']:8.1f}x" if "cython" in times else ""
        print(f"{name:<38} {cols} {speedup}")


if __name__ == "__main__":
    main()
