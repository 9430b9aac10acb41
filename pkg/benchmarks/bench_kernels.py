"""Time the compiled row kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--m 10000] [--n 300] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from simcrit import _kernels_py
from simcrit._backend import compiled_available


def cases(m, n, rng):
    x = rng.normal(size=(m, n))
    half = n // 2
    xa, xb = np.ascontiguousarray(x[:, :half]), np.ascontiguousarray(x[:, half:])
    abs_sorted = np.sort(np.abs(rng.standard_t(5, size=m)))
    grid = np.geomspace(0.05, 50, 200)
    return {
        f"one_sample_t  {m}x{n}": lambda k: k.one_sample_t(x),
        f"two_sample_t  {m}x{half}+{n - half}": lambda k: k.two_sample_t(xa, xb),
        f"g_hat_grid    m={m}, 200 levels": lambda k: k.g_hat_grid(abs_sorted, grid),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=10_000)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = {"numpy": _kernels_py}
    if compiled_available():
        from simcrit import _kernels

        backends["cython"] = _kernels
    else:
        print("compiled extension not built; timing the numpy fallback only")

    rng = np.random.default_rng(0)
    print(f"{'kernel':40s}" + "".join(f"{name:>12s}" for name in backends) + ("     speedup" if len(backends) > 1 else ""))
    for label, fn in cases(args.m, args.n, rng).items():
        best = {}
        for name, k in backends.items():
            fn(k)
            best[name] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        row = f"{label:40s}" + "".join(f"{best[name] * 1e3:10.2f}ms" for name in backends)
        if "cython" in best:
            row += f"{best['numpy'] / best['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
