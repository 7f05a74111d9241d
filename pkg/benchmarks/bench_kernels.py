"""Compiled vs NumPy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each row times one kernel call (best of ``--repeat``) on both
implementations and checks that their outputs agree.
"""
import argparse
import json
import timeit

import numpy as np

from gibbsgeo import _kernels_py as py

try:
    from gibbsgeo import _kernels as cy
except ImportError:
    cy = None


def cases():
    rng = np.random.default_rng(0)
    for d, k in [(2, 2), (2, 4), (3, 3), (2, 8), (4, 4)]:
        B = rng.uniform(-1, 1, d**k)
        P = py.normalize(B, d, k)[0]
        yield f"normalize d={d} k={k}", (lambda m, B=B, d=d, k=k: m.normalize(B, d, k)[0])
        yield f"stationary d={d} k={k}", (lambda m, P=P, d=d, k=k: m.stationary(P, d, k))
    for d, k in [(2, 2), (2, 3), (3, 2)]:
        n = d**k
        A0 = py.normalize(rng.uniform(-1, 1, n), d, k)[0]
        E = rng.standard_normal((min(3, n - d ** (k - 1)), n))
        c = np.full(E.shape[0], 0.01)
        yield f"metric d={d} k={k}", (lambda m, A0=A0, E=E, c=c, d=d, k=k: m.metric(A0, E, c, d, k, 1e-4)[0])
        yield f"metric_jet d={d} k={k}", (
            lambda m, A0=A0, E=E, c=c, d=d, k=k: m.metric_jet(A0, E, c, d, k, 1e-4, 2e-3)[1])


def best(fn, mod, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(mod), number=1), 1e-7)))
    return min(timeit.repeat(lambda: fn(mod), number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args()
    if cy is None:
        print("compiled extension not built; timing the NumPy kernels only")
    rows = []
    print(f"{'kernel':<26}{'numpy (s)':>12}{'compiled (s)':>14}{'speedup':>9}{'max diff':>11}")
    for name, fn in cases():
        t_py = best(fn, py, args.repeat)
        t_cy = best(fn, cy, args.repeat) if cy else float("nan")
        diff = float(np.max(np.abs(np.asarray(fn(py)) - np.asarray(fn(cy))))) if cy else float("nan")
        rows.append({"kernel": name, "numpy_s": t_py, "compiled_s": t_cy, "max_diff": diff})
        print(f"{name:<26}{t_py:>12.2e}{t_cy:>14.2e}{t_py / t_cy:>9.1f}{diff:>11.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
