"""Compiled vs pure-numpy kernel timings.

    python benchmarks/bench_kernels.py [--n 20000] [--k 3] [--repeat 5]

Prints best-of-N wall time per kernel for each backend and the speed-up.
Also checks that both backends return the same answer on the benchmark
inputs.
"""
import argparse
import time

import numpy as np

from sleepadapt import _kernels_py

try:
    from sleepadapt import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def inputs(n, k, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.dirichlet(np.ones(k) * 5, k) + np.eye(k) * 5
    A /= A.sum(axis=1, keepdims=True)
    pi = np.full(k, 1.0 / k)
    b = rng.uniform(0.01, 1.0, (n, k))
    return b, pi, A, rng.normal(size=n)


def cases(mod, b, pi, A, z):
    _, c = mod.forward(b, pi, A)
    return {
        "forward": lambda: mod.forward(b, pi, A),
        "backward": lambda: mod.backward(b, A, c),
        "viterbi": lambda: mod.viterbi(np.log(b), np.log(pi), np.log(A)),
        "nearest_neighbor_1d": lambda: mod.nearest_neighbor_1d(z),
    }


def same(x, y):
    if isinstance(x, tuple):
        return all(same(a, b) for a, b in zip(x, y))
    return np.allclose(x, y, rtol=1e-12, atol=0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    b, pi, A, z = inputs(args.n, args.k)
    py = cases(_kernels_py, b, pi, A, z)
    if _kernels_c is None:
        print("compiled extension not built; timing the numpy fallback only")
    cy = cases(_kernels_c, b, pi, A, z) if _kernels_c else {}

    print(f"N={args.n} K={args.k} best of {args.repeat}")
    print(f"{'kernel':<22}{'python (ms)':>12}{'cython (ms)':>13}{'speed-up':>10}  match")
    for name, fn in py.items():
        tp, out_p = best_of(fn, args.repeat)
        if name in cy:
            tc, out_c = best_of(cy[name], args.repeat)
            print(f"{name:<22}{tp * 1e3:>12.2f}{tc * 1e3:>13.3f}{tp / tc:>9.1f}x  {same(out_p, out_c)}")
        else:
            print(f"{name:<22}{tp * 1e3:>12.2f}")


if __name__ == "__main__":
    main()
