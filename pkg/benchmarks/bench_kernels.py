"""Compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 64] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from wmdm import _kernels_py as py
from wmdm import mmspace as M
from wmdm import modulus as Mo

try:
    from wmdm import _kernels as cy
except ImportError:
    cy = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(n: int):
    sp = M.square(n)
    rng = np.random.default_rng(0)
    idx = sp.index.args()
    c = rng.integers(0, sp.n, 2000).astype(np.int64)
    r = rng.uniform(sp.pitch, 0.3, 2000)
    pairs = rng.integers(0, sp.n, (2000, 2)).astype(np.int64)
    pairs = np.ascontiguousarray(pairs[pairs[:, 0] != pairs[:, 1]])
    g = Mo.domain_graph(sp)
    rho = np.ones(sp.n)
    src = np.ascontiguousarray(Mo.side_family(sp).A, np.int64)
    tgt = np.zeros(sp.n, np.uint8)
    tgt[Mo.side_family(sp).B] = 1
    yield "ball_masses", lambda k: k.ball_masses(sp.coords, sp.weights, *idx, c, r, py.HALF, 1e-9)
    yield "pair_ball_masses", lambda k: k.pair_ball_masses(sp.coords, sp.weights, *idx, pairs, py.HALF, 1e-9)
    yield "node_dijkstra", lambda k: k.node_dijkstra(g.indptr, g.indices, g.lengths, rho, src, tgt)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64, help="grid side of the square test space")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"square({args.n}), best of {args.repeat}")
    print(f"{'kernel':<18}{'python s':>12}{'cython s':>12}{'speedup':>10}")
    for name, fn in cases(args.n):
        tp = best_of(lambda: fn(py), args.repeat)
        if cy is None:
            print(f"{name:<18}{tp:>12.4f}{'n/a':>12}{'':>10}")
            continue
        tc = best_of(lambda: fn(cy), args.repeat)
        print(f"{name:<18}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
