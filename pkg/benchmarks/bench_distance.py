"""Benchmark the compiled distance kernel against the NumPy fallback.

Usage: python benchmarks/bench_distance.py [N] [T0]

Times the all-pairs and 2-fold pairwise-distance computations that
dominate Monte Carlo runtime, and verifies both backends agree bitwise.
"""

import sys
import time

import numpy as np

from latentpanel import HAVE_COMPILED, DgpSpec, generate, partition, pseudo_distances


def bench(panel, plan, backend, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        dist = pseudo_distances(panel, plan, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, dist


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 250
    t0 = int(sys.argv[2]) if len(sys.argv) > 2 else 250
    panel = generate(DgpSpec(model=2, n=n, t0=t0, seed=1)).panel
    print(f"pairwise distances, N={n}, T0={t0}")
    if not HAVE_COMPILED:
        print("compiled extension not available; timing the NumPy path only")
    for label, plan in [
        ("all-pairs (loo / no-CF)", partition(n, n, seed=0)),
        ("2-fold", partition(n, 2, seed=0)),
    ]:
        t_py, d_py = bench(panel, plan, "python")
        line = f"  {label:24s} numpy: {t_py * 1e3:8.2f} ms"
        if HAVE_COMPILED:
            t_c, d_c = bench(panel, plan, "compiled")
            same = np.array_equal(
                d_py.values[d_py.computed], d_c.values[d_c.computed]
            )
            line += (
                f"   compiled: {t_c * 1e3:8.2f} ms   speedup: {t_py / t_c:5.2f}x"
                f"   bitwise-equal: {same}"
            )
        print(line)


if __name__ == "__main__":
    main()
