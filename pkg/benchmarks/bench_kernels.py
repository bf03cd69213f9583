"""Compare the compiled geo kernels against the pure-Python fallback.

Runs the same seeded workload through both backends, checks they agree
bit-for-bit, and prints the timing ratio. Usage:

    python3 benchmarks/bench_kernels.py [--pairs 200000] [--points 2000]
                                        [--queries 500]
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from array import array

from lampgrid import _geokernels_py

try:
    from lampgrid import _geokernels
except ImportError:
    _geokernels = None


def build_workload(pairs: int, points: int, queries: int):
    rng = random.Random(1846)
    pair_args = [
        (rng.uniform(44.0, 46.0), rng.uniform(6.0, 9.0),
         rng.uniform(44.0, 46.0), rng.uniform(6.0, 9.0))
        for _ in range(pairs)
    ]
    lats = array("d", (rng.uniform(45.0, 45.045) for _ in range(points)))
    lons = array("d", (rng.uniform(7.0, 7.063) for _ in range(points)))
    query_args = [
        (rng.uniform(45.0, 45.045), rng.uniform(7.0, 7.063),
         rng.uniform(100.0, 2_500.0))
        for _ in range(queries)
    ]
    return pair_args, lats, lons, query_args


def run_backend(impl, pair_args, lats, lons, query_args):
    haversine = impl.haversine_m
    start = time.perf_counter()
    distances = [haversine(*args) for args in pair_args]
    haversine_s = time.perf_counter() - start

    query = impl.radius_query
    start = time.perf_counter()
    hits = [query(lat, lon, lats, lons, radius)
            for lat, lon, radius in query_args]
    query_s = time.perf_counter() - start
    return distances, hits, haversine_s, query_s


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pairs", type=int, default=200_000,
                        help="point pairs for the distance pass")
    parser.add_argument("--points", type=int, default=2_000,
                        help="fleet size for the radius pass")
    parser.add_argument("--queries", type=int, default=500,
                        help="radius queries against the fleet")
    args = parser.parse_args(argv)

    workload = build_workload(args.pairs, args.points, args.queries)
    pure = run_backend(_geokernels_py, *workload)
    print(f"pure-python: haversine {args.pairs} pairs in {pure[2]:.3f}s, "
          f"radius {args.queries} queries over {args.points} points "
          f"in {pure[3]:.3f}s")

    if _geokernels is None:
        print("compiled backend not built; nothing to compare "
              "(pip install -e . builds it)")
        return 1

    compiled = run_backend(_geokernels, *workload)
    print(f"compiled:    haversine {args.pairs} pairs in {compiled[2]:.3f}s, "
          f"radius {args.queries} queries over {args.points} points "
          f"in {compiled[3]:.3f}s")

    if pure[0] != compiled[0] or pure[1] != compiled[1]:
        print("MISMATCH: backends disagree bit-for-bit", file=sys.stderr)
        return 2
    print("backends agree bit-for-bit on the full workload")
    print(f"speedup: haversine x{pure[2] / compiled[2]:.1f}, "
          f"radius query x{pure[3] / compiled[3]:.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
