#!/usr/bin/env python3
"""Compare the compiled exploration kernel against the pure fallback.

Times identical workloads on both backends and checks the results are
bit-identical (same settled sites, same costs).

Usage: python3 benchmarks/compare_backends.py [--budget BUDGET]
"""

import argparse
import importlib
import os
import sys
import time

import numpy as np


def fresh_backend(pure):
    os.environ["CONEFPP_PURE_PYTHON"] = "1" if pure else ""
    for name in list(sys.modules):
        if name.startswith("conefpp"):
            del sys.modules[name]
    return importlib.import_module("conefpp")


def workload(pkg, budget):
    """Bounded exploration from the origin; returns timing + digest."""
    import conefpp.geometry as G
    import conefpp.randomness as R
    kernel = pkg.kernel
    runs = [
        ("lattice d=2 exp", G.lattice(2), R.exponential(1.0), budget),
        ("cone d=2 exp", G.cone((1, 0), 0.6), R.exponential(1.0), budget),
        ("lattice d=3 exp", G.lattice(3), R.exponential(1.0),
         budget * 0.6),
        ("lattice d=2 uniform", G.lattice(2), R.uniform(0.2, 1.0),
         budget),
    ]
    rows = []
    for name, region, dist, bound in runs:
        origin = tuple([0] * region.d)
        t0 = time.perf_counter()
        status, sites, costs, parents, m, frontier, tidx = kernel.explore(
            42, region.d, region.encode(), dist.encode(),
            (0, 0.0, 0.0, 1.0), [origin], bound=bound)
        dt = time.perf_counter() - t0
        order = np.lexsort(sites.T[::-1])
        digest = hash((sites[order].tobytes(), costs[order].tobytes()))
        rows.append((name, m, dt, digest))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--budget", type=float, default=20.0,
                    help="cost bound for the d=2 exploration")
    args = ap.parse_args()

    pkg = fresh_backend(pure=False)
    compiled_available = pkg.kernel.has_compiled()
    compiled = workload(pkg, args.budget) if compiled_available else None

    pkg = fresh_backend(pure=True)
    assert not pkg.kernel.has_compiled()
    pure = workload(pkg, args.budget)

    print(f"{'workload':24} {'sites':>9} {'pure':>9} {'compiled':>9} "
          f"{'speedup':>8}  identical")
    for i, (name, m, dt_pure, dig_pure) in enumerate(pure):
        if compiled is not None:
            _, m2, dt_comp, dig_comp = compiled[i]
            same = dig_pure == dig_comp and m == m2
            print(f"{name:24} {m:9d} {dt_pure:8.3f}s {dt_comp:8.3f}s "
                  f"{dt_pure / dt_comp:7.1f}x  {same}")
            if not same:
                raise SystemExit(f"backend mismatch on {name}")
        else:
            print(f"{name:24} {m:9d} {dt_pure:8.3f}s {'-':>9} {'-':>8}  -")
    if compiled is None:
        print("compiled backend not built; pure results only")


if __name__ == "__main__":
    main()
