#!/usr/bin/env python3
"""Table of k-nullity indices across the metric battery.

For every (metric, k) the index is computed at a few random support
elements; the table shows the set of observed dimensions, the smallest
singular-value gap and the largest argument/kernel principal angle.
"""
import argparse

import numpy as np

from finsler_nullity import metrics as M
from finsler_nullity import nullity as nul
from finsler_nullity.sampling import sample_support_elements

BATTERY = {
    "euclidean(3)": lambda: M.euclidean(3),
    "S3(1)": lambda: M.sphere(3, 1.0),
    "S3(2)": lambda: M.sphere(3, 2.0),
    "S2xR": lambda: M.sphere_times_flat(1),
    "S2xR2": lambda: M.sphere_times_flat(2),
    "randers(flat)": lambda: M.randers([0.3, -0.2], [[0.1, 0.05], [0.0, -0.1]]),
    "minkowski_quartic(3)": lambda: M.minkowski_quartic(3, 0.7),
    "funk_disk(2)": lambda: M.funk_disk(2),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", default="0,0.25,0.5,1")
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    ks = [float(s) for s in args.k.split(",")]
    rng = np.random.default_rng(args.seed)
    print(f"{'metric':22s} {'k':>5s} {'mu_k':>8s} {'min gap':>10s} {'max angle':>10s}")
    for name, make in BATTERY.items():
        m = make()
        zs = sample_support_elements(m, args.points, rng)
        for k in ks:
            reps = [nul.nullity_report(m, z, k) for z in zs]
            mus = sorted({r.mu_k for r in reps})
            gap = min(r.gap_ratio for r in reps)
            ang = max(r.principal_angle for r in reps if r.arg.dim == r.ker.dim) if reps else float("nan")
            print(f"{name:22s} {k:5.2f} {str(mus):>8s} {gap:10.2e} {ang:10.1e}")


if __name__ == "__main__":
    main()
