#!/usr/bin/env python3
"""Integrate a Funk-disk geodesic toward the boundary and show how the
Euclidean speed decays until the support-element floor ends the run.

    python3 scripts/trace_funk.py [--t-end 40] [--csv out.csv]
"""
import argparse

import numpy as np

from finsler_nullity import geodesics as geo
from finsler_nullity import metrics as M
from finsler_nullity.jets import SupportElement


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=40.0)
    ap.add_argument("--start", default="0.1,0,1,0.2", help="x1,x2,v1,v2")
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    a = [float(s) for s in args.start.split(",")]
    tr = geo.integrate_geodesic(M.funk_disk(2), SupportElement.of(a[:2], a[2:]), args.t_end)
    print(f"{'t':>8s} {'1-|x|':>12s} {'|v|':>12s} {'F':>12s}")
    for t in np.linspace(0, tr.t_end, 12):
        x, v = tr.at(t)
        print(f"{t:8.3f} {1 - np.linalg.norm(x):12.3e} {np.linalg.norm(v):12.3e} {np.interp(t, tr.times, tr.F):12.8f}")
    print(f"steps={len(tr.times) - 1} energy_drift={tr.energy_drift():.2e} domain_exit={tr.domain_exit}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(tr.to_csv())


if __name__ == "__main__":
    main()
