#!/usr/bin/env python3
"""Flag curvature statistics over random flags, through both the Cartan (R)
and Berwald (H) pipelines.

    python3 scripts/flag_curvature_survey.py [--samples 200] [--seed 0]
"""
import argparse

import numpy as np

from finsler_nullity import curvature as curv
from finsler_nullity import metrics as M
from finsler_nullity.sampling import sample_flag, sample_support_elements


def survey(metric, samples, rng):
    KR, KH = [], []
    for z in sample_support_elements(metric, samples, rng):
        X = sample_flag(z, rng)
        KR.append(curv.flag_curvature(metric, z, X))
        KH.append(curv.flag_curvature(metric, z, X, via="H"))
    return np.array(KR), np.array(KH)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    metrics = {
        "euclidean(3)": M.euclidean(3),
        "sphere(3, r=2)": M.sphere(3, 2.0),
        "S2xR": M.sphere_times_flat(1),
        "funk_disk(2)": M.funk_disk(2),
        "randers(flat, b=(0.3,-0.2))": M.randers([0.3, -0.2], [[0.1, 0.05], [0.0, -0.1]]),
        "minkowski_quartic(3, 0.7)": M.minkowski_quartic(3, 0.7),
    }
    print(f"{'metric':30s} {'min K':>10s} {'mean K':>10s} {'max K':>10s} {'max|K_R-K_H|':>14s}")
    for name, m in metrics.items():
        KR, KH = survey(m, args.samples, rng)
        print(f"{name:30s} {KR.min():10.5f} {KR.mean():10.5f} {KR.max():10.5f} {np.abs(KR - KH).max():14.2e}")


if __name__ == "__main__":
    main()
