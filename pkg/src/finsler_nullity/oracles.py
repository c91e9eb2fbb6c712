"""Closed-form Christoffel symbols and curvature of the built-in Riemannian
families, used as references for the jet pipeline.

Each factor has a_ij = e^{2σ} δ_ij with σ = -log(r² ± |x|²) + const, so
Γ^i_jk = δ^i_j σ_k + δ^i_k σ_j - δ_jk σ_i and, being a space form of
curvature c, R^i_jkl = c (a_jl δ^i_k - a_jk δ^i_l).
"""
from __future__ import annotations

import numpy as np

from .metrics import FinslerMetric


def _grad_sigma(factor, x):
    if factor.kind == "euclidean":
        return np.zeros_like(x)
    r2, q = factor.radius**2, float(x @ x)
    if factor.kind == "sphere":
        return -2.0 * x / (r2 + q)
    return 2.0 * x / (r2 - q)


def christoffel(metric: FinslerMetric, x) -> np.ndarray:
    x = np.asarray(x, float)
    n = metric.n
    out = np.zeros((n, n, n))
    for sl, f in metric._blocks:
        s = _grad_sigma(f, x[sl])
        d = f.dim
        I = np.eye(d)
        out[sl, sl, sl] = (
            np.einsum("ij,k->ijk", I, s) + np.einsum("ik,j->ijk", I, s) - np.einsum("jk,i->ijk", I, s)
        )
    return out


def riemann(metric: FinslerMetric, x) -> np.ndarray:
    """R^i_jkl with R(∂_k, ∂_l)∂_j = R^i_jkl ∂_i."""
    x = np.asarray(x, float)
    n = metric.n
    a = metric.riemannian_matrix(x)
    out = np.zeros((n, n, n, n))
    for sl, c in metric.factor_curvatures():
        if c == 0.0:
            continue
        A = a[sl, sl]
        I = np.eye(A.shape[0])
        out[sl, sl, sl, sl] = c * (np.einsum("jl,ik->ijkl", A, I) - np.einsum("jk,il->ijkl", A, I))
    return out
