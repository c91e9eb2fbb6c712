"""Symbolic references built with sympy, independent of the jet engine."""
from functools import lru_cache

import numpy as np
import sympy as sp


def _factor_phi(kind, radius, xs):
    q = sum(x**2 for x in xs)
    if kind == "euclidean":
        return sp.Integer(1)
    r = sp.nsimplify(radius)
    if kind == "sphere":
        return 4 * r**4 / (r**2 + q) ** 2
    return 4 * r**4 / (r**2 - q) ** 2


@lru_cache(maxsize=None)
def riemannian(blocks):
    """blocks: tuple of (kind, radius, dim). Returns callables Γ(x), R(x)."""
    n = sum(b[2] for b in blocks)
    xs = sp.symbols(f"x0:{n}", real=True)
    a = sp.zeros(n, n)
    s = 0
    for kind, radius, d in blocks:
        phi = _factor_phi(kind, radius, xs[s : s + d])
        for i in range(s, s + d):
            a[i, i] = phi
        s += d
    ainv = sp.diag(*[1 / a[i, i] for i in range(n)])
    G = [[[0] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                G[i][j][k] = sp.simplify(
                    sum(
                        ainv[i, l] * (sp.diff(a[l, k], xs[j]) + sp.diff(a[j, l], xs[k]) - sp.diff(a[j, k], xs[l]))
                        for l in range(n)
                    )
                    / 2
                )
    R = [[[[0] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    R[i][j][k][l] = (
                        sp.diff(G[i][j][l], xs[k])
                        - sp.diff(G[i][j][k], xs[l])
                        + sum(G[i][r][k] * G[r][j][l] - G[i][r][l] * G[r][j][k] for r in range(n))
                    )
    fG = sp.lambdify(xs, G, "numpy")
    fR = sp.lambdify(xs, R, "numpy")
    return (lambda x: np.array(fG(*x), float)), (lambda x: np.array(fR(*x), float))


def blocks_of(metric):
    out = []
    for sl, f in metric._blocks:
        out.append((f.kind, f.radius, f.dim))
    return tuple(out)


def finsler_F2(family, n, params):
    xs = sp.symbols(f"x0:{n}", real=True)
    vs = sp.symbols(f"v0:{n}", real=True)
    if family == "randers":
        b, B, base_r = params
        phi = 1 if base_r is None else 4 * sp.nsimplify(base_r) ** 4 / (sp.nsimplify(base_r) ** 2 + sum(x**2 for x in xs)) ** 2
        alpha = sp.sqrt(phi * sum(v**2 for v in vs))
        bx = [sp.nsimplify(b[i]) + sum(sp.nsimplify(B[i][j]) * xs[j] for j in range(n)) for i in range(n)]
        F = alpha + sum(bx[i] * vs[i] for i in range(n))
    elif family == "funk_disk":
        s = 1 - sum(x**2 for x in xs)
        xv = sum(x * v for x, v in zip(xs, vs))
        F = (sp.sqrt(s * sum(v**2 for v in vs) + xv**2) + xv) / s
    elif family == "minkowski_quartic":
        (eps,) = params
        e = sp.nsimplify(eps)
        F = (sum(v**4 for v in vs) * (1 - e / 2) + e / 2 * sum(v**2 for v in vs) ** 2) ** sp.Rational(1, 4)
    else:
        raise ValueError(family)
    return xs, vs, F**2


@lru_cache(maxsize=None)
def finsler(family, n, params):
    """Callables g(x, v) and spray G(x, v) from symbolic derivatives of F²."""
    xs, vs, F2 = finsler_F2(family, n, params)
    g = sp.Matrix(n, n, lambda i, j: sp.diff(F2, vs[i], vs[j]) / 2)
    mixed = sp.Matrix(n, n, lambda k, l: sp.diff(F2, xs[k], vs[l]))
    gx = sp.Matrix(n, 1, lambda l, _: sp.diff(F2, xs[l]))
    fg = sp.lambdify(xs + vs, g, "numpy")
    fm = sp.lambdify(xs + vs, mixed, "numpy")
    fx = sp.lambdify(xs + vs, gx, "numpy")

    def gfun(x, v):
        return np.array(fg(*x, *v), float)

    def spray(x, v):
        a = list(x) + list(v)
        w = np.array(fm(*a), float).T @ np.asarray(v) - np.array(fx(*a), float).ravel()
        return 0.25 * np.linalg.solve(gfun(x, v), w)

    return gfun, spray
