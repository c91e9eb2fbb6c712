"""Cartan curvatures R, P, Q, the Berwald curvature H, flag curvature and
the related curvature operator Ω̄ = Ω - η^k.

Slot conventions are the ones documented in :mod:`finsler_nullity.connection`.
Residual checks are reported relative to ``max(1, ‖tensor‖∞)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connection import PointGeometry, TensorBlock, point_geometry
from .errors import DegenerateFlagError
from .jets import SupportElement
from .metrics import FinslerMetric

_E = np.einsum
UP_DOWN3 = ("up", "down", "down", "down")


def _memo(pg: PointGeometry, key, fn):
    cache = pg.__dict__.setdefault("_curv", {})
    if key not in cache:
        cache[key] = fn(pg)
    return cache[key]


def scale(*arrays) -> float:
    return max([1.0] + [float(np.max(np.abs(a))) for a in arrays if np.size(a)])


# --------------------------------------------------------------------------
# raw arrays from a PointGeometry


def nonlinear_curvature(pg: PointGeometry) -> np.ndarray:
    """[r, k, l] = R^r_kl = δ_k G^r_l - δ_l G^r_k."""

    def f(pg):
        dN = pg.delta(pg.N_jet).value  # [r, l, k] = δ_k G^r_l
        return dN.transpose(0, 2, 1) - dN

    return _memo(pg, "Rnl", f)


def R_array(pg: PointGeometry) -> np.ndarray:
    def f(pg):
        G, C = pg.gamma, pg.C
        dG = pg.delta(pg.gamma_jet).value  # [i, j, l, k] = δ_k Γ*^i_jl
        return (
            dG.transpose(0, 1, 3, 2)
            - dG
            + _E("irk,rjl->ijkl", G, G)
            - _E("irl,rjk->ijkl", G, G)
            + _E("ijr,rkl->ijkl", C, nonlinear_curvature(pg))
        )

    return _memo(pg, "R", f)


def _p_terms(pg):
    def f(pg):
        gi = pg.ginv
        nT = pg.nabla_T  # [j, k, l, m]
        Tu = pg.C  # T^i_jk
        L = _E("ia,ajk->ijk", gi, pg.nabla0_T)  # ∇_0 T^i_jk
        first = _E("im,jklm->ijkl", gi, nT)  # ∇^i T_jkl
        second = _E("ia,aklj->ijkl", gi, nT)  # ∇_j T^i_kl
        a = _E("ikr,rjl->ijkl", Tu, L)  # T^i_kr ∇_0 T^r_jl
        b = _E("rkj,irl->ijkl", Tu, L)  # T^r_kj ∇_0 T^i_rl
        return first, second, a, b

    return _memo(pg, "pterms", f)


def P_array(pg: PointGeometry) -> np.ndarray:
    def f(pg):
        first, second, a, b = _p_terms(pg)
        return first - second + a - b

    return _memo(pg, "P", f)


def sP_array(pg: PointGeometry) -> np.ndarray:
    """Symmetric-in-(k, l) piece of P built from ∇^i T and the ∇_0 T terms."""

    def f(pg):
        first, _, a, b = _p_terms(pg)
        return first + 0.5 * (a - b + a.transpose(0, 1, 3, 2) - b.transpose(0, 1, 3, 2))

    return _memo(pg, "sP", f)


def P_commutator_array(pg: PointGeometry) -> np.ndarray:
    """P from Ω(δ_k, ∂̇_l)∂_j = ∇_δk ∇_∂̇l ∂_j - ∇_∂̇l ∇_δk ∂_j - ∇_[δk,∂̇l] ∂_j."""

    def f(pg):
        G, C, B = pg.gamma, pg.C, pg.B
        dC = pg.delta(pg.C_jet).value  # [i, j, l, k] = δ_k C^i_jl
        dvG = pg.gamma_jet.grad_v().value  # [i, j, k, l] = ∂̇_l Γ*^i_jk
        return (
            dC.transpose(0, 1, 3, 2)
            - dvG
            + _E("rjl,irk->ijkl", C, G)
            - _E("rjk,irl->ijkl", G, C)
            - _E("mkl,ijm->ijkl", B, C)
        )

    return _memo(pg, "Pc", f)


def Q_array(pg: PointGeometry) -> np.ndarray:
    def f(pg):
        Tu = pg.C
        return _E("irl,rjk->ijkl", Tu, Tu) - _E("irk,rjl->ijkl", Tu, Tu)

    return _memo(pg, "Q", f)


def Q_commutator_array(pg: PointGeometry) -> np.ndarray:
    def f(pg):
        C = pg.C
        dvC = pg.C_jet.grad_v().value  # [i, j, l, k] = ∂̇_k C^i_jl
        return dvC.transpose(0, 1, 3, 2) - dvC + _E("irk,rjl->ijkl", C, C) - _E("irl,rjk->ijkl", C, C)

    return _memo(pg, "Qc", f)


def nabla0_Q_array(pg: PointGeometry) -> np.ndarray:
    """∇_0 Q^i_jkl by differentiating the jet of Q along the horizontal frame."""

    def f(pg):
        from . import jets

        Tu = pg.C_jet
        Qj = jets.einsum("irl,rjk->ijkl", Tu, Tu) - jets.einsum("irk,rjl->ijkl", Tu, Tu)
        return pg.covariant_h(Qj, UP_DOWN3) @ pg.v

    return _memo(pg, "n0Q", f)


def H_array(pg: PointGeometry) -> np.ndarray:
    def f(pg):
        B = pg.B
        dB = pg.delta(pg.B_jet).value  # [i, j, l, k] = δ_k G^i_jl
        return dB.transpose(0, 1, 3, 2) - dB + _E("irk,rjl->ijkl", B, B) - _E("irl,rjk->ijkl", B, B)

    return _memo(pg, "H", f)


def eta_hh(g: np.ndarray, k: float) -> np.ndarray:
    """η^k on horizontal pairs: k (g_jl δ^i_k - g_jk δ^i_l)."""
    n = g.shape[0]
    I = np.eye(n)
    return k * (_E("jl,ik->ijkl", g, I) - _E("jk,il->ijkl", g, I))


# --------------------------------------------------------------------------
# public operations


def _geom(metric, z, order_v=4):
    return point_geometry(metric, z, order_v)


def hh_curvature_R(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    return TensorBlock(R_array(_geom(metric, z)), UP_DOWN3, "R")


def hv_curvature_P(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    return TensorBlock(P_array(_geom(metric, z)), UP_DOWN3, "P")


def split_P(metric: FinslerMetric, z: SupportElement) -> tuple[TensorBlock, TensorBlock]:
    """(ˢP, ᵃP) with ᵃP = P - ˢP.

    ˢP carries the ∇^i T term and the (k, l)-symmetrised ∇_0 T terms only;
    it satisfies ˢP^i_jkl v^j = 0 identically.
    """
    pg = _geom(metric, z)
    sP = sP_array(pg)
    return TensorBlock(sP, UP_DOWN3, "sP"), TensorBlock(P_array(pg) - sP, UP_DOWN3, "aP")


def vv_curvature_Q(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    return TensorBlock(Q_array(_geom(metric, z)), UP_DOWN3, "Q")


def berwald_hh_curvature_H(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    return TensorBlock(H_array(_geom(metric, z, 5)), UP_DOWN3, "H")


def curvature_operator_on(K: np.ndarray, X, Y, Z) -> np.ndarray:
    """K(X, Y)Z = K^i_jkl Z^j X^k Y^l."""
    return _E("ijkl,j,k,l->i", K, Z, X, Y)


def flag_curvature(metric: FinslerMetric, z: SupportElement, X, via: str = "R") -> float:
    """K(z, span(v, X)) = g(R(X,v)v, X) / (g(X,X)F² - g(X,v)²)."""
    order_v = 5 if via == "H" else 4
    pg = _geom(metric, z, order_v)
    K = H_array(pg) if via == "H" else R_array(pg)
    return _flag(pg, K, np.asarray(X, float))


def _flag(pg, K, X):
    g, v = pg.g, pg.v
    gxx = X @ g @ X
    gxv = X @ g @ v
    F2 = float(pg.F2.value)
    den = gxx * F2 - gxv * gxv
    if den <= 1e-12 * gxx * F2:
        raise DegenerateFlagError("flag is degenerate: X is parallel to v")
    num = curvature_operator_on(K, X, v, v) @ g @ X
    return float(num / den)


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    R: TensorBlock
    P: TensorBlock
    sP: TensorBlock
    aP: TensorBlock
    Q: TensorBlock
    H: TensorBlock
    nonlinear_curv: TensorBlock

    def invariant_residuals(self) -> dict:
        R, P, Q = self.R.entries, self.P.entries, self.Q.entries
        return {
            "R_plane_antisymmetry": float(np.max(np.abs(R + R.transpose(0, 1, 3, 2)))),
            "Q_plane_antisymmetry": float(np.max(np.abs(Q + Q.transpose(0, 1, 3, 2)))),
            "P_split": float(np.max(np.abs(P - self.sP.entries - self.aP.entries))),
        }


def curvature_bundle(metric: FinslerMetric, z: SupportElement) -> CurvatureBundle:
    pg = _geom(metric, z, 5)
    sP = sP_array(pg)
    P = P_array(pg)
    return CurvatureBundle(
        R=TensorBlock(R_array(pg), UP_DOWN3, "R"),
        P=TensorBlock(P, UP_DOWN3, "P"),
        sP=TensorBlock(sP, UP_DOWN3, "sP"),
        aP=TensorBlock(P - sP, UP_DOWN3, "aP"),
        Q=TensorBlock(Q_array(pg), UP_DOWN3, "Q"),
        H=TensorBlock(H_array(pg), UP_DOWN3, "H"),
        nonlinear_curv=TensorBlock(nonlinear_curvature(pg), ("up", "down", "down"), "R^r_kl"),
    )


@dataclass(frozen=True, eq=False)
class RelatedOperator:
    """Ω̄ = Ω - η^k on horizontal pairs (hh) and horizontal/vertical pairs (hv)."""

    k: float
    omega_bar_hh: TensorBlock
    omega_bar_hv: TensorBlock
    g: np.ndarray

    def antisymmetry_residual(self) -> float:
        """max |g(Ω̄(δ_a,δ_b)∂_c, ∂_d) + g(Ω̄(δ_a,δ_b)∂_d, ∂_c)|."""
        low = _E("im,mjkl->ijkl", self.g, self.omega_bar_hh.entries)
        return float(np.max(np.abs(low + low.transpose(1, 0, 2, 3))))


def related_operator(metric: FinslerMetric, z: SupportElement, k: float) -> RelatedOperator:
    if not k >= 0:
        raise ValueError(f"k must be non-negative, got {k!r}")
    pg = _geom(metric, z)
    hh = R_array(pg) - eta_hh(pg.g, k)
    return RelatedOperator(
        float(k),
        TensorBlock(hh, UP_DOWN3, "omega_bar_hh"),
        TensorBlock(sP_array(pg), UP_DOWN3, "omega_bar_hv"),
        pg.g,
    )


def omega_bar_hh(pg: PointGeometry, k: float) -> np.ndarray:
    return R_array(pg) - eta_hh(pg.g, k)


def bianchi_residual(metric: FinslerMetric, z: SupportElement) -> float:
    """Scaled residual of the first Bianchi identity on horizontal frame triples.

    σ R(δ_i, δ_j)∂_k = σ τ(δ_k, [δ_i, δ_j]) with [δ_i, δ_j] = -R^r_ij ∂̇_r and
    τ(δ_k, ∂̇_r) = -C^m_kr ∂_m; the torsion S(δ_i, δ_j) vanishes.
    """
    pg = _geom(metric, z)
    R = R_array(pg)
    Rnl = nonlinear_curvature(pg)
    C = pg.C
    lhs = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)  # [m, k, i, j] cyclic in (k, i, j)
    t = _E("mkr,rij->mkij", C, Rnl)
    rhs = t + t.transpose(0, 2, 3, 1) + t.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(lhs - rhs))) / scale(R)


def eta_residuals(metric: FinslerMetric, z: SupportElement, k: float) -> dict:
    """Cyclic sum of η^k on horizontal triples and its horizontal covariant derivative."""
    from . import jets

    pg = _geom(metric, z)
    eta = eta_hh(pg.g, k)
    cyc = eta + eta.transpose(0, 2, 3, 1) + eta.transpose(0, 3, 1, 2)
    n = pg.n
    g_jet = pg.g_jet
    I = np.eye(n)
    eta_jet = k * (
        jets.einsum("jl,ik->ijkl", g_jet, I) - jets.einsum("jk,il->ijkl", g_jet, I)
    )
    nab = pg.covariant_h(eta_jet, UP_DOWN3)
    s = scale(eta)
    return {"cyclic": float(np.max(np.abs(cyc))) / s, "covariant": float(np.max(np.abs(nab))) / s}


def berwald_identity_residual(metric: FinslerMetric, z: SupportElement, X) -> float:
    """‖H(X,v)v - R(X,v)v‖∞ / max(1, ‖R‖∞)."""
    pg = _geom(metric, z, 5)
    X = np.asarray(X, float)
    R, H = R_array(pg), H_array(pg)
    d = curvature_operator_on(H, X, pg.v, pg.v) - curvature_operator_on(R, X, pg.v, pg.v)
    return float(np.max(np.abs(d))) / scale(R)


def sP_v_residual(metric: FinslerMetric, z: SupportElement) -> float:
    """‖ˢP^i_jkl v^j‖∞ / max(1, ‖P‖∞)."""
    pg = _geom(metric, z)
    return float(np.max(np.abs(_E("ijkl,j->ikl", sP_array(pg), pg.v)))) / scale(P_array(pg))
