"""Fundamental tensor, Cartan tensor, spray, nonlinear connection, and the
Berwald and Cartan connection coefficients at a support element.

Index convention (used by every tensor in the package)
------------------------------------------------------
Arrays are indexed in the order the indices are written, upper indices
first: ``g[i, j] = g_ij``, ``T[i, j, k] = T_ijk``, ``gamma[i, j, k] =
Γ*^i_jk``, ``C[i, j, k] = C^i_jk``, ``N[i, j] = G^i_j``, ``B[i, j, k] =
G^i_jk``. Connection coefficients act as ``∇_{δ_k} ∂_j = Γ*^i_jk ∂_i`` and
``∇_{∂̇_k} ∂_j = C^i_jk ∂_i``.

Curvature blocks ``K[i, j, k, l] = K^i_jkl`` are defined by
``Ω(X_k, Y_l) ∂_j = K^i_jkl ∂_i`` where the form slots (k, l) are
horizontal/horizontal for R and H, horizontal/vertical for P and
vertical/vertical for Q. Slot j is the acted-on slot.

The horizontal frame is δ_j = ∂_j - G^k_j ∂̇_k with the Berwald nonlinear
connection G^k_j = ∂̇_j G^k; its brackets are
``[δ_k, δ_l] = -R^r_kl ∂̇_r`` with ``R^r_kl = δ_k G^r_l - δ_l G^r_k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import jets
from .errors import DomainError
from .jets import Jet, SupportElement
from .metrics import FinslerMetric


@dataclass(frozen=True, eq=False)
class TensorBlock:
    """Dense tensor with one 'up'/'down' tag per slot (see module docstring)."""

    entries: np.ndarray
    variance: tuple
    name: str = ""

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != len(self.variance):
            raise ValueError(f"{a.ndim}-slot array with {len(self.variance)} variance tags")
        if any(t not in ("up", "down") for t in self.variance):
            raise ValueError("variance tags must be 'up' or 'down'")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "variance", tuple(self.variance))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def shape(self):
        return self.entries.shape

    def norm(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0


def _tb(a, variance, name):
    return TensorBlock(np.asarray(a), variance, name)


def delta(A: Jet, N: Jet) -> Jet:
    """Horizontal derivative δ_k A appended as a trailing index."""
    r = A.ndim
    lead = "abcdefgh"[:r]
    dv = A.grad_v()
    corr = jets.einsum(f"{lead}m,mk->{lead}k", dv, N)
    return A.grad_x() - corr


class PointGeometry:
    """Jet bundle of the metric at one support element.

    ``order_v`` = 4 is enough for the Cartan curvatures; 5 is needed for the
    Berwald curvature H. ``order_x`` = 1, ``order_v`` = 3 suffices for the
    values of g, spray, N, B and Γ* (no curvature).
    """

    def __init__(self, metric: FinslerMetric, z: SupportElement, order_v: int = 4, order_x: int = 2):
        metric.check(z)
        self.metric = metric
        self.z = z
        self.n = z.n
        self.order_v = order_v
        self.F2 = jets.taylor_jet(metric.F2, z, order_x, order_v)
        sp = self.F2.space
        self._xj, self._vj = Jet.variables(sp, z.xa, z.va)

    # -- jets
    @cached_property
    def g_jet(self) -> Jet:
        return 0.5 * self.F2.grad_v().grad_v()

    @cached_property
    def ginv_jet(self) -> Jet:
        g0 = self.g_jet.value
        lam = np.linalg.eigvalsh(g0)
        if lam[0] <= 1e-14 * max(1.0, abs(lam[-1])):
            raise DomainError(f"fundamental tensor is not positive definite at z (min eig {lam[0]:.3g})")
        return jets.inv(self.g_jet)

    @cached_property
    def T_jet(self) -> Jet:
        return 0.5 * self.g_jet.grad_v()

    @cached_property
    def C_jet(self) -> Jet:
        return jets.einsum("il,ljk->ijk", self.ginv_jet, self.T_jet)

    @cached_property
    def spray_jet(self) -> Jet:
        mixed = self.F2.grad_x().grad_v()  # [k, l] = d_xk d_vl F^2
        w = jets.einsum("k,kl->l", self._vj, mixed) - self.F2.grad_x()
        return 0.25 * jets.einsum("il,l->i", self.ginv_jet, w)

    @cached_property
    def N_jet(self) -> Jet:
        return self.spray_jet.grad_v()

    @cached_property
    def B_jet(self) -> Jet:
        return self.N_jet.grad_v()

    def delta(self, A: Jet) -> Jet:
        return delta(A, self.N_jet)

    @cached_property
    def dg_jet(self) -> Jet:
        return self.delta(self.g_jet)  # [l, k, j] = δ_j g_lk

    @cached_property
    def gamma_jet(self) -> Jet:
        dg = self.dg_jet
        # S[l, j, k] = δ_j g_lk + δ_k g_jl - δ_l g_jk
        S = dg.transpose(0, 2, 1) + dg.transpose(1, 0, 2) - dg.transpose(2, 0, 1)
        return 0.5 * jets.einsum("il,ljk->ijk", self.ginv_jet, S)

    # -- values
    @cached_property
    def v(self) -> np.ndarray:
        return self.z.va

    @cached_property
    def g(self) -> np.ndarray:
        return self.g_jet.value

    @cached_property
    def ginv(self) -> np.ndarray:
        return self.ginv_jet.value

    @cached_property
    def T(self) -> np.ndarray:
        return self.T_jet.value

    @cached_property
    def C(self) -> np.ndarray:
        return self.C_jet.value

    @cached_property
    def spray(self) -> np.ndarray:
        return self.spray_jet.value

    @cached_property
    def N(self) -> np.ndarray:
        return self.N_jet.value

    @cached_property
    def B(self) -> np.ndarray:
        return self.B_jet.value

    @cached_property
    def gamma(self) -> np.ndarray:
        return self.gamma_jet.value

    @cached_property
    def F(self) -> float:
        return float(np.sqrt(self.F2.value))

    def covariant_h(self, A: Jet, variance) -> np.ndarray:
        """Horizontal Cartan covariant derivative ∇_m A, m appended last."""
        out = self.delta(A).value
        a = A.value
        G = self.gamma
        r = a.ndim
        letters = "abcdefgh"[:r]
        for s, tag in enumerate(variance):
            src = letters[:s] + "r" + letters[s + 1 :]
            if tag == "up":
                out = out + np.einsum(f"{letters[s]}rm,{src}->{letters}m", G, a)
            else:
                out = out - np.einsum(f"r{letters[s]}m,{src}->{letters}m", G, a)
        return out

    @cached_property
    def nabla_T(self) -> np.ndarray:
        """Horizontal covariant derivative, [j, k, l, m] = ∇_m T_jkl."""
        return self.covariant_h(self.T_jet, ("down", "down", "down"))

    @cached_property
    def nabla0_T(self) -> np.ndarray:
        """[j, k, l] = ∇_0 T_jkl = v^m ∇_m T_jkl."""
        return self.nabla_T @ self.v

    def metric_compatibility_residual(self) -> float:
        """max |δ_k g_ij - Γ*^l_ik g_lj - Γ*^l_jk g_il|."""
        dg = self.dg_jet.value  # [i, j, k]
        G, g = self.gamma, self.g
        res = dg - np.einsum("lik,lj->ijk", G, g) - np.einsum("ljk,il->ijk", G, g)
        return float(np.max(np.abs(res)))


@lru_cache(maxsize=256)
def point_geometry(metric: FinslerMetric, z: SupportElement, order_v: int = 4) -> PointGeometry:
    return PointGeometry(metric, z, order_v)


# --------------------------------------------------------------------------
# public operations


@dataclass(frozen=True, eq=False)
class ConnectionData:
    g: TensorBlock
    g_inv: TensorBlock
    T: TensorBlock
    spray: TensorBlock
    nonlinear: TensorBlock
    berwald: TensorBlock
    cartan_h: TensorBlock
    cartan_v: TensorBlock

    def residuals(self, v) -> dict:
        """Structural identities of the bundle; all should be ~0."""
        g, gi = self.g.entries, self.g_inv.entries
        T = self.T.entries
        n = g.shape[0]
        return {
            "g_ginv_identity": float(np.max(np.abs(g @ gi - np.eye(n)))),
            "T_dot_v": float(np.max(np.abs(T @ v))),
            "T_symmetry": float(
                max(np.max(np.abs(T - T.transpose(1, 0, 2))), np.max(np.abs(T - T.transpose(0, 2, 1))))
            ),
            "gamma_symmetry": float(np.max(np.abs(self.cartan_h.entries - self.cartan_h.entries.transpose(0, 2, 1)))),
            "euler_nonlinear": float(np.max(np.abs(self.nonlinear.entries @ v - 2 * self.spray.entries))),
        }


def metric_tensor(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    return _tb(point_geometry(metric, z).g, ("down", "down"), "g")


def cartan_tensor(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    """T_ijk = ½ ∂̇_k g_ij."""
    return _tb(point_geometry(metric, z).T, ("down", "down", "down"), "T")


def geodesic_spray(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    return _tb(point_geometry(metric, z).spray, ("up",), "G")


def nonlinear_connection(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    return _tb(point_geometry(metric, z).N, ("up", "down"), "N")


def horizontal_frame(metric: FinslerMetric, z: SupportElement) -> np.ndarray:
    """Row j holds the (∂_x, ∂_v) components of δ_j: (e_j, -G^k_j)."""
    N = point_geometry(metric, z).N
    n = N.shape[0]
    return np.hstack([np.eye(n), -N.T])


def berwald_coefficients(metric: FinslerMetric, z: SupportElement) -> TensorBlock:
    return _tb(point_geometry(metric, z).B, ("up", "down", "down"), "G^i_jk")


def cartan_coefficients(metric: FinslerMetric, z: SupportElement) -> tuple[TensorBlock, TensorBlock]:
    pg = point_geometry(metric, z)
    return (
        _tb(pg.gamma, ("up", "down", "down"), "Gamma*"),
        _tb(pg.C, ("up", "down", "down"), "C"),
    )


def connection_data(metric: FinslerMetric, z: SupportElement) -> ConnectionData:
    pg = point_geometry(metric, z)
    return ConnectionData(
        g=_tb(pg.g, ("down", "down"), "g"),
        g_inv=_tb(pg.ginv, ("up", "up"), "g_inv"),
        T=_tb(pg.T, ("down", "down", "down"), "T"),
        spray=_tb(pg.spray, ("up",), "G"),
        nonlinear=_tb(pg.N, ("up", "down"), "N"),
        berwald=_tb(pg.B, ("up", "down", "down"), "G^i_jk"),
        cartan_h=_tb(pg.gamma, ("up", "down", "down"), "Gamma*"),
        cartan_v=_tb(pg.C, ("up", "down", "down"), "C"),
    )


def berwald_cartan_residual(metric: FinslerMetric, z: SupportElement) -> float:
    """max |G^i_jk - Γ*^i_jk - ∇_0 T^i_jk|, the Berwald/Cartan relation."""
    pg = point_geometry(metric, z)
    n0T = np.einsum("ia,ajk->ijk", pg.ginv, pg.nabla0_T)
    return float(np.max(np.abs(pg.B - pg.gamma - n0T)))


def cartan_gamma_value(metric: FinslerMetric, x, v) -> np.ndarray:
    """Γ*^i_jk(x, v) from the smallest jet that determines it."""
    return PointGeometry(metric, SupportElement.of(x, v), order_v=3, order_x=1).gamma


def spray_value(metric: FinslerMetric, x, v) -> np.ndarray:
    """Spray coefficients G^i(x, v) with a minimal jet (used by the integrator)."""
    z = SupportElement.of(x, v)
    metric.check(z)
    F2 = jets.taylor_jet(metric.F2, z, 1, 2)
    g = 0.5 * F2.grad_v().grad_v().value
    mixed = F2.grad_x().grad_v().value
    w = mixed.T @ z.va - F2.grad_x().value
    return 0.25 * np.linalg.solve(g, w)
