"""k-nullity spaces of the related curvature operator, computed two ways,
and the pointwise/regional checks built on them.

The argument space collects X with Ω̄(X, e_b)e_c = 0 for all b, c; the
kernel space collects Z with Ω̄(e_a, e_b)Z = 0 for all a, b. Both come from
the hh block of Ω̄ and a singular value decomposition with a relative cut.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from . import curvature as curv
from .connection import point_geometry
from .errors import PreconditionError
from .jets import SupportElement
from .metrics import FinslerMetric

RANK_TOL = 1e-8
GAP_MIN = 1e3
ANGLE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Subspace:
    """Numerical null space of a stacked linear system.

    ``basis`` columns are g-orthonormal. ``gap_ratio`` is σ_r/σ_{r+1} at the
    chosen rank r (1-based singular values), with σ_0 := scale and
    σ_{n+1} := threshold at the two ends.
    """

    basis: np.ndarray
    singular_values: tuple
    rank: int
    threshold: float
    gap_ratio: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambiguous(self) -> bool:
        return self.gap_ratio < GAP_MIN


def _g_orthonormal(B: np.ndarray, g: np.ndarray) -> np.ndarray:
    if B.shape[1] == 0:
        return B
    L = np.linalg.cholesky(B.T @ g @ B)
    return np.linalg.solve(L, B.T).T


def null_space(A: np.ndarray, g: np.ndarray, rank_tol: float = RANK_TOL) -> Subspace:
    n = A.shape[1]
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    s = np.concatenate([s, np.zeros(n - s.size)]) if s.size < n else s[:n]
    scale = max(float(s[0]) if n else 0.0, 1.0)
    thr = rank_tol * scale
    r = int(np.sum(s > thr))
    upper = scale if r == 0 else s[r - 1]
    lower = thr if r == n else s[r]
    gap = float(upper / lower) if lower > 0 else float("inf")
    basis = _g_orthonormal(vt[r:].T.copy(), g)
    return Subspace(basis, tuple(float(a) for a in s), r, float(thr), gap)


def argument_matrix(omega: np.ndarray) -> np.ndarray:
    """Rows (i, j, l), column k of Ω̄^i_jkl."""
    n = omega.shape[0]
    return omega.transpose(0, 1, 3, 2).reshape(n * n * n, n)


def kernel_matrix(omega: np.ndarray) -> np.ndarray:
    """Rows (i, k, l), column j of Ω̄^i_jkl."""
    n = omega.shape[0]
    return omega.transpose(0, 2, 3, 1).reshape(n * n * n, n)


def _omega(metric, z, k):
    if not k >= 0:
        raise ValueError(f"k must be non-negative, got {k!r}")
    pg = point_geometry(metric, z)
    return pg, curv.omega_bar_hh(pg, k)


def nullity_argument_space(metric: FinslerMetric, z: SupportElement, k: float, rank_tol: float = RANK_TOL) -> Subspace:
    pg, om = _omega(metric, z, k)
    return null_space(argument_matrix(om), pg.g, rank_tol)


def nullity_kernel_space(metric: FinslerMetric, z: SupportElement, k: float, rank_tol: float = RANK_TOL) -> Subspace:
    pg, om = _omega(metric, z, k)
    return null_space(kernel_matrix(om), pg.g, rank_tol)


def g_principal_angle(A: np.ndarray, B: np.ndarray, g: np.ndarray) -> float:
    """Largest principal angle between column spans in the g inner product."""
    if A.shape[1] == 0 and B.shape[1] == 0:
        return 0.0
    if A.shape[1] == 0 or B.shape[1] == 0:
        return float(np.pi / 2)
    L = np.linalg.cholesky(g)
    return float(np.max(subspace_angles(L.T @ A, L.T @ B)))


@dataclass(frozen=True, eq=False)
class NullityReport:
    k: float
    z: SupportElement
    arg: Subspace
    ker: Subspace
    g: np.ndarray

    @property
    def basis_arg(self) -> np.ndarray:
        return self.arg.basis

    @property
    def basis_ker(self) -> np.ndarray:
        return self.ker.basis

    @property
    def mu_k(self) -> int:
        return self.ker.dim

    @property
    def singular_values(self) -> tuple:
        return self.ker.singular_values

    @property
    def gap_ratio(self) -> float:
        return min(self.arg.gap_ratio, self.ker.gap_ratio)

    @property
    def ambiguous(self) -> bool:
        return self.arg.ambiguous or self.ker.ambiguous

    @property
    def boundary_case(self) -> bool:
        """μ_k ∈ {0, n}: outside the 0 < μ_k < n standing hypothesis."""
        return self.mu_k in (0, self.g.shape[0])

    @property
    def principal_angle(self) -> float:
        return g_principal_angle(self.arg.basis, self.ker.basis, self.g)

    def orthonormality_residual(self) -> float:
        out = 0.0
        for B in (self.arg.basis, self.ker.basis):
            if B.shape[1]:
                out = max(out, float(np.max(np.abs(B.T @ self.g @ B - np.eye(B.shape[1])))))
        return out


def nullity_report(metric: FinslerMetric, z: SupportElement, k: float, rank_tol: float = RANK_TOL) -> NullityReport:
    pg, om = _omega(metric, z, k)
    return NullityReport(
        float(k),
        z,
        null_space(argument_matrix(om), pg.g, rank_tol),
        null_space(kernel_matrix(om), pg.g, rank_tol),
        pg.g,
    )


@dataclass(frozen=True)
class NullityIndex:
    mu_k: Optional[int]
    consistent: bool
    dims: tuple
    gap_ratios: tuple
    max_angle: float
    ambiguous: bool


def nullity_index(
    metric: FinslerMetric, x, k: float, v_samples: Sequence, rank_tol: float = RANK_TOL
) -> NullityIndex:
    """μ_k at x from the kernel space at (x, v) for every sampled v.

    ``max_angle`` compares each per-v subspace with the first one in the
    coordinate inner product (the g's differ between samples).
    """
    if len(v_samples) == 0:
        raise ValueError("v_samples must be nonempty")
    subs = [nullity_kernel_space(metric, SupportElement.of(x, v), k, rank_tol) for v in v_samples]
    dims = tuple(s.dim for s in subs)
    consistent = len(set(dims)) == 1
    I = np.eye(metric.n)
    angle = 0.0
    if consistent:
        angle = max(g_principal_angle(subs[0].basis, s.basis, I) for s in subs)
    return NullityIndex(
        dims[0] if consistent else None,
        consistent,
        dims,
        tuple(s.gap_ratio for s in subs),
        float(angle),
        any(s.ambiguous for s in subs),
    )


@dataclass(frozen=True)
class CoincidenceResult:
    applicable: bool
    passed: bool
    angle: float
    dim_arg: int
    dim_ker: int
    gap_ratio: float
    spectrum_arg: tuple
    spectrum_ker: tuple


def kernel_coincidence_check(metric: FinslerMetric, z: SupportElement, k: float, rank_tol: float = RANK_TOL) -> CoincidenceResult:
    """Argument space vs kernel space. Not applicable when either rank is ambiguous."""
    rep = nullity_report(metric, z, k, rank_tol)
    same = rep.arg.dim == rep.ker.dim
    angle = rep.principal_angle if same else float(np.pi / 2)
    return CoincidenceResult(
        applicable=not rep.ambiguous,
        passed=same and angle < ANGLE_TOL,
        angle=angle,
        dim_arg=rep.arg.dim,
        dim_ker=rep.ker.dim,
        gap_ratio=rep.gap_ratio,
        spectrum_arg=rep.arg.singular_values,
        spectrum_ker=rep.ker.singular_values,
    )


# --------------------------------------------------------------------------
# involutivity


def default_reference_v(n: int) -> np.ndarray:
    return np.array([1.0 / (i + 1) for i in range(n)])


def _projector(sub: Subspace, g: np.ndarray) -> np.ndarray:
    B = sub.basis
    return B @ B.T @ g


def _frame(metric, x, k, v_ref, refs, rank_tol):
    z = SupportElement.of(x, v_ref)
    sub = nullity_kernel_space(metric, z, k, rank_tol)
    g = point_geometry(metric, z).g
    Pj = _projector(sub, g)[:, refs]
    return sub, g, Pj


@dataclass(frozen=True)
class InvolutivityResult:
    residual: float
    mu_k: int
    max_bracket: float
    max_normal: float
    points: int
    per_point: tuple = field(default=(), repr=False)


def involutivity_check(
    metric: FinslerMetric,
    x_region: Sequence,
    k: float,
    fd_step: float = 1e-4,
    v_ref=None,
    rank_tol: float = RANK_TOL,
    bracket_floor: float = 1e-6,
    min_frame_sv: float = 1e-3,
) -> InvolutivityResult:
    """Max over grid points and frame pairs of ‖[X_α, X_β]^⊥‖ / ‖[X_α, X_β]‖.

    The frame is the g-projection of fixed coordinate vectors onto 𝒩^k_x,
    orthonormalised by Cholesky. Brackets with g-norm below ``bracket_floor``
    count as zero (they sit at the finite-difference noise level).
    """
    pts = [np.asarray(p, float) for p in x_region]
    if not pts:
        raise ValueError("x_region must be nonempty")
    n = metric.n
    v_ref = default_reference_v(n) if v_ref is None else np.asarray(v_ref, float)
    z0 = SupportElement.of(pts[0], v_ref)
    sub0 = nullity_kernel_space(metric, z0, k, rank_tol)
    mu = sub0.dim
    for p in pts:
        s = nullity_kernel_space(metric, SupportElement.of(p, v_ref), k, rank_tol)
        if s.dim != mu:
            raise PreconditionError(f"mu_k is not constant on the region: {mu} vs {s.dim} at x={p.tolist()}")
    if mu < 2:
        return InvolutivityResult(0.0, mu, 0.0, 0.0, len(pts))
    # fixed references: coordinate vectors with the largest projected volume at the first point
    P0 = _projector(sub0, point_geometry(metric, z0).g)
    order = np.argsort(-np.linalg.norm(P0, axis=0), kind="stable")
    refs = sorted(int(i) for i in order[:mu])

    def frame_at(x):
        sub, g, Pj = _frame(metric, x, k, v_ref, refs, rank_tol)
        if sub.dim != mu:
            raise PreconditionError(f"mu_k changes within fd_step of x={x.tolist()}")
        sv = np.linalg.svd(Pj, compute_uv=False)
        if sv[-1] < min_frame_sv:
            raise PreconditionError("projected reference vectors are nearly dependent")
        return _g_orthonormal(Pj, g), sub, g

    worst = best_b = best_n = 0.0
    per = []
    for p in pts:
        X, sub, g = frame_at(p)
        dX = np.empty((n, n, mu))  # [i, j, a] = ∂_j X_a^i
        for j in range(n):
            e = np.zeros(n)
            e[j] = fd_step
            dX[:, j, :] = (frame_at(p + e)[0] - frame_at(p - e)[0]) / (2 * fd_step)
        Pperp = np.eye(n) - _projector(sub, g)
        local = 0.0
        for a in range(mu):
            for b in range(a + 1, mu):
                br = dX[:, :, b] @ X[:, a] - dX[:, :, a] @ X[:, b]
                nb = float(np.sqrt(br @ g @ br))
                perp = Pperp @ br
                nperp = float(np.sqrt(max(perp @ g @ perp, 0.0)))
                best_b, best_n = max(best_b, nb), max(best_n, nperp)
                if nb > bracket_floor:
                    local = max(local, nperp / nb)
        per.append(local)
        worst = max(worst, local)
    return InvolutivityResult(worst, mu, best_b, best_n, len(pts), tuple(per))


def grid(center, half_width: float, count: int, dims: Optional[Sequence[int]] = None) -> list:
    """Regular count×count grid in two coordinate directions around center."""
    c = np.asarray(center, float)
    dims = (0, 1) if dims is None else tuple(dims)
    ticks = np.linspace(-half_width, half_width, count)
    out = []
    for a in ticks:
        for b in ticks:
            p = c.copy()
            p[dims[0]] += a
            p[dims[1]] += b
            out.append(p)
    return out


# --------------------------------------------------------------------------
# P-symmetry and leaf flag curvature


@dataclass(frozen=True)
class PSymmetryResult:
    P_symmetric: bool
    nabla_v_Q_zero: bool
    residual_P: float
    residual_Q: float
    scale: float

    @property
    def agree(self) -> bool:
        return self.P_symmetric == self.nabla_v_Q_zero


def p_symmetry_check(metric: FinslerMetric, z: SupportElement, tol: float = 1e-7) -> PSymmetryResult:
    pg = point_geometry(metric, z)
    P = curv.P_array(pg)
    nQ = curv.nabla0_Q_array(pg)
    s = curv.scale(P, nQ)
    rp = float(np.max(np.abs(P - P.transpose(0, 1, 3, 2))))
    rq = float(np.max(np.abs(nQ)))
    return PSymmetryResult(rp < tol * s, rq < tol * s, rp, rq, s)


@dataclass(frozen=True)
class LeafFlagResult:
    status: str  # "pass" | "fail" | "not_applicable"
    K: Optional[float]
    deviation: Optional[float]
    mu_k: int


def leaf_flag_curvature_check(
    metric: FinslerMetric, z: SupportElement, k: float, X=None, tol: float = 1e-5, rank_tol: float = RANK_TOL
) -> LeafFlagResult:
    """Flag curvature of (v, X) inside 𝒩^k; X defaults to a nullity vector g-orthogonal to v."""
    sub = nullity_kernel_space(metric, z, k, rank_tol)
    mu = sub.dim
    if mu < 2:
        return LeafFlagResult("not_applicable", None, None, mu)
    pg = point_geometry(metric, z)
    g, v = pg.g, pg.v
    Pr = _projector(sub, g)
    if np.linalg.norm(v - Pr @ v) > 1e-8 * np.linalg.norm(v):
        raise PreconditionError("v is not a k-nullity vector")
    if X is None:
        B = sub.basis
        w = B - np.outer(v, v @ g @ B) / (v @ g @ v)
        X = w[:, int(np.argmax(np.linalg.norm(w, axis=0)))]
    X = np.asarray(X, float)
    if np.linalg.norm(X - Pr @ X) > 1e-8 * np.linalg.norm(X):
        raise PreconditionError("X is not a k-nullity vector")
    K = curv.flag_curvature(metric, z, X)
    dev = abs(K - k)
    return LeafFlagResult("pass" if dev < tol else "fail", K, dev, mu)
