"""The invariant battery run by ``suite``: pointwise identities at seeded
support elements plus the regional nullity, confinement and extendability
checks.

Every check is a flat record with the residual, the tolerance it was judged
against and the reference it was compared with. Status is one of ``pass``,
``fail``, ``not_applicable`` (precondition not met) or ``info`` (observed
only, never a failure).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import curvature as curv
from . import geodesics as geo
from . import jets
from . import nullity as nul
from . import oracles
from .connection import berwald_cartan_residual, point_geometry
from .errors import FinslerError, PreconditionError
from .jets import SupportElement
from .metrics import FinslerMetric, validate_metric
from .sampling import sample_flag, sample_support_elements, sample_vector

TOLERANCES = {
    "jet_vs_fd": 1e-5,
    "riemannian_P_Q_zero": 1e-8,
    "christoffel_oracle": 1e-7,
    "riemann_oracle": 1e-7,
    "metric_compatibility": 1e-9,
    "berwald_cartan_relation": 1e-9,
    "R_plane_antisymmetry": 1e-7,
    "bianchi_horizontal": 1e-5,
    "H_vs_R_on_v": 1e-6,
    "sP_v_contraction": 1e-7,
    "P_commutator": 1e-6,
    "Q_commutator": 1e-7,
    "p_symmetry": 1e-7,
    "omega_bar_antisymmetry": 1e-7,
    "eta_cyclic": 1e-7,
    "eta_parallel": 1e-7,
    "kernel_coincidence": nul.ANGLE_TOL,
    "involutivity": 1e-4,
    "leaf_confinement": 1e-6,
    "leaf_confinement_control": 1e-2,
    "leaf_flag_curvature": 1e-5,
    "extendability": 1e-5,
    "energy_conservation": 1e-7,
    "transport_gram": 1e-7,
}


@dataclass(frozen=True)
class SuiteConfig:
    ks: tuple = (0.0, 0.5, 1.0)
    seed: int = 0
    points: int = 4
    grid_count: int = 5
    grid_half_width: float = 0.1
    fd_step: float = 1e-4
    t_confine: float = 20.0
    t_max: float = 100.0
    rel_tol: float = 1e-10
    max_checks: int = 100
    threads: int = 1


def record(name, status, residual=None, tolerance=None, oracle=None, **extra) -> dict:
    out = {"name": name, "status": status, "residual": residual, "tolerance": tolerance, "oracle": oracle}
    out.update(extra)
    return out


def judged(name, residual, oracle, tol=None, **extra) -> dict:
    tol = TOLERANCES[name] if tol is None else tol
    return record(name, "pass" if residual < tol else "fail", float(residual), tol, oracle, **extra)


def pmap(fn: Callable, items: Sequence, threads: int) -> list:
    """Ordered parallel map; results come back in input order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(a) for a in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# pointwise


def point_checks(metric: FinslerMetric, z: SupportElement, X: np.ndarray, ks: Sequence[float], index: int) -> list:
    pg = point_geometry(metric, z, 5)
    at = {"point": index}
    out = []
    out.append(
        judged("jet_vs_fd", jets.jet_fd_disagreement(metric.F2, z, 3, domain=metric.in_domain), "finite differences", **at)
    )
    R, P, Q = curv.R_array(pg), curv.P_array(pg), curv.Q_array(pg)
    if metric.is_riemannian:
        out.append(judged("riemannian_P_Q_zero", max(np.abs(P).max(), np.abs(Q).max()), "T = 0", **at))
        out.append(
            judged("christoffel_oracle", np.abs(pg.gamma - oracles.christoffel(metric, z.xa)).max(), "closed form", **at)
        )
        out.append(
            judged(
                "riemann_oracle",
                np.abs(R - oracles.riemann(metric, z.xa)).max() / curv.scale(R),
                "closed-form space form",
                **at,
            )
        )
    out.append(judged("metric_compatibility", pg.metric_compatibility_residual() / curv.scale(pg.g), "∇g = 0", **at))
    out.append(
        judged("berwald_cartan_relation", berwald_cartan_residual(metric, z) / curv.scale(pg.B), "B = Γ* + ∇₀T", **at)
    )
    out.append(
        judged("R_plane_antisymmetry", np.abs(R + R.transpose(0, 1, 3, 2)).max() / curv.scale(R), "identity", **at)
    )
    out.append(judged("bianchi_horizontal", curv.bianchi_residual(metric, z), "torsion terms", **at))
    out.append(judged("H_vs_R_on_v", curv.berwald_identity_residual(metric, z, X), "Berwald pipeline", **at))
    out.append(judged("sP_v_contraction", curv.sP_v_residual(metric, z), "identity", **at))
    Pc, Qc = curv.P_commutator_array(pg), curv.Q_commutator_array(pg)
    out.append(judged("P_commutator", np.abs(P - Pc).max() / curv.scale(P), "commutator of ∇", **at))
    out.append(judged("Q_commutator", np.abs(Q - Qc).max() / curv.scale(Q), "commutator of ∇", **at))
    ps = nul.p_symmetry_check(metric, z, TOLERANCES["p_symmetry"])
    out.append(
        record(
            "p_symmetry",
            "pass" if ps.agree else "fail",
            max(ps.residual_P, ps.residual_Q) / ps.scale,
            TOLERANCES["p_symmetry"],
            "∇₀Q",
            P_symmetric=ps.P_symmetric,
            nabla_v_Q_zero=ps.nabla_v_Q_zero,
            residual_P=ps.residual_P,
            residual_Q=ps.residual_Q,
            **at,
        )
    )
    for k in ks:
        kk = {"point": index, "k": k}
        op = curv.related_operator(metric, z, k)
        out.append(
            judged(
                "omega_bar_antisymmetry",
                op.antisymmetry_residual() / curv.scale(op.omega_bar_hh.entries),
                "identity",
                **kk,
            )
        )
        eta = curv.eta_residuals(metric, z, k)
        out.append(judged("eta_cyclic", eta["cyclic"], "identity", **kk))
        out.append(judged("eta_parallel", eta["covariant"], "∇g = 0", **kk))
        cc = nul.kernel_coincidence_check(metric, z, k)
        extra = dict(kk, dim_arg=cc.dim_arg, dim_ker=cc.dim_ker, gap_ratio=cc.gap_ratio)
        if not cc.applicable:
            out.append(record("kernel_coincidence", "not_applicable", cc.angle, nul.ANGLE_TOL, "argument space", **extra))
        else:
            status = "pass" if cc.passed else "fail"
            out.append(record("kernel_coincidence", status, cc.angle, nul.ANGLE_TOL, "argument space", **extra))
    return out


# --------------------------------------------------------------------------
# regional


def _leaf_start(metric, z, k):
    """(μ_k, unit-speed start in 𝒩^k or None, mixed start or None) at z.x."""
    sub = nul.nullity_kernel_space(metric, z, k)
    mu = sub.dim
    if mu == 0 or sub.ambiguous:
        return mu, None, None
    g = point_geometry(metric, z).g
    v = sub.basis[:, 0]
    mixed = None
    if mu < metric.n:
        comp = np.eye(metric.n) - sub.basis @ sub.basis.T @ g
        j = int(np.argmax(np.linalg.norm(comp, axis=0)))
        w = comp[:, j] / np.sqrt(comp[:, j] @ g @ comp[:, j])
        mixed = (v + w) / np.sqrt(2.0)
    return mu, v, mixed


def regional_checks(metric: FinslerMetric, z0: SupportElement, k: float, cfg: SuiteConfig, rng_vs) -> list:
    kk = {"k": k}
    out = []
    x0 = z0.xa
    idx = nul.nullity_index(metric, x0, k, rng_vs)
    out.append(
        record(
            "nullity_index",
            "info",
            idx.max_angle,
            None,
            "per-v kernels",
            mu_k=idx.mu_k,
            consistent=idx.consistent,
            dims=list(idx.dims),
            boundary_case=idx.mu_k in (0, metric.n),
            **kk,
        )
    )
    # involutivity
    pts = nul.grid(x0, cfg.grid_half_width, cfg.grid_count)
    if not all(metric.in_domain(p) for p in pts):
        out.append(record("involutivity", "not_applicable", None, TOLERANCES["involutivity"], "Lie bracket", reason="grid leaves domain", **kk))
    else:
        try:
            inv = nul.involutivity_check(metric, pts, k, cfg.fd_step)
            out.append(judged("involutivity", inv.residual, "Lie bracket", mu_k=inv.mu_k, max_bracket=inv.max_bracket, **kk))
        except PreconditionError as e:
            out.append(record("involutivity", "not_applicable", None, TOLERANCES["involutivity"], "Lie bracket", reason=str(e), **kk))

    mu, v, mixed = _leaf_start(metric, z0, k)
    names = ("leaf_confinement", "leaf_confinement_control", "leaf_flag_curvature", "extendability")
    if v is None:
        for nm in names:
            out.append(record(nm, "not_applicable", None, TOLERANCES[nm], None, reason=f"mu_k = {mu}", **kk))
        return out
    zl = SupportElement.of(x0, v)
    try:
        tg = geo.totally_geodesic_check(metric, zl, k, cfg.t_confine, cfg.rel_tol, max_checks=cfg.max_checks)
        out.append(judged("leaf_confinement", tg.max_deviation, "pointwise 𝒩^k", mu_k=mu, t_end=cfg.t_confine, **kk))
    except (PreconditionError, FinslerError) as e:
        out.append(record("leaf_confinement", "not_applicable", None, TOLERANCES["leaf_confinement"], None, reason=str(e), **kk))
    if mixed is None:
        out.append(record("leaf_confinement_control", "not_applicable", None, TOLERANCES["leaf_confinement_control"], None, reason="full-space distribution", **kk))
    else:
        ctl = geo.totally_geodesic_check(
            metric, SupportElement.of(x0, mixed), k, cfg.t_confine, cfg.rel_tol, diagnostic=True, max_checks=cfg.max_checks
        )
        tol = TOLERANCES["leaf_confinement_control"]
        out.append(
            record("leaf_confinement_control", "pass" if ctl.max_deviation > tol else "fail", ctl.max_deviation, tol, "expected > tolerance", **kk)
        )
    lf = nul.leaf_flag_curvature_check(metric, zl, k)
    if lf.status == "not_applicable":
        out.append(record("leaf_flag_curvature", "not_applicable", None, TOLERANCES["leaf_flag_curvature"], None, reason=f"mu_k = {lf.mu_k}", **kk))
    else:
        out.append(record("leaf_flag_curvature", lf.status, lf.deviation, TOLERANCES["leaf_flag_curvature"], "k", K=lf.K, **kk))
    if not metric.complete:
        out.append(record("extendability", "not_applicable", None, TOLERANCES["extendability"], None, reason="metric not declared complete", **kk))
    else:
        ep = geo.extendability_probe(metric, zl, k, cfg.t_max, cfg.rel_tol, max_checks=cfg.max_checks)
        out.append(
            record(
                "extendability",
                "pass" if ep.passed else "fail",
                ep.max_confinement,
                TOLERANCES["extendability"],
                "pointwise 𝒩^k",
                t_reached=ep.t_reached,
                domain_exit=ep.domain_exit,
                energy_drift=ep.energy_drift,
                **kk,
            )
        )
    return out


def geodesic_checks(metric: FinslerMetric, z: SupportElement) -> list:
    out = []
    tr = geo.integrate_geodesic(metric, z, 10.0, 1e-9)
    out.append(judged("energy_conservation", tr.energy_drift(), "F constant", t_end=tr.t_end, domain_exit=tr.domain_exit))
    short = geo.integrate_geodesic(metric, z, 2.0, 1e-10)
    X0 = np.eye(metric.n)[:, :2]
    tp = geo.parallel_transport(metric, short, X0, 1e-10)
    out.append(judged("transport_gram", tp.gram_drift(metric), "∇g = 0", t_end=short.t_end))
    return out


def run_suite(metric: FinslerMetric, cfg: SuiteConfig) -> dict:
    rng = np.random.default_rng(cfg.seed)
    zs = sample_support_elements(metric, cfg.points, rng)
    Xs = [sample_flag(z, rng) for z in zs]
    vs = [sample_vector(metric.n, rng) for _ in range(3)]
    checks = []
    val = validate_metric(metric, zs)
    checks.append(
        record(
            "metric_validation",
            "pass" if val.passed else "fail",
            val.max_homogeneity_residual,
            val.tolerance,
            "positivity, homogeneity, convexity",
            min_eig_g=val.min_eig_g,
        )
    )
    per_point = pmap(lambda a: point_checks(metric, a[0], a[1], cfg.ks, a[2]), list(zip(zs, Xs, range(len(zs)))), cfg.threads)
    for block in per_point:
        checks.extend(block)
    per_k = pmap(lambda k: regional_checks(metric, zs[0], k, cfg, vs), list(cfg.ks), cfg.threads)
    for block in per_k:
        checks.extend(block)
    checks.extend(geodesic_checks(metric, zs[0]))
    counts = {s: sum(c["status"] == s for c in checks) for s in ("pass", "fail", "not_applicable", "info")}
    return {
        "config": {k: v for k, v in asdict(cfg).items() if k != "threads"},
        "points": [{"x": list(z.x), "v": list(z.v)} for z in zs],
        "checks": checks,
        "summary": dict(counts, ok=counts["fail"] == 0),
    }
