"""``finsler-nullity`` command line: report, suite and trace.

Exit codes: 0 success, 1 a suite check failed, 2 spec, domain or argument
errors (a JSON error object is written to stdout).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from . import battery
from . import curvature as curv
from . import geodesics as geo
from . import nullity as nul
from .connection import point_geometry
from .errors import DomainError, FinslerError, MetricSpecError
from .jets import SupportElement
from .metrics import load_metric
from .sampling import sample_flag

SCHEMA = "finsler-nullity/1"


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2, ensure_ascii=False) + "\n"


def _floats(text: str, name: str) -> list:
    try:
        out = [float(a) for a in text.split(",") if a.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name} must be comma-separated reals, got {text!r}")
    if not out or not all(math.isfinite(a) for a in out):
        raise argparse.ArgumentTypeError(f"{name} must be comma-separated finite reals, got {text!r}")
    return out


def default_threads() -> int:
    env = os.environ.get("FINSLER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def _emit(doc: dict, path: Optional[str]):
    text = dumps(doc)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(exc: Exception) -> int:
    err = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, MetricSpecError):
        err.update(exc.as_dict())
        err["type"] = type(exc).__name__
    sys.stdout.write(dumps({"schema": SCHEMA, "error": err}))
    print(f"error: {exc}", file=sys.stderr)
    return 2


def _metadata(metric, **extra) -> dict:
    return dict({"tool": "finsler-nullity", "tool_version": __version__, "metric": metric.spec.to_dict()}, **extra)


# --------------------------------------------------------------------------
# report


def build_report(metric, x, v, k: float, seed: int = 0, flags: int = 5) -> dict:
    z = SupportElement.of(x, v)
    metric.check(z)
    pg = point_geometry(metric, z, 5)
    rng = np.random.default_rng(seed)
    R, P, Q, H = curv.R_array(pg), curv.P_array(pg), curv.Q_array(pg), curv.H_array(pg)
    sP = curv.sP_array(pg)
    op = curv.related_operator(metric, z, k)
    samples = []
    for _ in range(flags):
        X = sample_flag(z, rng)
        samples.append({"X": X, "K_R": curv.flag_curvature(metric, z, X), "K_H": curv.flag_curvature(metric, z, X, via="H")})
    rep = nul.nullity_report(metric, z, k)
    X0 = samples[0]["X"]
    ident = [
        battery.judged("H_vs_R_on_v", curv.berwald_identity_residual(metric, z, X0), "Berwald pipeline"),
        battery.judged("sP_v_contraction", curv.sP_v_residual(metric, z), "identity"),
        battery.judged("bianchi_horizontal", curv.bianchi_residual(metric, z), "torsion terms"),
        battery.judged(
            "omega_bar_antisymmetry", op.antisymmetry_residual() / curv.scale(op.omega_bar_hh.entries), "identity"
        ),
        battery.judged("metric_compatibility", pg.metric_compatibility_residual() / curv.scale(pg.g), "∇g = 0"),
    ]

    def nrm(a):
        return float(np.max(np.abs(a))) if np.size(a) else 0.0

    return {
        "schema": SCHEMA,
        "command": "report",
        "metadata": _metadata(metric, k=k, seed=seed, tolerances={"rank_tol": nul.RANK_TOL, "gap_min": nul.GAP_MIN}),
        "point": {"x": list(z.x), "v": list(z.v), "F": pg.F},
        "connection": {
            "g": pg.g,
            "g_inv": pg.ginv,
            "T": pg.T,
            "spray": pg.spray,
            "nonlinear": pg.N,
            "berwald": pg.B,
            "cartan_h": pg.gamma,
            "cartan_v": pg.C,
        },
        "curvature_norms": {
            "R": nrm(R),
            "P": nrm(P),
            "sP": nrm(sP),
            "aP": nrm(P - sP),
            "Q": nrm(Q),
            "H": nrm(H),
            "omega_bar_hh": op.omega_bar_hh.norm(),
        },
        "flag_curvature_samples": samples,
        "nullity": {
            "k": k,
            "mu_k": rep.mu_k,
            "dim_argument_space": rep.arg.dim,
            "dim_kernel_space": rep.ker.dim,
            "gap_ratio": rep.gap_ratio,
            "ambiguous": rep.ambiguous,
            "boundary_case": rep.boundary_case,
            "principal_angle": rep.principal_angle if rep.arg.dim == rep.ker.dim else None,
            "singular_values_argument": rep.arg.singular_values,
            "singular_values_kernel": rep.ker.singular_values,
            "basis_argument": rep.basis_arg.T,
            "basis_kernel": rep.basis_ker.T,
        },
        "identities": ident,
    }


def cmd_report(args) -> int:
    metric = load_metric(args.spec)
    if args.k < 0:
        raise ValueError("k must be non-negative")
    doc = build_report(metric, args.point, args.vector, args.k, args.seed)
    _emit(doc, args.json)
    return 0


# --------------------------------------------------------------------------
# suite


def _grid(text: str):
    try:
        count, half = text.split(":")
        c, h = int(count), float(half)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--grid must look like COUNT:HALF_WIDTH, got {text!r}")
    if c < 2 or not h > 0:
        raise argparse.ArgumentTypeError("--grid needs COUNT >= 2 and HALF_WIDTH > 0")
    return c, h


def cmd_suite(args) -> int:
    metric = load_metric(args.spec)
    if any(k < 0 for k in args.k):
        raise ValueError("k values must be non-negative")
    count, half = args.grid
    cfg = battery.SuiteConfig(
        ks=tuple(args.k), seed=args.seed, grid_count=count, grid_half_width=half, threads=args.threads
    )
    result = battery.run_suite(metric, cfg)
    doc = {"schema": SCHEMA, "command": "suite", "metadata": _metadata(metric, k=list(args.k), seed=args.seed)}
    doc.update(result)
    _emit(doc, args.json)
    failed = [c for c in result["checks"] if c["status"] == "fail"]
    for c in failed:
        print(f"FAIL {c['name']} residual={c['residual']} tol={c['tolerance']}", file=sys.stderr)
    return 0 if not failed else 1


# --------------------------------------------------------------------------
# trace


def cmd_trace(args) -> int:
    metric = load_metric(args.spec)
    n = metric.n
    if len(args.start) != 2 * n:
        raise ValueError(f"--start needs {2 * n} numbers (x1..x{n},v1..v{n}), got {len(args.start)}")
    z0 = SupportElement.of(args.start[:n], args.start[n:])
    metric.check(z0)
    if not args.t_end > 0:
        raise ValueError("--t-end must be positive")
    tr = geo.integrate_geodesic(metric, z0, args.t_end, args.rel_tol)
    text = tr.to_csv()
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finsler-nullity", description="Finsler curvature and k-nullity checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("spec", help="metric spec JSON file")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: $FINSLER_THREADS or cores)")
        sp.add_argument("--seed", type=int, default=0, help="seed for sampled points and flags")

    r = sub.add_parser("report", help="single-point report")
    common(r)
    r.add_argument("--point", required=True, type=lambda s: _floats(s, "--point"), help="x1,...,xn")
    r.add_argument("--vector", required=True, type=lambda s: _floats(s, "--vector"), help="v1,...,vn")
    r.add_argument("--k", type=float, default=0.0)
    r.add_argument("--json", default=None, help="output path (default stdout)")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("suite", help="run the invariant battery")
    common(s)
    s.add_argument("--k", type=lambda t: _floats(t, "--k"), default=[0.0, 0.5, 1.0], help="comma-separated k list")
    s.add_argument("--grid", type=_grid, default=(5, 0.1), help="involutivity grid COUNT:HALF_WIDTH (default 5:0.1)")
    s.add_argument("--json", default=None, help="output path (default stdout)")
    s.set_defaults(func=cmd_suite)

    t = sub.add_parser("trace", help="integrate a geodesic to CSV")
    common(t)
    t.add_argument("--start", required=True, type=lambda s: _floats(s, "--start"), help="x1,...,xn,v1,...,vn")
    t.add_argument("--t-end", dest="t_end", type=float, required=True)
    t.add_argument("--rel-tol", dest="rel_tol", type=float, default=1e-9)
    t.add_argument("--csv", default=None, help="output path (default stdout)")
    t.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is None:
        args.threads = default_threads()
    elif args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (MetricSpecError, DomainError, ValueError, OSError) as e:
        return _error(e)
    except FinslerError as e:
        return _error(e)


if __name__ == "__main__":
    sys.exit(main())
