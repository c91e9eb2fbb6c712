"""Geodesics of the spray ẍ + 2G(x, ẋ) = 0, parallel transport along them,
and the leaf confinement and extendability probes.

The integrator is an embedded Dormand-Prince 5(4) pair with mixed
absolute/relative error control (atol = rtol = rel_tol) and cubic Hermite
dense output. Leaving the metric domain is an outcome, not an exception.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import nullity
from .connection import cartan_gamma_value, point_geometry, spray_value
from .errors import DomainError, FinslerError, PreconditionError
from .jets import SupportElement
from .metrics import FinslerMetric

# Dormand-Prince 5(4) tableau
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class _Outside(Exception):
    pass


@dataclass
class _Run:
    times: list
    ys: list
    fs: list
    errors: list
    exit_t: Optional[float] = None


def dopri45(
    fun: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_end: float,
    rel_tol: float,
    h_min: float = 1e-12,
    max_steps: int = 200000,
    stops: Optional[Sequence[float]] = None,
) -> _Run:
    """Autonomous y' = fun(y) on [0, t_end].

    ``fun`` raises :class:`_Outside` when a stage leaves the domain; the step
    is then rejected and shrunk, and a step below ``h_min`` (from either cause
    or from error control) ends the run with ``exit_t`` set. ``stops`` are times every accepted grid must include.
    """
    y = np.asarray(y0, float)
    try:
        f = fun(y)
    except _Outside:
        raise DomainError("initial state outside the domain")
    t = 0.0
    run = _Run([0.0], [y], [f], [])
    stops = sorted(s for s in (stops or ()) if 0.0 < s < t_end) + [t_end]
    si = 0
    d0, d1 = np.linalg.norm(y), np.linalg.norm(f)
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-3
    h = min(h, t_end)
    steps = 0
    while t < t_end:
        if steps >= max_steps:
            raise FinslerError(f"step budget exhausted at t={t}")
        steps += 1
        while stops[si] <= t:
            si += 1
        target = stops[si]
        hs = min(h, target - t)
        landing = hs == target - t
        try:
            K = [f]
            for s in range(1, 7):
                ys = y + hs * sum(a * k for a, k in zip(_A[s], K))
                K.append(fun(ys))
        except _Outside:
            h = hs * 0.25
            if h < h_min:
                run.exit_t = t
                return run
            continue
        y5 = y + hs * sum(b * k for b, k in zip(_B5, K) if b)
        errv = hs * sum(e * k for e, k in zip(_E, K))
        sc = rel_tol + rel_tol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.sqrt(np.mean((errv / sc) ** 2)))
        if not np.all(np.isfinite(y5)):
            err = np.inf
        if err <= 1.0:
            t = target if landing else t + hs
            y, f = y5, K[6]
            run.times.append(t)
            run.ys.append(y)
            run.fs.append(f)
            run.errors.append(err * rel_tol)
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = max(h, hs) * fac if landing and hs < h else hs * fac
        else:
            fac = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            h = hs * fac
            if h < h_min:
                # the coordinate solution blows up: it is leaving the chart
                run.exit_t = t
                return run
    return run


def hermite(t0, t1, y0, y1, f0, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted steps of a geodesic; ``slopes`` are (ẋ, ẍ) at the nodes."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    F: np.ndarray
    errors: np.ndarray
    slopes: np.ndarray
    domain_exit: Optional[float] = None

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def states(self) -> list:
        return [(self.x[i], self.v[i]) for i in range(len(self.times))]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.F - self.F[0])) / self.F[0])

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(x, v) at time t by cubic Hermite interpolation between nodes."""
        ts = self.times
        if not ts[0] <= t <= ts[-1]:
            raise ValueError(f"t={t} outside [{ts[0]}, {ts[-1]}]")
        i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)) if len(ts) > 1 else 0
        if len(ts) == 1:
            return self.x[0].copy(), self.v[0].copy()
        y0 = np.concatenate([self.x[i], self.v[i]])
        y1 = np.concatenate([self.x[i + 1], self.v[i + 1]])
        y = hermite(ts[i], ts[i + 1], y0, y1, self.slopes[i], self.slopes[i + 1], t)
        return y[: self.n], y[self.n :]

    def to_csv(self) -> str:
        n = self.n
        buf = io.StringIO()
        head = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["F"]
        buf.write(",".join(head) + "\n")
        for i, t in enumerate(self.times):
            row = [t, *self.x[i], *self.v[i], self.F[i]]
            buf.write(",".join("%.17g" % float(a) for a in row) + "\n")
        if self.domain_exit is not None:
            buf.write("# domain_exit t=%.17g\n" % self.domain_exit)
        return buf.getvalue()


def _spray_field(metric: FinslerMetric, n: int):
    def fun(y):
        x, v = y[:n], y[n:]
        if not metric.in_domain(x):
            raise _Outside
        try:
            G = spray_value(metric, x, v)
        except (DomainError, np.linalg.LinAlgError):
            raise _Outside
        if not np.all(np.isfinite(G)):
            raise _Outside
        return np.concatenate([v, -2.0 * G])

    return fun


def _check_tol(rel_tol):
    if not 1e-12 <= rel_tol <= 1e-4:
        raise ValueError(f"rel_tol must lie in [1e-12, 1e-4], got {rel_tol}")


def _F_safe(metric, x, v):
    try:
        return float(metric.F(x, v))
    except Exception:
        return float("nan")


def integrate_geodesic(
    metric: FinslerMetric, z0: SupportElement, t_end: float, rel_tol: float = 1e-9, h_min: float = 1e-12
) -> Trajectory:
    _check_tol(rel_tol)
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    metric.check(z0)
    n = z0.n
    run = dopri45(_spray_field(metric, n), np.concatenate([z0.xa, z0.va]), float(t_end), rel_tol, h_min)
    Y = np.array(run.ys)
    x, v = Y[:, :n], Y[:, n:]
    F = np.array([_F_safe(metric, x[i], v[i]) for i in range(len(Y))])
    return Trajectory(
        np.array(run.times), x, v, F, np.array(run.errors), np.array(run.fs), run.exit_t
    )


@dataclass(frozen=True, eq=False)
class Transport:
    """Vectors carried along a trajectory; ``X[m]`` is n × c at ``times[m]``."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    X: np.ndarray

    def gram(self, metric: FinslerMetric, m: int) -> np.ndarray:
        g = point_geometry(metric, SupportElement.of(self.x[m], self.v[m])).g
        return self.X[m].T @ g @ self.X[m]

    def gram_drift(self, metric: FinslerMetric) -> float:
        G0 = self.gram(metric, 0)
        s = max(1.0, float(np.max(np.abs(G0))))
        return max(float(np.max(np.abs(self.gram(metric, m) - G0))) for m in range(len(self.times))) / s


def parallel_transport(
    metric: FinslerMetric, trajectory: Trajectory, X0, rel_tol: float = 1e-10
) -> Transport:
    """Solve dX^i/dt + Γ*^i_jk(x, ẋ) X^j ẋ^k = 0 jointly with the geodesic.

    X0 may be a vector or an n × c matrix of column vectors. The output grid
    is the trajectory's own time grid.
    """
    _check_tol(rel_tol)
    n = trajectory.n
    X0 = np.asarray(X0, float)
    col = X0.ndim == 1
    X0 = X0.reshape(n, -1)
    if np.any(np.linalg.norm(X0, axis=0) == 0):
        raise ValueError("transported vectors must be nonzero")
    c = X0.shape[1]
    geo = _spray_field(metric, n)

    def fun(y):
        head = geo(y[: 2 * n])
        x, v = y[:n], y[n : 2 * n]
        X = y[2 * n :].reshape(n, c)
        Gam = cartan_gamma_value(metric, x, v)
        dX = -np.einsum("ijk,jc,k->ic", Gam, X, v)
        return np.concatenate([head, dX.ravel()])

    y0 = np.concatenate([trajectory.x[0], trajectory.v[0], X0.ravel()])
    T = trajectory.t_end
    run = dopri45(fun, y0, T, rel_tol, stops=list(trajectory.times[1:-1]))
    ts = np.array(run.times)
    Y = np.array(run.ys)
    keep = np.isin(ts, trajectory.times)
    Y = Y[keep]
    X = Y[:, 2 * n :].reshape(-1, n, c)
    if col:
        X = X[:, :, 0:1]
    return Transport(ts[keep], Y[:, :n], Y[:, n : 2 * n], X)


# --------------------------------------------------------------------------
# leaf checks


@dataclass(frozen=True, eq=False)
class ConfinementResult:
    max_deviation: float
    mu_k: int
    checked: int
    mu_change_t: Optional[float]
    domain_exit: Optional[float]
    energy_drift: float
    trajectory: Trajectory = field(repr=False)


def _deviation(metric, x, v, k, rank_tol):
    z = SupportElement.of(x, v)
    sub = nullity.nullity_kernel_space(metric, z, k, rank_tol)
    g = point_geometry(metric, z).g
    B = sub.basis
    perp = v - B @ (B.T @ g @ v)
    return sub.dim, float(np.sqrt(max(perp @ g @ perp, 0.0)) / np.sqrt(v @ g @ v))


def totally_geodesic_check(
    metric: FinslerMetric,
    z0: SupportElement,
    k: float,
    t_end: float,
    rel_tol: float = 1e-10,
    diagnostic: bool = False,
    rank_tol: float = nullity.RANK_TOL,
    max_checks: Optional[int] = 400,
) -> ConfinementResult:
    """max over accepted nodes of ‖ẋ^⊥‖_g / ‖ẋ‖_g against 𝒩^k_{x(t)} recomputed pointwise.

    Without ``diagnostic`` the start direction must be a k-nullity vector and
    a change of μ_k along the run raises; with it both are only recorded.
    Long runs are checked at ``max_checks`` evenly spaced nodes (ends included).
    """
    mu0, dev0 = _deviation(metric, z0.xa, z0.va, k, rank_tol)
    if dev0 > 1e-8 and not diagnostic:
        raise PreconditionError(f"initial direction is not a k-nullity vector (deviation {dev0:.3g})")
    traj = integrate_geodesic(metric, z0, t_end, rel_tol)
    worst, change = dev0, None
    m = len(traj.times)
    idx = range(m)
    if max_checks is not None and m > max_checks:
        idx = sorted(set(np.linspace(0, m - 1, max_checks).round().astype(int).tolist()))
    for i in idx:
        mu, dev = _deviation(metric, traj.x[i], traj.v[i], k, rank_tol)
        if mu != mu0 and change is None:
            change = float(traj.times[i])
            if not diagnostic:
                raise PreconditionError(f"mu_k changes from {mu0} to {mu} at t={change}")
        worst = max(worst, dev)
    return ConfinementResult(worst, mu0, len(idx), change, traj.domain_exit, traj.energy_drift(), traj)


@dataclass(frozen=True)
class ExtendabilityReport:
    passed: bool
    t_reached: float
    domain_exit: Optional[float]
    mu_k: int
    mu_drop_t: Optional[float]
    max_confinement: float
    energy_drift: float


def extendability_probe(
    metric: FinslerMetric,
    z0: SupportElement,
    k: float,
    t_max: float = 100.0,
    rel_tol: float = 1e-10,
    confinement_tol: float = 1e-5,
    max_checks: Optional[int] = 400,
) -> ExtendabilityReport:
    """Desk-scale proxy for completeness of a leaf: integrate to t_max inside 𝒩^k."""
    if not metric.complete:
        raise PreconditionError("metric not declared complete")
    res = totally_geodesic_check(metric, z0, k, t_max, rel_tol, diagnostic=True, max_checks=max_checks)
    traj = res.trajectory
    ok = res.domain_exit is None and res.mu_change_t is None and res.max_deviation < confinement_tol
    return ExtendabilityReport(
        ok, traj.t_end, res.domain_exit, res.mu_k, res.mu_change_t, res.max_deviation, res.energy_drift
    )
