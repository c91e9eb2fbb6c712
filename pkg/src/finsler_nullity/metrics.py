"""Built-in Finsler metric families, spec parsing and structure validation.

Every metric exposes ``F(x, v)`` and ``F2(x, v)`` written against a tiny
set of operations (``+ - * /``, ``sum``, ``sqrt``, ``power``) so the same
formula evaluates on plain arrays and on jets.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import jets
from .errors import DomainError, MetricSpecError
from .jets import Jet, SupportElement

FAMILIES = ("euclidean", "riemannian_closed_form", "randers", "minkowski_quartic", "funk_disk", "product")
RIEMANNIAN_KINDS = ("sphere", "hyperbolic")
MAX_DIMENSION = 6

_ALLOWED_FIELDS = {
    "euclidean": {"family", "dimension"},
    "riemannian_closed_form": {"family", "dimension", "kind", "radius"},
    "randers": {"family", "dimension", "b", "b_linear", "base"},
    "minkowski_quartic": {"family", "dimension", "epsilon"},
    "funk_disk": {"family", "dimension"},
    "product": {"family", "dimension", "factors"},
}


@dataclass(frozen=True)
class MetricSpec:
    """Declarative description of a metric family and its parameters.

    ``base`` (randers) and ``factors`` (product) hold nested specs of the
    Riemannian families. ``b_linear`` makes the Randers drift affine in x:
    b(x) = b + B x.
    """

    family: str
    dimension: int
    kind: Optional[str] = None
    radius: Optional[float] = None
    b: Optional[tuple] = None
    b_linear: Optional[tuple] = None
    base: Optional["MetricSpec"] = None
    epsilon: Optional[float] = None
    factors: Optional[tuple] = None
    nested: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        _check_spec(self)

    def to_dict(self) -> dict:
        out = {"family": self.family, "dimension": self.dimension}
        if self.kind is not None:
            out["kind"] = self.kind
        if self.radius is not None:
            out["radius"] = self.radius
        if self.b is not None:
            out["b"] = list(self.b)
        if self.b_linear is not None:
            out["b_linear"] = [list(r) for r in self.b_linear]
        if self.base is not None:
            out["base"] = self.base.to_dict()
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        if self.factors is not None:
            out["factors"] = [f.to_dict() for f in self.factors]
        return out


def _fail(msg, field=None):
    raise MetricSpecError(msg, field=field)


def _check_spec(s: MetricSpec):
    if s.family not in FAMILIES:
        _fail(f"unknown family {s.family!r}", "family")
    if not isinstance(s.dimension, int) or isinstance(s.dimension, bool):
        _fail("dimension must be an integer", "dimension")
    lo = 1 if s.nested and s.family in ("euclidean", "riemannian_closed_form") else 2
    if not lo <= s.dimension <= MAX_DIMENSION:
        _fail(f"unsupported dimension {s.dimension} (need {lo} <= n <= {MAX_DIMENSION})", "dimension")
    n = s.dimension

    if s.family == "riemannian_closed_form":
        if s.kind not in RIEMANNIAN_KINDS:
            _fail(f"kind must be one of {RIEMANNIAN_KINDS}", "kind")
        if s.radius is None or not s.radius > 0:
            _fail("radius must be positive", "radius")
    elif s.family == "randers":
        if s.b is None or len(s.b) != n:
            _fail(f"b must be a list of {n} reals", "b")
        if s.b_linear is not None and (len(s.b_linear) != n or any(len(r) != n for r in s.b_linear)):
            _fail(f"b_linear must be an {n}x{n} matrix", "b_linear")
        if s.base is not None:
            if s.base.family not in ("euclidean", "riemannian_closed_form") or s.base.dimension != n:
                _fail("base must be a Riemannian spec of the same dimension", "base")
        base = _riemannian_factor(s.base) if s.base is not None else _riemannian_factor(None, n)
        x0 = np.zeros(n)
        if not base.in_domain(x0):
            _fail("origin must lie in the base domain", "base")
        if _randers_b_norm(base, np.asarray(s.b, float), x0) >= 1.0:
            _fail("b norm must be < 1", "b")
    elif s.family == "minkowski_quartic":
        if s.epsilon is not None and not np.isfinite(s.epsilon):
            _fail("epsilon must be finite", "epsilon")
    elif s.family == "product":
        if not s.factors or len(s.factors) < 2:
            _fail("product needs at least two factors", "factors")
        for f in s.factors:
            if f.family not in ("euclidean", "riemannian_closed_form"):
                _fail("product factors must be Riemannian (euclidean or riemannian_closed_form)", "factors")
        if sum(f.dimension for f in s.factors) != n:
            _fail("factor dimensions must sum to dimension", "factors")


# --------------------------------------------------------------------------
# helpers that work on arrays and jets alike


def _dot(a, b):
    return (a * b).sum()


def _matvec(B, x):
    if isinstance(x, Jet):
        return jets.einsum("ij,j->i", np.asarray(B), x)
    return np.asarray(B) @ x


class _RiemannianFactor:
    """Conformally flat Riemannian block: a_ij(x) = phi(x) delta_ij."""

    def __init__(self, kind, radius, dim):
        self.kind, self.radius, self.dim = kind, radius, dim

    def phi(self, x):
        if self.kind == "euclidean":
            return 1.0
        r = self.radius
        q = _dot(x, x)
        if self.kind == "sphere":
            return 4.0 * r**4 * jets.power(r * r + q, -2.0)
        return 4.0 * r**4 * jets.power(r * r - q, -2.0)

    def F2(self, x, v):
        return self.phi(x) * _dot(v, v)

    def in_domain(self, x):
        if self.kind == "hyperbolic":
            return float(np.dot(x, x)) < self.radius**2
        return True

    def matrix(self, x):
        return float(self.phi(np.asarray(x, float))) * np.eye(self.dim)

    @property
    def curvature(self):
        if self.kind == "euclidean":
            return 0.0
        return (1.0 if self.kind == "sphere" else -1.0) / self.radius**2


def _riemannian_factor(spec: Optional[MetricSpec], n=None):
    if spec is None or spec.family == "euclidean":
        return _RiemannianFactor("euclidean", None, n if spec is None else spec.dimension)
    return _RiemannianFactor(spec.kind, float(spec.radius), spec.dimension)


def _randers_b_norm(base, b, x):
    return float(np.sqrt(np.dot(b, b) / base.phi(np.asarray(x, float))))


# --------------------------------------------------------------------------
# metric objects


class FinslerMetric:
    """An evaluable Finsler structure. Immutable after construction."""

    def __init__(self, spec: MetricSpec):
        self.spec = spec
        self.n = spec.dimension
        fam = spec.family
        if fam in ("euclidean", "riemannian_closed_form"):
            self._blocks = [(slice(0, self.n), _riemannian_factor(spec))]
        elif fam == "product":
            blocks, start = [], 0
            for f in spec.factors:
                blocks.append((slice(start, start + f.dimension), _riemannian_factor(f)))
                start += f.dimension
            self._blocks = blocks
        else:
            self._blocks = None
        if fam == "randers":
            self._base = _riemannian_factor(spec.base, self.n)
            self._b = np.asarray(spec.b, float)
            self._B = None if spec.b_linear is None else np.asarray(spec.b_linear, float)
        self._eps = 1.0 if spec.epsilon is None else float(spec.epsilon)

    def __repr__(self):
        return f"FinslerMetric({self.spec.to_dict()})"

    # -- structure
    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def is_riemannian(self) -> bool:
        return self._blocks is not None

    @property
    def x_independent(self) -> bool:
        if self.family in ("euclidean", "minkowski_quartic"):
            return True
        if self.family == "randers":
            return self._B is None and self._base.kind == "euclidean"
        return False

    @property
    def complete(self) -> bool:
        """Whether the metric is declared (forward) geodesically complete on its domain."""
        if self.family in ("euclidean", "riemannian_closed_form", "product", "minkowski_quartic"):
            return True
        if self.family == "randers":
            return self.x_independent
        return False

    def drift(self, x):
        b = self._b
        if self._B is not None:
            b = b + _matvec(self._B, x)
        return b

    def in_domain(self, x) -> bool:
        x = np.asarray(x, float)
        if x.shape != (self.n,) or not np.all(np.isfinite(x)):
            return False
        fam = self.family
        if self._blocks is not None:
            return all(f.in_domain(x[sl]) for sl, f in self._blocks)
        if fam == "funk_disk":
            return float(np.dot(x, x)) < 1.0
        if fam == "randers":
            return self._base.in_domain(x) and _randers_b_norm(self._base, self.drift(x), x) < 1.0
        return True

    def check(self, z: SupportElement):
        if z.n != self.n:
            raise DomainError(f"support element has dimension {z.n}, metric has {self.n}")
        if not self.in_domain(z.xa):
            raise DomainError(f"x={list(z.x)} is outside the domain of {self.family}")

    # -- evaluation (arrays or jets)
    def F2(self, x, v):
        fam = self.family
        if self._blocks is not None:
            total = 0.0
            for sl, f in self._blocks:
                total = f.F2(x[sl], v[sl]) + total
            return total
        if fam in ("randers", "funk_disk"):
            F = self.F(x, v)
            return F * F
        if fam == "minkowski_quartic":
            v2 = v * v
            s4 = _dot(v2, v2)
            s2 = v2.sum()
            return jets.sqrt(s4 * (1.0 - 0.5 * self._eps) + (0.5 * self._eps) * (s2 * s2))
        raise AssertionError(fam)

    def F(self, x, v):
        fam = self.family
        if fam == "randers":
            alpha = jets.sqrt(self._base.F2(x, v))
            return alpha + _dot(self.drift(x), v)
        if fam == "funk_disk":
            s = 1.0 - _dot(x, x)
            xv = _dot(x, v)
            return (jets.sqrt(s * _dot(v, v) + xv * xv) + xv) / s
        return jets.sqrt(self.F2(x, v))

    def __call__(self, z: SupportElement) -> float:
        self.check(z)
        return float(self.F(z.xa, z.va))

    def riemannian_matrix(self, x) -> np.ndarray:
        """Closed-form a_ij(x) for Riemannian families (block diagonal)."""
        if self._blocks is None:
            raise TypeError(f"{self.family} is not Riemannian")
        a = np.zeros((self.n, self.n))
        for sl, f in self._blocks:
            a[sl, sl] = f.matrix(np.asarray(x, float)[sl])
        return a

    def factor_curvatures(self) -> list[tuple[slice, float]]:
        if self._blocks is None:
            raise TypeError(f"{self.family} is not Riemannian")
        return [(sl, f.curvature) for sl, f in self._blocks]


def make_metric(spec: MetricSpec) -> FinslerMetric:
    metric = FinslerMetric(spec)
    if spec.family == "minkowski_quartic":
        # strict convexity is only checked on a sample of directions
        try:
            lam = _min_eig_over_directions(metric)
        except DomainError:
            lam = -np.inf  # F⁴ is not positive in some direction
        if not lam > 0:
            raise MetricSpecError(
                f"minkowski_quartic with epsilon={metric._eps} is not strictly convex (min eig g = {lam:.3g})",
                field="epsilon",
            )
    return metric


def _directions(n, count=64, seed=12345):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, n))
    d = np.vstack([np.eye(n), np.ones((1, n)), d])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def fundamental_tensor_value(metric: FinslerMetric, z: SupportElement) -> np.ndarray:
    jet = jets.taylor_jet(metric.F2, z, 0, 2)
    return 0.5 * jet.grad_v().grad_v().value


def _min_eig_over_directions(metric):
    x = np.zeros(metric.n)
    lam = np.inf
    for d in _directions(metric.n):
        g = fundamental_tensor_value(metric, SupportElement.of(x, d))
        lam = min(lam, float(np.linalg.eigvalsh(g)[0]))
    return lam


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class SampleCheck:
    z: SupportElement
    F: float
    homogeneity_residual: float
    min_eig_g: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    samples: tuple
    tolerance: float
    passed: bool

    @property
    def max_homogeneity_residual(self) -> float:
        return max(s.homogeneity_residual for s in self.samples)

    @property
    def min_eig_g(self) -> float:
        return min(s.min_eig_g for s in self.samples)


def validate_metric(metric: FinslerMetric, samples: Sequence[SupportElement], tol: float = 1e-9) -> ValidationReport:
    """Check positivity, 1-homogeneity and convexity at each sample."""
    if len(samples) == 0:
        raise ValueError("validate_metric needs at least one sample")
    checks = []
    for z in samples:
        metric.check(z)
        F = float(metric.F(z.xa, z.va))
        hom = abs(float(metric.F(z.xa, 2.0 * z.va)) - 2.0 * F)
        lam = float(np.linalg.eigvalsh(fundamental_tensor_value(metric, z))[0])
        ok = F > 0 and hom < tol * max(1.0, abs(F)) and lam > 0
        checks.append(SampleCheck(z, F, hom, lam, ok))
    return ValidationReport(tuple(checks), tol, all(c.passed for c in checks))


# --------------------------------------------------------------------------
# spec files


def _line_of(text, key):
    for i, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return i
    return None


def _real(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MetricSpecError(f"{name} must be a real number", field=name)
    return float(value)


def _reals(value, name):
    if not isinstance(value, list):
        raise MetricSpecError(f"{name} must be a list of reals", field=name)
    return tuple(_real(a, name) for a in value)


def spec_from_dict(doc: dict, nested: bool = False) -> MetricSpec:
    if not isinstance(doc, dict):
        raise MetricSpecError("metric spec must be a JSON object")
    fam = doc.get("family")
    if fam not in FAMILIES:
        raise MetricSpecError(f"unknown family {fam!r}", field="family")
    unknown = sorted(set(doc) - _ALLOWED_FIELDS[fam])
    if unknown:
        raise MetricSpecError(f"unknown field {unknown[0]!r} for family {fam}", field=unknown[0])
    if "dimension" not in doc:
        raise MetricSpecError("missing field 'dimension'", field="dimension")
    kw = {"family": fam, "dimension": doc["dimension"], "nested": nested}
    if "kind" in doc:
        kw["kind"] = doc["kind"]
    if "radius" in doc:
        kw["radius"] = _real(doc["radius"], "radius")
    if "b" in doc:
        kw["b"] = _reals(doc["b"], "b")
    if "b_linear" in doc:
        if not isinstance(doc["b_linear"], list):
            raise MetricSpecError("b_linear must be a matrix", field="b_linear")
        kw["b_linear"] = tuple(_reals(r, "b_linear") for r in doc["b_linear"])
    if "base" in doc:
        kw["base"] = None if doc["base"] is None else spec_from_dict(doc["base"], nested=True)
    if "epsilon" in doc:
        kw["epsilon"] = _real(doc["epsilon"], "epsilon")
    if "factors" in doc:
        if not isinstance(doc["factors"], list):
            raise MetricSpecError("factors must be a list of specs", field="factors")
        kw["factors"] = tuple(spec_from_dict(f, nested=True) for f in doc["factors"])
    return MetricSpec(**kw)


def parse_metric_spec(text: str) -> MetricSpec:
    """Parse a JSON metric spec document (one metric per document)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MetricSpecError(f"parse error: {exc.msg} (line {exc.lineno}, column {exc.colno})", line=exc.lineno) from None
    try:
        return spec_from_dict(doc)
    except MetricSpecError as exc:
        if exc.field is not None and exc.line is None:
            exc.line = _line_of(text, exc.field)
        raise


def load_metric(path) -> FinslerMetric:
    with open(path, encoding="utf-8") as fh:
        return make_metric(parse_metric_spec(fh.read()))


# convenience constructors used by tests and scripts


def euclidean(n=2) -> FinslerMetric:
    return make_metric(MetricSpec("euclidean", n))


def sphere(n=2, radius=1.0) -> FinslerMetric:
    return make_metric(MetricSpec("riemannian_closed_form", n, kind="sphere", radius=float(radius)))


def sphere_times_flat(flat_dim=1, radius=1.0, sphere_dim=2) -> FinslerMetric:
    factors = (
        MetricSpec("riemannian_closed_form", sphere_dim, kind="sphere", radius=float(radius), nested=True),
        MetricSpec("euclidean", flat_dim, nested=True),
    )
    return make_metric(MetricSpec("product", sphere_dim + flat_dim, factors=factors))


def randers(b, b_linear=None, base=None) -> FinslerMetric:
    b = tuple(float(a) for a in b)
    lin = None if b_linear is None else tuple(tuple(float(a) for a in r) for r in b_linear)
    return make_metric(MetricSpec("randers", len(b), b=b, b_linear=lin, base=base))


def minkowski_quartic(n=2, epsilon=1.0) -> FinslerMetric:
    return make_metric(MetricSpec("minkowski_quartic", n, epsilon=float(epsilon)))


def funk_disk(n=2) -> FinslerMetric:
    return make_metric(MetricSpec("funk_disk", n))
