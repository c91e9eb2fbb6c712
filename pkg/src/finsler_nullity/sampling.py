"""Seeded random support elements and tangent vectors inside a metric's domain."""
from __future__ import annotations

import numpy as np

from .errors import DomainError
from .jets import SupportElement
from .metrics import FinslerMetric


def _box(metric: FinslerMetric) -> float:
    n = metric.n
    fam = metric.family
    if fam == "funk_disk":
        return 0.6 / np.sqrt(n)
    if fam == "riemannian_closed_form":
        return 0.5 * metric.spec.radius / (np.sqrt(n) if metric.spec.kind == "hyperbolic" else 1.0)
    if fam == "randers" and metric.spec.base is not None and metric.spec.base.family != "euclidean":
        return 0.3 * metric.spec.base.radius / np.sqrt(n)
    if fam == "randers":
        return 0.3
    if fam == "product":
        rs = [f.radius for f in metric.spec.factors if f.radius is not None]
        return 0.5 * min(rs) if rs else 0.5
    return 0.5


def sample_point(metric: FinslerMetric, rng: np.random.Generator, tries: int = 1000) -> np.ndarray:
    s = _box(metric)
    for _ in range(tries):
        x = rng.uniform(-s, s, metric.n)
        if metric.in_domain(x):
            return x
    raise DomainError(f"could not sample a point in the domain of {metric.family}")


def sample_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.standard_normal(n)
        if np.linalg.norm(v) > 0.1:
            return v


def sample_support_elements(metric: FinslerMetric, count: int, rng: np.random.Generator) -> list:
    return [SupportElement.of(sample_point(metric, rng), sample_vector(metric.n, rng)) for _ in range(count)]


def sample_flag(z: SupportElement, rng: np.random.Generator, min_angle: float = 0.1) -> np.ndarray:
    """Random X whose Euclidean angle with v exceeds ``min_angle``."""
    v = z.va / np.linalg.norm(z.va)
    while True:
        X = rng.standard_normal(z.n)
        c = abs(X @ v) / np.linalg.norm(X)
        if np.arccos(min(c, 1.0)) > min_angle:
            return X
