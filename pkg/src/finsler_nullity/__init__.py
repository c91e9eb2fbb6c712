"""Finsler curvature, k-nullity spaces and their foliation checks."""

__version__ = "0.1.0"

from .errors import (
    DegenerateFlagError,
    DomainError,
    FinslerError,
    MetricSpecError,
    OrderBudgetError,
    PreconditionError,
    RankAmbiguityError,
)
from .jets import SupportElement
from .metrics import FinslerMetric, MetricSpec, load_metric, make_metric, parse_metric_spec

__all__ = [
    "DegenerateFlagError",
    "DomainError",
    "FinslerError",
    "FinslerMetric",
    "MetricSpec",
    "MetricSpecError",
    "OrderBudgetError",
    "PreconditionError",
    "RankAmbiguityError",
    "SupportElement",
    "load_metric",
    "make_metric",
    "parse_metric_spec",
]
