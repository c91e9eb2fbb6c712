"""Exception types shared across the engine."""


class FinslerError(Exception):
    """Base class for engine errors."""


class DomainError(FinslerError, ValueError):
    """A point lies outside the metric domain, or v is (numerically) zero."""


class OrderBudgetError(FinslerError, ValueError):
    """Requested derivative orders exceed what the jet engine supports."""


class MetricSpecError(FinslerError, ValueError):
    """Invalid metric specification (bad field, bad value, violated invariant)."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line

    def as_dict(self):
        out = {"error": "metric_spec", "message": str(self)}
        if self.field is not None:
            out["field"] = self.field
        if self.line is not None:
            out["line"] = self.line
        return out


class DegenerateFlagError(FinslerError, ValueError):
    """Flag pole and transverse edge are (numerically) parallel."""


class RankAmbiguityError(FinslerError):
    """Singular-value gap too small to decide a numerical rank."""


class PreconditionError(FinslerError, ValueError):
    """An operation's stated precondition does not hold."""
