"""Error types with stable string identifiers.

Every failure mode that callers are expected to branch on carries a ``code``
attribute; the CLI maps these to exit status 3 (numerical failure) unless the
error is a usage problem.
"""

from __future__ import annotations


class AnisoError(Exception):
    """Base class for all package errors; ``code`` is a stable identifier."""

    code = "error"

    def __init__(self, message: str = "", **context):
        super().__init__(message or self.code)
        self.context = context


class PointNotInterior(AnisoError):
    code = "point-not-interior"


class DistanceIterationFailure(AnisoError):
    code = "distance-iteration-failure"


class DegenerateGradient(AnisoError):
    code = "degenerate-gradient"


class UnknownDomain(AnisoError):
    code = "unknown-domain"


class BadScale(AnisoError):
    code = "bad-scale"


class TauBracketFailure(AnisoError):
    code = "tau-bracket-failure"


class OutOfRange(AnisoError):
    code = "out-of-range"


class CoveringBudgetExceeded(AnisoError):
    code = "covering-budget-exceeded"


class EmptyScaleRange(AnisoError):
    code = "empty-scale-range"


class BadDegree(AnisoError):
    code = "bad-degree"


class EpsilonTooLarge(AnisoError):
    code = "epsilon-too-large"


class ChartConstructionFailure(AnisoError):
    code = "chart-construction-failure"


class OutsideChart(AnisoError):
    code = "outside-chart"


class McBudgetExceeded(AnisoError):
    code = "mc-budget-exceeded"


class InputNotClosed(AnisoError):
    code = "input-not-closed"


class CutoffRadiusInvalid(AnisoError):
    code = "cutoff-radius-invalid"
