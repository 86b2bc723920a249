"""Typed error taxonomy shared by the whole package.

Every failure mode that callers (library users, the Monte Carlo harness, the
CLI) must distinguish gets its own exception class.  All of them derive from
:class:`RbdsError`, which carries a stable machine-readable ``code`` used by
the CLI's JSON diagnostics and by the harness' error accounting.
"""

from __future__ import annotations

__all__ = [
    "RbdsError",
    "NonFiniteInput",
    "NonPositiveEpsilon",
    "SeriesTooShort",
    "ConstantSeries",
    "DegenerateScale",
    "NonPositiveVariance",
    "ExponentNegative",
    "OracleTooLarge",
    "PatternTooLarge",
    "NonStationaryParams",
    "ZeroResidual",
    "InvalidPatternParams",
]


class RbdsError(ValueError):
    """Base class for all package errors; ``code`` is machine-readable."""

    code = "RbdsError"


class NonFiniteInput(RbdsError):
    """A series value is NaN or infinite."""

    code = "NonFiniteInput"


class NonPositiveEpsilon(RbdsError):
    """The proximity threshold must be > 0."""

    code = "NonPositiveEpsilon"


class SeriesTooShort(RbdsError):
    """The series is too short for the requested computation."""

    code = "SeriesTooShort"


class ConstantSeries(RbdsError):
    """Sample variance is zero, so a scale-relative threshold is undefined."""

    code = "ConstantSeries"


class DegenerateScale(RbdsError):
    """The threshold collapses the indicator structure (all 0s or all 1s)."""

    code = "DegenerateScale"


class NonPositiveVariance(RbdsError):
    """A variance estimate came out non-positive; the statistic is unreliable."""

    code = "NonPositiveVariance"


class ExponentNegative(RbdsError):
    """An overlap parameter is outside the range where the closed form holds."""

    code = "ExponentNegative"


class OracleTooLarge(RbdsError):
    """Exhaustive enumeration would exceed the guard on tuple count."""

    code = "OracleTooLarge"


class PatternTooLarge(RbdsError):
    """The pattern has more vertices than there are sample points."""

    code = "PatternTooLarge"


class NonStationaryParams(RbdsError):
    """Volatility recursion parameters outside the stationary region."""

    code = "NonStationaryParams"


class ZeroResidual(RbdsError):
    """log(u^2) is undefined for an exactly zero residual."""

    code = "ZeroResidual"


class InvalidPatternParams(RbdsError):
    """Pattern family parameters outside their defined ranges."""

    code = "InvalidPatternParams"
