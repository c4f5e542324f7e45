"""Exception hierarchy shared across the package.

All library-specific failures derive from :class:`DirichletLabError` so callers
(and the CLI, which maps them to exit codes) can distinguish "the input was
bad" from "the numerics gave up".
"""


class DirichletLabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DirichletLabError):
    """Invalid experiment configuration (CLI exit code 2)."""


class NumericFailure(DirichletLabError):
    """Base class for numeric breakdowns (CLI exit code 3)."""


class NonUnimodular(DirichletLabError):
    """Basis determinant is not 1 within tolerance."""


class DimensionTooLarge(DirichletLabError):
    """Dimension exceeds the enumeration feasibility bound (d > 8)."""


class NumericallyDegenerate(NumericFailure):
    """Lattice reduction or a downstream solve failed to converge."""


class WeightDimensionMismatch(DirichletLabError):
    """Weight vector sizes do not match the ambient splitting m + n = d."""


class ROutOfRange(DirichletLabError):
    """Radius-type parameter outside its admissible interval."""


class NegativeR(ROutOfRange):
    """Negative radius passed where r >= 0 is required."""


class SingularChartBlock(NumericFailure):
    """Top-left (d-1)x(d-1) block too close to singular for the chart solve."""


class DimensionMismatch(DirichletLabError):
    """Coordinate arrays have inconsistent shapes."""


class PsiInvalid(DirichletLabError):
    """Approximating function violates its monotonicity/positivity contract."""


class RInvalid(DirichletLabError):
    """Flow-radius function violates its monotonicity/positivity contract."""


class BisectionFailed(NumericFailure):
    """Monotone bracketing solve did not converge within the iteration cap."""


class HorizonTooLarge(DirichletLabError):
    """Direct-test horizon implies an infeasible candidate enumeration."""


class ToleranceTooLoose(DirichletLabError):
    """Decomposition tolerance above the accepted ceiling (1e-3)."""


class SearchExhausted(DirichletLabError):
    """Bounded covering search ran out of candidates (inconclusive, not a disproof)."""
