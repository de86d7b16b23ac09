"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class DualCbfError(Exception):
    """Base class; ``code`` is emitted in the CLI's machine-readable error JSON."""

    code = "error"


class ParseError(DualCbfError):
    code = "parse_error"


class NonManifoldError(DualCbfError):
    code = "non_manifold"


class DegenerateTriangleError(DualCbfError):
    code = "degenerate_triangle"


class InvalidParamError(DualCbfError):
    code = "invalid_param"


class CoincidentPointsError(DualCbfError):
    code = "coincident_points"


class QuadratureFailure(DualCbfError):
    code = "quadrature_failure"


class BreakdownError(DualCbfError):
    code = "breakdown"


class SingularMatrixError(DualCbfError):
    code = "singular"

    def __init__(self, message: str, cell: int | None = None):
        super().__init__(message)
        self.cell = cell


class RankZeroError(DualCbfError):
    code = "rank_zero"


class DimensionMismatchError(DualCbfError):
    code = "dimension_mismatch"


class InnerSolveFailure(DualCbfError):
    code = "inner_solve_failure"


class MismatchedSweepError(DualCbfError):
    code = "mismatched_sweep"


class DegenerateRangeError(DualCbfError):
    code = "degenerate_range"


class NonConvergentSeriesError(DualCbfError):
    code = "nonconvergent_series"


class ConfigError(DualCbfError):
    code = "config_error"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
