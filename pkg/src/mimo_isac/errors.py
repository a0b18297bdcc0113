"""Exception hierarchy shared by the solver, the pipeline and the CLI."""


class IsacError(Exception):
    """Base class for every error raised by this package."""


class DomainError(IsacError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SizeError(IsacError, ValueError):
    """Problem dimensions exceed a guard (brute-force oracles only)."""


class NumericError(IsacError, ArithmeticError):
    """A numerical routine produced an untrustworthy result."""


class ConfigError(IsacError, ValueError):
    """Inconsistent configuration or mode/scenario mismatch."""


class ThresholdsInfeasibleError(IsacError):
    """The performance floors lie outside the achievable region (r = 0 infeasible)."""


class SolverStalledError(IsacError):
    """The feasibility engine could not decide the r = 0 subproblem."""


class ExtractionError(IsacError):
    """Rank-one extraction hit a degenerate user allocation."""

    def __init__(self, user: int, message: str):
        super().__init__(message)
        self.user = user
