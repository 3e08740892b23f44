"""Exception hierarchy for the risk engine.

Exit-code mapping used by the CLI:
    ConfigError        -> 2
    DataError          -> 3
    InfeasibleViewError / InfeasibleError -> 4
    NumericDomainError / DegenerateError  -> 5
Plain ValueError raised by precondition guards is treated as a config error.
"""

from __future__ import annotations


class EpcovarError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EpcovarError):
    """Invalid run configuration (bad flag, bad views file, unsupported combo)."""


class DataError(EpcovarError):
    """Input data unusable (missing column, too few rows, unparseable cell)."""


class InfeasibleViewError(EpcovarError):
    """A view cannot be expressed on the given panel (e.g. empty indicator bin)."""


class InfeasibleError(EpcovarError):
    """The constrained entropy minimization admits no solution within tolerance.

    ``residual`` carries the best attained constraint violation as a certificate.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DegenerateError(EpcovarError):
    """Posterior mass collapsed below the positivity floor.

    Raised instead of silently clipping, so pathological (e.g. bimodal,
    split-support) posteriors surface to the caller. ``min_log_weight`` is the
    natural log of the smallest posterior weight encountered.
    """

    def __init__(self, message: str, min_log_weight: float):
        super().__init__(message)
        self.min_log_weight = min_log_weight


class NumericDomainError(EpcovarError):
    """A closed-form expression was evaluated outside its valid domain."""
