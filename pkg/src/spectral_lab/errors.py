"""Exception hierarchy.

Each class carries the process exit code the command-line tool maps it to.
"""

from __future__ import annotations


class SpectralLabError(Exception):
    exit_code = 1


class InputFileError(SpectralLabError):
    """Unreadable or malformed input file."""

    exit_code = 2


class DataQualityError(SpectralLabError, ValueError):
    """NaN/Inf or otherwise unusable numeric data."""

    exit_code = 3


class ContractError(SpectralLabError, ValueError):
    """A precondition of an operation does not hold (shapes, ranges, labels)."""

    exit_code = 4


class CalibrationRefused(SpectralLabError):
    """The zeta filter has no recoverable head to anchor on."""

    exit_code = 5


class ConfigError(SpectralLabError, ValueError):
    exit_code = 6

    def __init__(self, message: str, keys: list[str] | None = None) -> None:
        super().__init__(message)
        self.keys = list(keys or [])


class NumericalError(SpectralLabError, ArithmeticError):
    """An iterative routine did not converge within its budget."""

    exit_code = 3


class DivergenceError(SpectralLabError, ValueError):
    """Zeta series evaluated in the harmonic (divergent) regime, beta <= 1."""

    exit_code = 4
