"""
Exception hierarchy for dhvae.

Every error derives from :class:`DHVAEError` and from the builtin
exception a caller would naturally expect, so both
``except DHVAEError`` and ``except ValueError`` work.
"""

from __future__ import annotations

from typing import Any


class DHVAEError(Exception):
    """Base class for all library errors."""


class ConfigError(DHVAEError, ValueError):
    """Invalid configuration value or unknown configuration key."""


class ShapeError(DHVAEError, ValueError):
    """Array or tensor shapes are inconsistent."""


class IngestionError(DHVAEError, ValueError):
    """A volume file is missing, unreadable or contains bad voxels."""


class PairingError(DHVAEError, ValueError):
    """An image volume and its mask do not belong together."""


class FormatError(DHVAEError, ValueError):
    """
    A container file is corrupt.

    Parameters
    ----------
    message : str
        Human readable description.
    offset : int
        Byte offset at which the corruption was detected.
    """

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DomainError(DHVAEError, ValueError):
    """A value lies outside the domain of the operation."""


class InsufficientSamplesError(DHVAEError, ValueError):
    """Too few samples to compute a statistic."""


class RangeError(DHVAEError, IndexError):
    """An index range falls outside the addressed volume."""


class LeakageError(DHVAEError, ValueError):
    """A subject appears on both sides of a train/test split."""


class NumericError(DHVAEError, ArithmeticError):
    """
    A computation produced non-finite values.

    Parameters
    ----------
    message : str
        Human readable description.
    stage : str, optional
        Name of the computation stage that failed.
    diagnostics : dict, optional
        Named scalar diagnostics (component values, counts).
    """

    def __init__(
        self,
        message: str,
        stage: str | None = None,
        diagnostics: dict[str, Any] | None = None
    ) -> None:
        details = ''
        if stage is not None:
            details += f" [stage: {stage}]"
        if diagnostics:
            joined = ', '.join(f"{k}={v}" for k, v in diagnostics.items())
            details += f" [{joined}]"
        super().__init__(message + details)
        self.stage = stage
        self.diagnostics = dict(diagnostics or {})


class GenerationError(DHVAEError, RuntimeError):
    """
    Synthetic sampling could not produce the requested pairs.

    Parameters
    ----------
    message : str
        Human readable description.
    acceptance_rate : float
        Fraction of drawn samples that passed the acceptance rule.
    """

    def __init__(self, message: str, acceptance_rate: float) -> None:
        super().__init__(
            f"{message} (acceptance rate {acceptance_rate:.4f})"
        )
        self.acceptance_rate = acceptance_rate


class ReportError(DHVAEError, OSError):
    """Report files could not be written."""


__all__ = [
    'DHVAEError',
    'ConfigError',
    'ShapeError',
    'IngestionError',
    'PairingError',
    'FormatError',
    'DomainError',
    'InsufficientSamplesError',
    'RangeError',
    'LeakageError',
    'NumericError',
    'GenerationError',
    'ReportError',
]
