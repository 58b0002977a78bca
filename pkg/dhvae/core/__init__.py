"""
Core infrastructure for dhvae.

This module contains the error hierarchy and the registries for
pluggable components.
"""

from dhvae.core.errors import (
    ConfigError,
    DHVAEError,
    DomainError,
    FormatError,
    GenerationError,
    IngestionError,
    InsufficientSamplesError,
    LeakageError,
    NumericError,
    PairingError,
    RangeError,
    ReportError,
    ShapeError,
)
from dhvae.core.registry import (
    ExtractorRegistry,
    ReaderRegistry,
    Registry,
    SelectorRegistry,
)

__all__ = [
    'ConfigError',
    'DHVAEError',
    'DomainError',
    'ExtractorRegistry',
    'FormatError',
    'GenerationError',
    'IngestionError',
    'InsufficientSamplesError',
    'LeakageError',
    'NumericError',
    'PairingError',
    'RangeError',
    'ReaderRegistry',
    'Registry',
    'ReportError',
    'SelectorRegistry',
    'ShapeError',
]
