"""Exception taxonomy shared across the package."""

from __future__ import annotations


class RoundsimError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(RoundsimError):
    """A constructor or function received a parameter outside its domain."""


class InvalidStateError(RoundsimError):
    """A vehicle state violates a structural invariant (radius, lane, speed)."""


class DegenerateDistributionError(RoundsimError):
    """A predictive distribution cannot produce valid samples (rejection blowup)."""


class SizeLimitError(RoundsimError):
    """A requested problem size exceeds a hard implementation limit."""


class ConfigError(RoundsimError):
    """A scenario configuration failed validation.

    Carries the dotted path of the offending field so CLI users can find it.
    """

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")
