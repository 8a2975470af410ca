"""Exception types shared by the compute modules and the CLI.

Each error carries the process exit code the CLI reports for it.
"""

from __future__ import annotations


class MixedMFAError(Exception):
    """Base class for all errors raised by mixed-mfa."""

    exit_code = 10


class MeasureSpecError(MixedMFAError, ValueError):
    """A cascade specification or vector assembly is invalid."""

    exit_code = 4


class ContractViolation(MixedMFAError, ValueError):
    """A kernel precondition (strictly positive, finite masses) was broken."""

    exit_code = 4


class DomainError(MixedMFAError, ValueError):
    """A point lies outside the common support of the measures involved."""

    exit_code = 4

    def __init__(self, message: str, *, measure: str | None = None, x: float | None = None):
        super().__init__(f"{measure}: {message}" if measure else message)
        self.measure = measure
        self.x = x


class ResourceLimitError(MixedMFAError, RuntimeError):
    """An enumeration or depth cap would be exceeded."""

    exit_code = 3

    def __init__(self, message: str, *, hint: str | None = None):
        super().__init__(f"{message} ({hint})" if hint else message)
        self.hint = hint


class ConfigError(MixedMFAError, ValueError):
    """A job configuration could not be parsed or validated."""

    exit_code = 2

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class SamplingError(MixedMFAError, ValueError):
    """Too few sample points were requested for a sampled estimate."""

    exit_code = 2
