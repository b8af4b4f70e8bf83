"""Exception types shared across the package."""

from __future__ import annotations

from typing import Any


class ErsatzError(Exception):
    """Base class for all package errors."""


class ConfigError(ErsatzError, ValueError):
    """Inconsistent shapes, grids or configuration values.

    ``violations`` holds every problem found, not just the first.
    """

    def __init__(self, message: str | list[str]):
        if isinstance(message, str):
            self.violations = [message]
        else:
            self.violations = list(message)
        super().__init__("; ".join(self.violations))


class UnsupportedOperation(ErsatzError):
    pass


class InconsistentInput(ErsatzError, ValueError):
    pass


class InvariantViolation(ErsatzError):
    """A monitored invariant (e.g. divergence-free velocity) broke during a run."""


class BlowUpError(ErsatzError):
    """Numerical blow-up: non-finite values or sup-norm above the threshold.

    Carries the last finite state so callers can persist it.
    """

    def __init__(self, message: str, last_state: Any = None, t: float | None = None):
        super().__init__(message)
        self.last_state = last_state
        self.t = t


class SnapshotError(ErsatzError):
    pass
