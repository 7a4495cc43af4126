"""Exception hierarchy shared by every module.

All domain failures derive from :class:`LlcPartError` so the command line
can map them to exit status 1 in one place.
"""


class LlcPartError(Exception):
    """Base class for domain errors."""


class ProfileError(LlcPartError, ValueError):
    """Malformed or inconsistent profile data."""


class DomainError(LlcPartError, ValueError):
    """A way count (or other argument) outside its valid range."""


class FeasibilityError(LlcPartError, ValueError):
    """A cluster assignment violates one or more of restrictions (i)-(iv).

    ``violations`` holds the roman numerals of the broken restrictions.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


class ConfigError(LlcPartError, ValueError):
    """Invalid configuration (parameters, bandwidth model, files)."""


class BudgetError(LlcPartError):
    """A search request exceeds the configured exploration budget."""


class SimulationError(LlcPartError):
    """A policy failed during a simulation; ``time_s`` marks the instant."""

    def __init__(self, message, time_s=None):
        super().__init__(message if time_s is None else f"t={time_s:.3f}s: {message}")
        self.time_s = time_s
