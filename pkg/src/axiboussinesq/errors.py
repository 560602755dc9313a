"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration value. Carries the offending key and line when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key {key}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class SchedulingError(RuntimeError):
    """A Duhamel evaluation asked for history that is not available."""


class DivergedError(RuntimeError):
    """Picard iteration failed to contract.

    Attributes
    ----------
    ratios : list of float
        Successive contraction ratios observed before giving up.
    """

    def __init__(self, message: str, ratios=None, t0: float | None = None, window: float | None = None):
        super().__init__(message)
        self.ratios = list(ratios or [])
        self.t0 = t0
        self.window = window
