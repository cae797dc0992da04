from __future__ import annotations

from typing import Optional


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration.

    `key` is the dotted config key at fault when one can be named.
    """

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        super().__init__(message)
        self.key = key


class NumericalError(RuntimeError):
    """A computed result cannot be trusted (non-finite values, unconverged truncation)."""


class IntegrationError(NumericalError):
    def __init__(self, message: str, time_reached: float) -> None:
        super().__init__(f"{message} (reached t={time_reached:.6g} ns)")
        self.time_reached = float(time_reached)
