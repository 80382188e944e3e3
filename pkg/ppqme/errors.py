"""
Structured errors for ppqme.

Every error carries a message, the offending quantity (a config key, an integral name,
a time) and the process exit code the CLI maps it to.
"""

from typing import Optional


class PpqmeError(Exception):
    exit_code = 1

    def __init__(self, message: str, quantity: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.quantity = quantity

    def __str__(self) -> str:
        if self.quantity is None:
            return self.message
        return f"{self.message} [{self.quantity}]"


class ConfigError(PpqmeError, ValueError):
    exit_code = 2


class NumericalError(PpqmeError):
    exit_code = 3


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of a special function or unit conversion."""


class DivergentIntegral(NumericalError):
    """A frequency integral does not converge at low frequency."""


class IntegrationFailure(NumericalError):
    def __init__(self, message: str, last_good_time: float, quantity: Optional[str] = None):
        super().__init__(message, quantity)
        self.last_good_time = last_good_time


class TraceDriftError(IntegrationFailure):
    pass


class ValidationFailure(PpqmeError):
    exit_code = 4
