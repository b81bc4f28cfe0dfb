"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

from __future__ import annotations


class EvodomError(Exception):
    exit_code = 1


class ConfigError(EvodomError, ValueError):
    """Invalid configuration or parameters."""

    exit_code = 2


class NumericalError(EvodomError, ArithmeticError):
    """A numerical routine failed (non-finite values, no convergence)."""

    exit_code = 1


class DomainCollapseError(NumericalError):
    """The evolution rate rho(t) reached zero or went negative."""


class BlowUpError(NumericalError):
    exit_code = 3

    def __init__(self, message: str, t: float, partial=None):
        super().__init__(message)
        self.t = t
        self.partial = partial


class ConvergenceError(NumericalError):
    exit_code = 4


class MonotonicityError(NumericalError):
    """Upper/lower ordering broke down during monotone iteration."""


class InternalError(EvodomError, AssertionError):
    """An analytically impossible state was reached."""
