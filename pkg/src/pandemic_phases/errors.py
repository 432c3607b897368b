"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class IntegrationError(ArithmeticError):
    """The ODE solution became non-finite (or the implicit solve failed)."""

    def __init__(self, message: str, day: int | None = None, theta=None):
        super().__init__(message)
        self.day = day
        self.theta = theta


class FitError(RuntimeError):
    """The optimizer could not produce a feasible parameter vector."""


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientDataError(DomainError):
    """The series is too short for the requested analysis."""
