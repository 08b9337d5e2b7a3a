"""Custom Exceptions.

This module defines the exception classes raised by the modelling, verification,
simulation and model file layers.
"""
from __future__ import annotations

from typing import Any, Sequence


class NasVerifyError(Exception):
    """Base class for every error raised by nasverify."""

    pass


class InvalidBounds(NasVerifyError, ValueError):
    """Exception raised when a delay or jitter interval is negative or inverted."""

    pass


class InvalidPeriod(NasVerifyError, ValueError):
    """Exception raised when a period specification violates its invariants."""

    pass


class NotComposable(NasVerifyError):
    """Exception raised when interface locations needed by a composition are absent or ambiguous."""

    pass


class ChannelMismatch(NasVerifyError):
    """Exception raised when parallel members do not satisfy channel matching."""

    def __init__(self, message: str, violations: Sequence[Any] = ()):
        super().__init__(message)
        self.violations = list(violations)


class MalformedNetwork(NasVerifyError):
    """Exception raised when an emitting edge has no receiving partner anywhere in the network."""

    pass


class EmptyZone(NasVerifyError):
    """Exception raised when an operation requiring a non-empty zone receives an empty one."""

    pass


class UnknownName(NasVerifyError, KeyError):
    """Exception raised when a state formula references an unknown automaton or location."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class ResourceExhausted(NasVerifyError):
    """Exception raised when exploration hits its state cap."""

    def __init__(self, message: str, states_explored: int):
        super().__init__(message)
        self.states_explored = states_explored


class InvalidConfig(NasVerifyError, ValueError):
    """Exception raised when boiler parameters or simulation settings are invalid."""

    pass


class DivisionDegenerate(NasVerifyError, ArithmeticError):
    """Exception raised when every side of a slack computation has a zero rate."""

    pass


class ParseError(NasVerifyError):
    """Exception raised when a model document cannot be parsed.

    Attributes:
        location: 1-based (line, column) of the offending node, or None when unknown.
    """

    def __init__(self, location: tuple[int, int] | None, message: str):
        self.location = location
        self.message = message
        where = f"line {location[0]}, column {location[1]}: " if location else ""
        super().__init__(f"{where}{message}")


class ResolutionError(ParseError):
    """Exception raised when a time value is not representable at the declared resolution."""

    pass


class UnsupportedFeature(NasVerifyError):
    """Exception raised when the UPPAAL exporter meets a construct outside its subset."""

    pass
