"""Exceptions raised by the half-trek identifiability package."""

from __future__ import annotations


class HtcError(Exception):
    """Base error for the package."""


class InvalidGraphError(HtcError):
    """Error to indicate a malformed mixed graph."""


class GraphParseError(InvalidGraphError):
    """Error to indicate an unparsable graph file line."""

    def __init__(self, line_number: int, line: str, reason: str) -> None:
        """Initialize a new parse error."""
        super().__init__(f"line {line_number}: {reason}: {line.strip()!r}")
        self.line_number = line_number
        self.line = line


class CapabilityError(HtcError):
    """Error to indicate the input exceeds a size bound."""


class PreconditionError(HtcError):
    """Error to indicate a violated operation contract."""


class FlowValidationError(HtcError):
    """Error to indicate an inconsistent flow."""


class NongenericPointError(HtcError):
    """Error to indicate a numerically singular system."""

    def __init__(self, message: str, node: int | None = None) -> None:
        """Initialize a new nongeneric point error."""
        super().__init__(message)
        self.node = node


class SamplingError(HtcError):
    """Error to indicate parameter sampling gave up."""
