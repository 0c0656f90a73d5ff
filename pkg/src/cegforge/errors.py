"""Exception types shared across the package.

Every error raised on a user-facing path derives from :class:`CegError` so
callers (CLI, HTTP service) can map failures to exit codes / status codes
without string matching.
"""

from __future__ import annotations

__all__ = [
    "CegError",
    "ParseError",
    "ValidationError",
    "UnknownNameError",
    "ConfigurationError",
    "IncompleteError",
    "ConflictError",
]


class CegError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CegError):
    """Malformed input text (CSV, GeoJSON, archives)."""


class ValidationError(CegError):
    """Structurally valid input that violates a contract."""


class UnknownNameError(CegError, KeyError):
    """A name lookup failed (column, vertex id, stage, category, palette).

    Subclasses KeyError so mapping-style call sites behave as expected,
    but str() returns the plain message rather than KeyError's repr.
    """

    def __str__(self) -> str:  # KeyError quotes its argument; we do not want that
        return Exception.__str__(self)


class ConfigurationError(CegError):
    """An unsupported or inconsistent configuration was requested."""


class IncompleteError(CegError):
    """An operation needs more input before it can run (e.g. unfinished
    colouring, missing prior rows, absent upstream artifact)."""


class ConflictError(CegError):
    """State-dependent refusal: stale revision or out-of-order operation."""
