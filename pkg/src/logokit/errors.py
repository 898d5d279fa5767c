"""Exception types shared across the toolkit.

Every rejected input raises :class:`InputError` (a ``ValueError``), so callers
can distinguish bad data (CLI exit code 1) from internal faults (exit code 2).
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit-raised errors."""


class InputError(ToolkitError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class AnnotationParseError(InputError):
    """Annotation XML is not well-formed.

    Carries ``byte_offset`` of the failure when the underlying parser
    reports one, else -1.
    """

    def __init__(self, message: str, byte_offset: int = -1):
        super().__init__(message)
        self.byte_offset = byte_offset


class AnnotationSchemaError(InputError):
    """Annotation XML parsed but is missing or corrupting required fields."""


class ImageDecodeError(InputError):
    """An image payload could not be decoded. Carries the offending path."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path
