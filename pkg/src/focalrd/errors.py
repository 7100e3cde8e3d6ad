"""Exception hierarchy and CLI exit-code mapping."""
from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .bounds import BoundReport


class FocalRDError(Exception):
    """Root of all focalrd errors."""


class ValidationError(FocalRDError, ValueError):
    """Invalid input: bad Pmf, mismatched lengths, unparseable source string."""


class InstanceTooLargeError(FocalRDError):
    """The exhaustive oracle refused an instance beyond its guard rail."""


class BoundOrderError(FocalRDError):
    """A BoundReport broke the converse <= exact <= log <= linear chain."""

    def __init__(self, message: str, report: BoundReport | None = None) -> None:
        super().__init__(message)
        self.report = report


EXIT_VALIDATION = 1
EXIT_GUARD_RAIL = 2


def exit_code_for(exc: BaseException) -> int:
    """Guard-rail rejections exit 2; every other expected failure exits 1."""
    if isinstance(exc, InstanceTooLargeError):
        return EXIT_GUARD_RAIL
    return EXIT_VALIDATION
