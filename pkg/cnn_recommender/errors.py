"""Exception hierarchy shared by every module.

Two families exist so the command-line front end can map failures to a
stable exit status:

* :class:`InputError` – the caller supplied something unusable (a malformed
  file, an invalid spec document, an out-of-range argument).  Exit status 2.
* :class:`ComputationError` – the inputs were well formed but the requested
  computation has no answer (a degenerate fit, no ability ceiling).  Exit
  status 1.

``InputError`` also derives from :class:`ValueError` so library callers that
only expect ``ValueError`` keep working.
"""

from __future__ import annotations

from typing import Optional


class RecommenderError(Exception):
    """Base class for all errors raised by :mod:`cnn_recommender`."""

    exit_status = 1


class InputError(RecommenderError, ValueError):
    """Unusable input data or arguments."""

    exit_status = 2


class ComputationError(RecommenderError):
    """Well-formed input for which the computation is undefined."""

    exit_status = 1


class IdxFormatError(InputError):
    """Malformed IDX file.

    ``kind`` is one of ``"magic"``, ``"truncated"`` or ``"count-mismatch"``
    and ``offset`` is the byte offset at which the problem was detected.
    """

    def __init__(self, kind: str, offset: int, message: str) -> None:
        super().__init__(f"{message} (byte offset {offset})")
        self.kind = kind
        self.offset = offset


class CifarFormatError(InputError):
    """Malformed CIFAR binary batch."""


class ImageDecodeError(InputError):
    """An image file could not be read or decoded."""

    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"cannot decode image {path}: {reason}")
        self.path = path


class DatasetError(InputError):
    """A dataset violates its structural invariants."""


class DescriptorError(InputError):
    """An image cannot be described (for example it is too small)."""


class SpecValidationError(InputError):
    """A CNN spec or params document violates its schema."""

    def __init__(self, message: str, field_path: Optional[str] = None) -> None:
        text = f"{field_path}: {message}" if field_path else message
        super().__init__(text)
        self.field_path = field_path


class CalibrationError(ComputationError):
    """The ability calibration has no valid solution."""


class MatchingError(ComputationError):
    """The matching function cannot be fitted or applied."""


class CurveError(InputError):
    """Invalid performance-curve anchors or query."""


class NoCeilingError(ComputationError):
    """The ability score is unbounded in depth (gamma == 0)."""


class SimulationError(InputError):
    """Invalid Monte-Carlo simulation arguments."""
