"""Exception types raised across the package.

All of them derive from :class:`ValueError` so callers that only care about
"bad input" can catch one thing.
"""

from __future__ import annotations


class LGRError(ValueError):
    """Base class for package errors."""


class TrajectoryError(LGRError):
    """Invalid trajectory records, frames or intervals."""


class FormatError(LGRError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class RankDeficiencyError(LGRError):
    """The regression normal matrix is singular for this center tracer."""

    def __init__(self, message: str, center=None):
        self.center = center
        super().__init__(message)


class InsufficientNeighborsError(LGRError):
    """Fewer neighbors than an unregularized regression needs."""

    def __init__(self, message: str, center=None):
        self.center = center
        super().__init__(message)


class NoEligibleTracersError(LGRError):
    """A field computation had no tracer it could evaluate."""

    def __init__(self, message: str, diagnostics=None):
        self.diagnostics = diagnostics
        super().__init__(message)
