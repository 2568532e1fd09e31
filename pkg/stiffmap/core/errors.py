from typing import Optional


class StiffmapError(Exception):
    """Base class for every error raised on purpose by stiffmap."""


class MeshError(StiffmapError, ValueError):
    """A mesh or deformation state violates a load-time invariant."""


class ParseError(MeshError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:"
        if line is not None:
            location += f"{line}:"
        super().__init__(f"{location} {message}" if location else message)


class ConstraintError(StiffmapError, ValueError):
    """Constraint rows cannot be reduced (conflict, open ring, degenerate ring)."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(message)


class InfeasibleStartError(StiffmapError, ValueError):
    """The objective is not finite where a minimization has to start."""


class TangledInputError(StiffmapError, ValueError):
    """Stiffening was asked to start from a map with inverted elements."""


class CertificationError(StiffmapError, ValueError):
    """A quasi-isometry constant or bound is undefined for the given input."""


class ConfigError(StiffmapError, ValueError):
    """The run configuration or a command-line override is invalid."""
