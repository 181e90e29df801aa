"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations

from typing import Optional


class HybridemError(Exception):
    """Root of every error raised by hybridem."""


class MeshError(HybridemError, ValueError):
    """Mesh file could not be parsed or the surface is not a valid 2-manifold."""


class ValidationError(HybridemError, ValueError):
    """Bad argument or bad scenario file."""


class GeometryError(ValidationError):
    """Antenna placement incompatible with the structure surface."""


class SolverError(HybridemError, RuntimeError):
    """A dense system could not be factorized or solved to tolerance."""

    def __init__(self, message: str, *, rcond: Optional[float] = None) -> None:
        if rcond is not None:
            message = f"{message} (rcond estimate {rcond:.3e})"
        super().__init__(message)
        self.rcond = rcond
