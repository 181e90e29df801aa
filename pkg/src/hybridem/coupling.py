"""Projection of spherical waves onto RWG functions.

``U^(p)[alpha, n] = k0 sqrt(Z0) <u_alpha^(p), psi_n>`` with the waves
expressed in an antenna frame. For PMCHWT layouts the magnetic block
``-k0 / sqrt(Z0) <u_dual^(p), psi_n>`` is appended so that an incident
regular expansion ``a`` tests to ``U^(1)^T a``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GeometryError, ValidationError
from .geometry import RwgBasis, TriangleMesh
from .mom import Formulation, point_triangle_distance, project_field
from .units import ETA0
from .waves import eval_waves, wave_count
from .wigner import Frame

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    matrix: np.ndarray  # (n_wave, n_unknown)
    p: int
    frame: Frame
    l_max: int
    formulation: Formulation

    @property
    def n_wave(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_unknown(self) -> int:
        return int(self.matrix.shape[1])


def check_antenna_clearance(mesh: TriangleMesh, frame: Frame, r_a: Optional[float]) -> float:
    """Distance from the antenna origin to the surface; raises if the antenna sphere cuts it."""
    if mesh.n_triangles == 0:
        return math.inf
    origin = np.asarray(frame.origin, dtype=float)[None, :]
    dist = float(point_triangle_distance(origin, mesh)[0, 0])
    if dist <= 1e-9 * float(np.max(mesh.max_edge_length)):
        raise GeometryError(f"antenna origin {frame.origin} lies on the surface")
    if r_a is not None and dist <= r_a:
        raise GeometryError(
            f"antenna sphere (r_a={r_a:.4g} m) intersects the structure "
            f"(closest surface point at {dist:.4g} m)"
        )
    return dist


def assemble_coupling(
    basis: RwgBasis,
    mesh: TriangleMesh,
    frame: Frame,
    k0: float,
    l_max: int,
    p: int,
    *,
    formulation: Optional[Formulation] = None,
    r_a: Optional[float] = None,
) -> CouplingMatrix:
    if p not in (1, 4):
        raise ValidationError(f"coupling kind p must be 1 or 4, got {p}")
    if basis.mesh is not mesh:
        raise ValidationError("RWG basis was built on a different mesh")
    form: Formulation = formulation or ("efie" if mesh.material.is_pec else "pmchwt")
    if p == 4:
        check_antenna_clearance(mesh, frame, r_a)
    rotation = frame.rotation
    n_wave = wave_count(l_max)
    start = time.perf_counter()

    def waves(points: np.ndarray) -> np.ndarray:
        local = frame.to_local(points)
        u = eval_waves(l_max, p, k0, local) @ rotation.T
        return np.transpose(u, (0, 2, 1))

    tested = project_field(basis, waves, chunk=64)  # (N, n_wave)
    electric = k0 * math.sqrt(ETA0) * tested.T
    if form == "pmchwt":
        dual = np.arange(n_wave) ^ 1
        magnetic = -k0 / math.sqrt(ETA0) * tested[:, dual].T
        matrix = np.concatenate([electric, magnetic], axis=1)
    else:
        matrix = electric
    logger.info(
        "coupling U%d: %d waves x %d unknowns in %.2f s",
        p,
        n_wave,
        matrix.shape[1],
        time.perf_counter() - start,
    )
    return CouplingMatrix(matrix=matrix, p=p, frame=frame, l_max=l_max, formulation=form)
