"""Antenna GSM combined with a physical-optics reflector.

The antenna field ``H = j k0 / sqrt(Z0) sum f_b u_dual_b^(4)`` induces the
PO current ``J = 2 n x H`` on the illuminated PEC surface. Its regular
expansion at the antenna is ``a = rho f`` with

    rho[a, b] = -2 j k0^2 <u_a^(4), n x u_dual_b^(4)>

and the antenna closes the loop through ``f = T v + (S - 1)/2 a``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Tuple

import numpy as np

from .errors import GeometryError, ValidationError
from .geometry import TriangleMesh
from .gsm import Gsm, PortWaves
from .mom import lu_factor_checked, lu_solve, point_triangle_distance
from .quadrature import DUNAVANT_12, triangle_points
from .units import ETA0
from .waves import CoeffVector, eval_waves, wave_count
from .wigner import Frame

logger = logging.getLogger(__name__)

Shadowing = Literal["none", "cull"]


@dataclass(frozen=True, eq=False)
class PoRho:
    matrix: np.ndarray
    shadowing: Shadowing
    frame: Frame
    l_max: int
    k0: float
    illuminated: np.ndarray  # triangle indices carrying PO current


def illuminated_triangles(mesh: TriangleMesh, frame: Frame, shadowing: Shadowing) -> np.ndarray:
    if shadowing not in ("none", "cull"):
        raise ValidationError(f"unknown shadowing policy {shadowing!r}")
    if shadowing == "none":
        return np.arange(mesh.n_triangles)
    to_antenna = np.asarray(frame.origin, dtype=float)[None, :] - mesh.centroids
    facing = np.einsum("ij,ij->i", mesh.normals, to_antenna) > 0.0
    return np.flatnonzero(facing)


def _surface_samples(mesh: TriangleMesh, tris: np.ndarray):
    pts = triangle_points(mesh.corners[tris], DUNAVANT_12).reshape(-1, 3)
    w = (mesh.areas[tris][:, None] * DUNAVANT_12.weights[None, :]).ravel()
    normals = np.repeat(mesh.normals[tris], DUNAVANT_12.size, axis=0)
    return pts, w, normals


def _global_waves(frame: Frame, l_max: int, k0: float, pts: np.ndarray) -> np.ndarray:
    return eval_waves(l_max, 4, k0, frame.to_local(pts)) @ frame.rotation.T


def po_rho(
    mesh: TriangleMesh,
    frame: Frame,
    k0: float,
    l_max: int,
    shadowing: Shadowing = "cull",
    *,
    chunk: int = 256,
) -> PoRho:
    if mesh.n_triangles and not mesh.material.is_pec:
        raise ValidationError("physical optics needs a PEC structure")
    n_wave = wave_count(l_max)
    rho = np.zeros((n_wave, n_wave), dtype=complex)
    tris = illuminated_triangles(mesh, frame, shadowing) if mesh.n_triangles else np.zeros(0, int)
    if mesh.n_triangles:
        dist = point_triangle_distance(np.asarray(frame.origin, dtype=float)[None, :], mesh)[0, 0]
        if dist <= 1e-9 * float(np.max(mesh.max_edge_length)):
            raise GeometryError(f"antenna origin {frame.origin} lies on the surface")
    dual = np.arange(n_wave) ^ 1
    for start in range(0, tris.shape[0], chunk):
        pts, w, normals = _surface_samples(mesh, tris[start : start + chunk])
        u = _global_waves(frame, l_max, k0, pts)
        n_cross = np.cross(normals[:, None, :], u[:, dual, :])
        rho += np.einsum("q,qax,qbx->ab", w, u, n_cross)
    rho *= -2j * k0 * k0
    logger.info(
        "PO rho: %d of %d triangles illuminated (%s), %d waves",
        tris.shape[0],
        mesh.n_triangles,
        shadowing,
        n_wave,
    )
    return PoRho(matrix=rho, shadowing=shadowing, frame=frame, l_max=l_max, k0=k0, illuminated=tris)


def _check(gsm: Gsm, rho: PoRho) -> None:
    if rho.matrix.shape[0] != gsm.n_wave:
        raise ValidationError(f"rho has {rho.matrix.shape[0]} waves, GSM has {gsm.n_wave}")


def feedback_matrix(gsm: Gsm, rho: PoRho) -> np.ndarray:
    """``(S - 1)/2 rho``."""
    _check(gsm, rho)
    return gsm.half_scattering @ rho.matrix


def spectral_radius(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def _inner_solve(gsm: Gsm, rho: PoRho, rhs: np.ndarray) -> np.ndarray:
    feedback = feedback_matrix(gsm, rho)
    radius = spectral_radius(feedback)
    if radius >= 1.0:
        logger.warning("antenna-reflector feedback spectral radius %.3f >= 1", radius)
    lu = lu_factor_checked(np.eye(gsm.n_wave) - feedback)
    return lu_solve(lu, rhs)


def po_outgoing(gsm: Gsm, rho: PoRho, v: PortWaves) -> CoeffVector:
    """``f = [1 - (S - 1)/2 rho]^-1 T v``."""
    if v.n_port != gsm.n_port:
        raise ValidationError(f"{v.n_port} port waves for {gsm.n_port} ports")
    return CoeffVector(_inner_solve(gsm, rho, gsm.t @ v.values), "f")


def neumann_outgoing(gsm: Gsm, rho: PoRho, v: PortWaves, terms: int) -> List[CoeffVector]:
    """Partial sums of the multiple-reflection series for ``f``, one per order."""
    if terms < 1:
        raise ValidationError(f"need at least one Neumann term, got {terms}")
    feedback = feedback_matrix(gsm, rho)
    term = gsm.t @ v.values
    total = term.copy()
    sums = [CoeffVector(total.copy(), "f")]
    for _ in range(terms - 1):
        term = feedback @ term
        total = total + term
        sums.append(CoeffVector(total.copy(), "f"))
    return sums


def po_gamma_fullcoupled(gsm: Gsm, rho: PoRho) -> np.ndarray:
    """``Gamma + 1/2 R rho [1 - (S - 1)/2 rho]^-1 T``."""
    _check(gsm, rho)
    return gsm.gamma + 0.5 * gsm.r @ rho.matrix @ _inner_solve(gsm, rho, gsm.t)


def po_gamma_neumann(gsm: Gsm, rho: PoRho, terms: int) -> np.ndarray:
    """Full-coupled reflection with the feedback inverse truncated to ``terms`` terms."""
    if terms < 1:
        raise ValidationError(f"need at least one Neumann term, got {terms}")
    feedback = feedback_matrix(gsm, rho)
    term = gsm.t
    total = gsm.t.copy()
    for _ in range(terms - 1):
        term = feedback @ term
        total = total + term
    return gsm.gamma + 0.5 * gsm.r @ rho.matrix @ total


def po_gamma_firstorder(gsm: Gsm, rho: PoRho) -> np.ndarray:
    """``Gamma + 1/2 R rho T``: single reflection only."""
    _check(gsm, rho)
    return gsm.gamma + 0.5 * gsm.r @ rho.matrix @ gsm.t


def second_term_bound(gsm: Gsm, rho: PoRho) -> float:
    """Upper bound on ``|full-coupled - first-order|`` in the spectral norm."""
    feedback = feedback_matrix(gsm, rho)
    eps = float(np.linalg.norm(feedback, 2)) if feedback.size else 0.0
    if eps >= 1.0:
        return math.inf
    left = float(np.linalg.norm(0.5 * gsm.r @ rho.matrix, 2)) if gsm.r.size else 0.0
    right = float(np.linalg.norm(gsm.t, 2)) if gsm.t.size else 0.0
    return left * eps * right / (1.0 - eps)


def po_currents(
    rho: PoRho, mesh: TriangleMesh, f: CoeffVector
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """PO current density ``2 n x H`` at quadrature points of illuminated triangles.

    Returns (points, weights, J).
    """
    if f.values.shape[0] != wave_count(rho.l_max):
        raise ValidationError("outgoing expansion does not match rho's truncation")
    if rho.illuminated.shape[0] == 0:
        return np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3), dtype=complex)
    pts, w, normals = _surface_samples(mesh, rho.illuminated)
    u = _global_waves(rho.frame, rho.l_max, rho.k0, pts)
    dual = np.arange(u.shape[1]) ^ 1
    h = 1j * rho.k0 / math.sqrt(ETA0) * np.einsum("qax,a->qx", u[:, dual, :], f.values)
    return pts, w, 2.0 * np.cross(normals, h)


def po_far_field(
    rho: PoRho, mesh: TriangleMesh, f: CoeffVector, directions: np.ndarray
) -> np.ndarray:
    """Far-field pattern (``E ~ F exp(-j k r) / r``) of the PO currents."""
    pts, w, current = po_currents(rho, mesh, f)
    dirs = np.atleast_2d(directions)
    if pts.shape[0] == 0:
        return np.zeros((dirs.shape[0], 3), dtype=complex)
    phase = np.exp(1j * rho.k0 * dirs @ pts.T) * w[None, :]
    integral = phase @ current
    transverse = integral - np.einsum("dx,dx->d", integral, dirs)[:, None] * dirs
    return -1j * rho.k0 * ETA0 / (4.0 * math.pi) * transverse
