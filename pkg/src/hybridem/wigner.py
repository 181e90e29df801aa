"""Rotation and axial translation of wave coefficients.

Both matrices are obtained by projecting rotated or translated angular
functions back onto the harmonic basis with quadrature rules that are exact
for the band-limited integrands, the same way a rotation is read off from
harmonics sampled at rotated points.

Conventions: a frame rotated by ``Q = Rz(alpha) Ry(beta) Rz(gamma)`` and
shifted by ``delta`` along its own z axis places local points at
``r_global = Q (r_local + delta z)``. Coefficients map as
``a_local = T a_global`` with ``T = R(delta) D(alpha, beta, gamma)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .quadrature import gauss_interval, sphere_grid_for_degree
from .waves import real_harmonics, vector_harmonics, wave_count

logger = logging.getLogger(__name__)


def euler_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """ZYZ rotation ``Rz(alpha) Ry(beta) Rz(gamma)``."""

    def rz(a: float) -> np.ndarray:
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def ry(b: float) -> np.ndarray:
        c, s = math.cos(b), math.sin(b)
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])

    return rz(alpha) @ ry(beta) @ rz(gamma)


@dataclass(frozen=True)
class Frame:
    """Antenna coordinate frame: origin (m) and ZYZ Euler angles (rad)."""

    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    euler: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def rotation(self) -> np.ndarray:
        return euler_matrix(*self.euler)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - np.asarray(self.origin, dtype=float)) @ self.rotation

    def to_global(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self.rotation.T + np.asarray(self.origin, dtype=float)

    def vectors_to_global(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors) @ self.rotation.T

    @classmethod
    def from_pose(cls, delta: float, euler: Sequence[float]) -> "Frame":
        """Frame of an antenna repositioned by ``delta`` along its rotated z axis."""
        e = tuple(float(x) for x in euler)
        origin = euler_matrix(*e) @ np.array([0.0, 0.0, float(delta)])
        return cls(origin=tuple(float(x) for x in origin), euler=e)  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class WignerTransform:
    matrix: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    delta: float
    euler: Tuple[float, float, float]
    l_in: int
    l_out: int


def euler_from_matrix(q: np.ndarray) -> Tuple[float, float, float]:
    """ZYZ Euler angles of a proper rotation matrix."""
    q = np.asarray(q, dtype=float)
    beta = math.acos(max(-1.0, min(1.0, q[2, 2])))
    if abs(math.sin(beta)) < 1e-12:
        if q[2, 2] > 0:
            return math.atan2(q[1, 0], q[0, 0]), beta, 0.0
        return math.atan2(-q[1, 0], -q[0, 0]), beta, 0.0
    return math.atan2(q[1, 2], q[0, 2]), beta, math.atan2(q[2, 1], -q[2, 0])


def rotation_matrix(alpha: float, beta: float, gamma: float, l_max: int) -> np.ndarray:
    """Real block-diagonal rotation acting on wave coefficients.

    Row/column order is the linear wave order; the same block acts on both
    polarizations, so the matrix is the scalar harmonic matrix kron I2.
    """
    return rotation_from_matrix(euler_matrix(alpha, beta, gamma), l_max)


def rotation_from_matrix(q: np.ndarray, l_max: int) -> np.ndarray:
    """Coefficient rotation for a frame rotated by ``q``; ``D(q1 q2) = D(q2) D(q1)``."""
    q = np.asarray(q, dtype=float)
    grid = sphere_grid_for_degree(l_max)
    dirs = grid.directions
    rotated = dirs @ q.T
    rot_theta = np.arccos(np.clip(rotated[:, 2], -1.0, 1.0))
    rot_phi = np.arctan2(rotated[:, 1], rotated[:, 0])
    y = real_harmonics(l_max, grid.theta, grid.phi)
    yq = real_harmonics(l_max, rot_theta, rot_phi)
    d = (y * grid.weights[:, None]).T @ yq
    d *= _block_mask(l_max)
    return np.kron(d, np.eye(2))


def _block_mask(l_max: int) -> np.ndarray:
    ls = np.concatenate([np.full(2 * l + 1, l) for l in range(1, l_max + 1)])
    return (ls[:, None] == ls[None, :]).astype(float)


def axial_translation(
    delta: float, k0: float, l_max: int, *, l_out: Optional[int] = None
) -> np.ndarray:
    """Translation along z for regular and (outside |delta|) outgoing waves.

    Rows follow ``l_out`` (defaults to ``l_max``) and columns ``l_max``.
    The matrix is m-diagonal and satisfies ``R(-delta) = R(delta).T``.
    """
    lo = l_max if l_out is None else int(l_out)
    if abs(delta) > 0.5 * min(l_max, lo) / k0:
        logger.warning(
            "translation %.4g m exceeds 0.5 L/k0 = %.4g m; expansion accuracy degrades",
            delta,
            0.5 * min(l_max, lo) / k0,
        )
    if delta == 0.0 and lo == l_max:
        return np.eye(wave_count(l_max), dtype=complex)
    l_big = max(l_max, lo)
    n_theta = l_max + lo + int(math.ceil(abs(k0 * delta))) + 24
    n_phi = 2 * l_big + 4
    x, wx = gauss_interval(n_theta, -1.0, 1.0)
    theta = np.arccos(x)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    w = np.outer(wx, np.full(n_phi, 2.0 * math.pi / n_phi)).ravel()
    phase = np.exp(-1j * k0 * delta * np.cos(tt.ravel()))
    a1, a2, _ = vector_harmonics(l_big, tt.ravel(), pp.ravel())
    basis = np.empty((a1.shape[0], 2 * a1.shape[1], 3))
    basis[:, 0::2] = a1
    basis[:, 1::2] = a2
    cols = basis[:, : wave_count(l_max)]
    rows = basis[:, : wave_count(lo)]
    wp = (w * phase)[:, None]
    c = sum(rows[:, :, x].T @ (wp * cols[:, :, x]) for x in range(3))
    n_rows = _parity(lo)
    n_cols = _parity(l_max)
    return c * (1j ** (n_cols[None, :] - n_rows[:, None]))


def _parity(l_max: int) -> np.ndarray:
    """n = l + 1 - tau for every wave in linear order."""
    out = []
    for l in range(1, l_max + 1):  # noqa: E741
        for _ in range(2 * l + 1):
            out.extend([l, l - 1])
    return np.array(out, dtype=np.int64)


def transform_matrix(
    delta: float,
    euler: Sequence[float],
    k0: float,
    l_max: int,
    *,
    l_out: Optional[int] = None,
) -> WignerTransform:
    """``T = R(delta) D(euler)``; columns follow ``l_max``, rows ``l_out``."""
    e = tuple(float(x) for x in euler)
    d = rotation_matrix(e[0], e[1], e[2], l_max)
    r = axial_translation(float(delta), k0, l_max, l_out=l_out)
    return WignerTransform(
        matrix=r @ d,
        rotation=d,
        translation=r,
        delta=float(delta),
        euler=e,  # type: ignore[arg-type]
        l_in=l_max,
        l_out=l_max if l_out is None else int(l_out),
    )
