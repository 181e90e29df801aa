"""Antenna GSM combined with a bidirectional T-matrix of the structure.

The structure maps exterior incident waves ``a_e`` and the antenna's
outgoing waves ``f`` to exterior outgoing waves ``f_e`` and the waves
reaching the antenna ``a``::

    f_e = t a_e + psi f
    a   = psi_t a_e + rho f

Interior (antenna side) and exterior truncations may differ.
"""

from __future__ import annotations

import io
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from . import formats
from .coupling import CouplingMatrix
from .errors import ValidationError
from .gsm import Gsm
from .mom import ImpedanceMatrix, lu_factor_checked, lu_solve
from .spheres import LayeredSphere, sphere_blocks
from .units import frequency_from_wavenumber
from .waves import degree_from_count, wave_count

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TMatrixBlocks:
    t: np.ndarray  # (n_ext, n_ext)
    psi: np.ndarray  # (n_ext, n_int)
    psi_t: np.ndarray  # (n_int, n_ext)
    rho: np.ndarray  # (n_int, n_int)
    frequency: float

    def __post_init__(self) -> None:
        n_ext = self.t.shape[0]
        n_int = self.rho.shape[0]
        want = {
            "t": (n_ext, n_ext),
            "psi": (n_ext, n_int),
            "psi_t": (n_int, n_ext),
            "rho": (n_int, n_int),
        }
        for name, shape in want.items():
            if getattr(self, name).shape != shape:
                raise ValidationError(
                    f"T-matrix block {name} has shape {getattr(self, name).shape}, expected {shape}"
                )

    @property
    def l_int(self) -> int:
        return degree_from_count(self.rho.shape[0])

    @property
    def l_ext(self) -> int:
        return degree_from_count(self.t.shape[0])

    @classmethod
    def empty(cls, l_int: int, l_ext: int, frequency: float) -> "TMatrixBlocks":
        n_int, n_ext = wave_count(l_int), wave_count(l_ext)
        return cls(
            t=np.zeros((n_ext, n_ext), dtype=complex),
            psi=np.eye(n_ext, n_int, dtype=complex),
            psi_t=np.eye(n_int, n_ext, dtype=complex),
            rho=np.zeros((n_int, n_int), dtype=complex),
            frequency=frequency,
        )


@dataclass(frozen=True, eq=False)
class CompositeGsm:
    """GSM of antenna plus structure, indexed by exterior waves."""

    gamma: np.ndarray
    r: np.ndarray
    t: np.ndarray
    s: np.ndarray
    l_max: int
    frequency: float
    reference_impedance: Tuple[float, ...] = ()

    def as_gsm(self) -> Gsm:
        return Gsm(
            gamma=self.gamma,
            r=self.r,
            t=self.t,
            s=self.s,
            l_max=self.l_max,
            frequency=self.frequency,
            reference_impedance=self.reference_impedance,
        )


def tmatrix_from_mom(z: ImpedanceMatrix, u1: CouplingMatrix, u4: CouplingMatrix) -> TMatrixBlocks:
    """Blocks from the structure's MoM system; ``u1`` sets the exterior truncation."""
    if u1.frame != u4.frame:
        raise ValidationError("regular and outgoing couplings must share one frame")
    if u1.p != 1 or u4.p != 4:
        raise ValidationError("expected regular (p=1) and outgoing (p=4) couplings")
    if u1.n_unknown != z.size or u4.n_unknown != z.size:
        raise ValidationError("coupling matrices do not match the impedance matrix")
    start = time.perf_counter()
    lu = z.factor()
    x1 = lu_solve(lu, u1.matrix.T)
    x4 = lu_solve(lu, u4.matrix.T)
    n_ext, n_int = u1.n_wave, u4.n_wave
    blocks = TMatrixBlocks(
        t=-u1.matrix @ x1,
        psi=np.eye(n_ext, n_int) - u1.matrix @ x4,
        psi_t=np.eye(n_int, n_ext) - u4.matrix @ x1,
        rho=-u4.matrix @ x4,
        frequency=z.frequency,
    )
    logger.info(
        "T-matrix blocks from MoM: %d exterior, %d interior waves in %.2f s",
        n_ext,
        n_int,
        time.perf_counter() - start,
    )
    return blocks


def tmatrix_analytic_sphere(
    sphere: LayeredSphere, k0: float, l_int: int, l_ext: int
) -> TMatrixBlocks:
    """Diagonal blocks of a layered sphere centered at the antenna origin."""
    l_big = max(l_int, l_ext)
    b = sphere_blocks(sphere, k0, l_big)
    n_int, n_ext = wave_count(l_int), wave_count(l_ext)
    n_min = min(n_int, n_ext)
    psi = np.zeros((n_ext, n_int), dtype=complex)
    psi_t = np.zeros((n_int, n_ext), dtype=complex)
    idx = np.arange(n_min)
    psi[idx, idx] = b.psi[:n_min]
    psi_t[idx, idx] = b.psi_t[:n_min]
    return TMatrixBlocks(
        t=np.diag(b.t[:n_ext]),
        psi=psi,
        psi_t=psi_t,
        rho=np.diag(b.rho[:n_int]),
        frequency=frequency_from_wavenumber(k0),
    )


def hybrid_gsm_t(gsm: Gsm, blocks: TMatrixBlocks) -> CompositeGsm:
    """Composite GSM seen from outside the structure."""
    if gsm.n_wave != blocks.rho.shape[0]:
        raise ValidationError(
            f"GSM has {gsm.n_wave} waves, interior T-matrix blocks {blocks.rho.shape[0]}"
        )
    n_int = gsm.n_wave
    n_ext = blocks.t.shape[0]
    d = gsm.half_scattering
    lu = lu_factor_checked(np.eye(n_int) - d @ blocks.rho)
    inv_t = lu_solve(lu, gsm.t)
    inv_d_psi_t = lu_solve(lu, d @ blocks.psi_t)
    gamma = gsm.gamma + 0.5 * gsm.r @ blocks.rho @ inv_t
    r = gsm.r @ (blocks.psi_t + blocks.rho @ inv_d_psi_t)
    t = blocks.psi @ inv_t
    s = np.eye(n_ext) + 2.0 * blocks.t + 2.0 * blocks.psi @ inv_d_psi_t
    return CompositeGsm(
        gamma=gamma,
        r=r,
        t=t,
        s=s,
        l_max=blocks.l_ext,
        frequency=gsm.frequency,
        reference_impedance=gsm.reference_impedance,
    )


# --- Persistence ---


def save_tmatrix(blocks: TMatrixBlocks, path: formats.PathLike) -> Path:
    buf = io.BytesIO()
    buf.write(formats.HTM_MAGIC)
    buf.write(np.array([blocks.l_int, blocks.l_ext], dtype="<i8").tobytes())
    buf.write(np.array([blocks.frequency], dtype="<f8").tobytes())
    for block in (blocks.t, blocks.psi, blocks.psi_t, blocks.rho):
        formats.write_matrix(buf, block)
    return formats.atomic_write(path, buf.getvalue())


def load_tmatrix(path: formats.PathLike) -> TMatrixBlocks:
    with open(path, "rb") as fh:
        formats.expect_magic(fh, formats.HTM_MAGIC, str(path))
        l_int, l_ext = (int(x) for x in formats.read_scalars(fh, np.dtype("<i8"), 2))
        frequency = float(formats.read_scalars(fh, np.dtype("<f8"), 1)[0])
        n_int, n_ext = wave_count(l_int), wave_count(l_ext)
        t = formats.read_matrix(fh, n_ext, n_ext)
        psi = formats.read_matrix(fh, n_ext, n_int)
        psi_t = formats.read_matrix(fh, n_int, n_ext)
        rho = formats.read_matrix(fh, n_int, n_int)
    return TMatrixBlocks(t=t, psi=psi, psi_t=psi_t, rho=rho, frequency=frequency)
