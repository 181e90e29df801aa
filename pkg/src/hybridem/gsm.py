"""Antenna generalized scattering matrices.

A GSM maps incident port waves ``v`` and an incident regular expansion
``a`` to outgoing port waves and outgoing spherical waves::

    w = Gamma v + 1/2 R a
    f = T v + 1/2 (S - 1) a

Port waves are power waves (``1/2 |v|^2`` watts), matching the spherical
wave normalization, so ``[[Gamma, R], [T, S]]`` acting on ``(v, a/2)`` is
unitary for a lossless antenna.
"""

from __future__ import annotations

import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import formats
from .coupling import assemble_coupling
from .errors import ValidationError
from .geometry import Material, RwgBasis, TriangleMesh, build_rwg
from .mom import (
    ImpedanceMatrix,
    PlaneWave,
    PortSpec,
    assemble_efie,
    excitation_plane_wave,
    lu_factor_checked,
    lu_solve,
    port_matrix,
)
from .spheres import LayeredSphere, scattering_diagonal
from .units import frequency_from_wavenumber, wavenumber
from .waves import CoeffVector, degree_from_count, linear_index, wave_count
from .wigner import Frame, WignerTransform, axial_translation, transform_matrix

logger = logging.getLogger(__name__)

DIPOLE_MODE = linear_index(2, 1, 0)
# extra degrees kept past the shift term so a move and its inverse cancel
SHIFT_MARGIN = 4
ROUND_TRIP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PortWaves:
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.atleast_1d(np.asarray(self.values, dtype=complex)))

    @property
    def n_port(self) -> int:
        return int(self.values.shape[0])

    @property
    def power(self) -> float:
        return 0.5 * float(np.sum(np.abs(self.values) ** 2))

    @classmethod
    def zeros(cls, n_port: int) -> "PortWaves":
        return cls(np.zeros(n_port, dtype=complex))


@dataclass(frozen=True, eq=False)
class Gsm:
    gamma: np.ndarray  # (n_port, n_port)
    r: np.ndarray  # (n_port, n_wave)
    t: np.ndarray  # (n_wave, n_port)
    s: np.ndarray  # (n_wave, n_wave)
    l_max: int
    frequency: float
    reference_impedance: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        n_wave = wave_count(self.l_max)
        n_port = self.gamma.shape[0]
        shapes = {
            "Gamma": (self.gamma.shape, (n_port, n_port)),
            "R": (self.r.shape, (n_port, n_wave)),
            "T": (self.t.shape, (n_wave, n_port)),
            "S": (self.s.shape, (n_wave, n_wave)),
        }
        for name, (got, want) in shapes.items():
            if tuple(got) != want:
                raise ValidationError(f"GSM block {name} has shape {tuple(got)}, expected {want}")
        refs = tuple(float(z) for z in self.reference_impedance) or (50.0,) * n_port
        if len(refs) != n_port:
            raise ValidationError(f"{len(refs)} reference impedances for {n_port} ports")
        object.__setattr__(self, "reference_impedance", refs)

    @property
    def n_port(self) -> int:
        return int(self.gamma.shape[0])

    @property
    def n_wave(self) -> int:
        return int(self.s.shape[0])

    @property
    def k0(self) -> float:
        return wavenumber(self.frequency)

    @property
    def half_scattering(self) -> np.ndarray:
        """``(S - 1) / 2``."""
        return 0.5 * (self.s - np.eye(self.n_wave))

    @classmethod
    def identity(cls, l_max: int, frequency: float) -> "Gsm":
        """Portless GSM of an absent antenna."""
        n = wave_count(l_max)
        return cls(
            gamma=np.zeros((0, 0), dtype=complex),
            r=np.zeros((0, n), dtype=complex),
            t=np.zeros((n, 0), dtype=complex),
            s=np.eye(n, dtype=complex),
            l_max=l_max,
            frequency=frequency,
        )


def gsm_apply(gsm: Gsm, v: PortWaves, a: CoeffVector) -> Tuple[PortWaves, CoeffVector]:
    if v.n_port != gsm.n_port:
        raise ValidationError(f"{v.n_port} port waves for a {gsm.n_port}-port GSM")
    if a.values.shape[0] != gsm.n_wave:
        raise ValidationError(f"{a.values.shape[0]} wave coefficients for a GSM with {gsm.n_wave}")
    w = gsm.gamma @ v.values + 0.5 * (gsm.r @ a.values)
    f = gsm.t @ v.values + gsm.half_scattering @ a.values
    return PortWaves(w), CoeffVector(f, "f")


# --- Construction ---


def gsm_from_mie_sphere(
    body: Union[float, LayeredSphere],
    material: Optional[Material] = None,
    *,
    k0: float,
    l_max: int,
) -> Gsm:
    """Portless diagonal GSM of a sphere centered at the frame origin."""
    if isinstance(body, LayeredSphere):
        sphere = body
    else:
        if material is None:
            raise ValidationError("a sphere radius needs a material")
        sphere = LayeredSphere.solid(float(body), material)
    diag = scattering_diagonal(sphere, k0, l_max)
    gsm = Gsm.identity(l_max, frequency_from_wavenumber(k0))
    return Gsm(
        gamma=gsm.gamma, r=gsm.r, t=gsm.t, s=np.diag(diag), l_max=l_max, frequency=gsm.frequency
    )


def gsm_canonical_dipole(
    frequency: float, l_max: int, *, reference_impedance: float = 50.0
) -> Gsm:
    """Matched minimum-scattering z-directed dipole.

    Radiates only the TM l=1 m=0 wave; lossless, so ``S = 1 - T T^T``.
    """
    n = wave_count(l_max)
    t = np.zeros((n, 1), dtype=complex)
    t[DIPOLE_MODE, 0] = 1.0
    return Gsm(
        gamma=np.zeros((1, 1), dtype=complex),
        r=t.T.copy(),
        t=t,
        s=np.eye(n) - t @ t.T,
        l_max=l_max,
        frequency=frequency,
        reference_impedance=(reference_impedance,),
    )


def loaded_impedance(z: ImpedanceMatrix, p: np.ndarray, refs: Sequence[float]) -> np.ndarray:
    """``Z + P diag(Z_ref) P^T``: the antenna system with ports terminated."""
    return z.z + (p * np.asarray(refs, dtype=float)[None, :]) @ p.T


def gsm_from_mom_antenna(
    mesh: TriangleMesh,
    ports: Sequence[PortSpec],
    k0: float,
    l_max: int,
    *,
    basis: Optional[RwgBasis] = None,
    workers: int = 1,
) -> Gsm:
    """Extract the GSM of a PEC antenna with delta-gap ports.

    With ports terminated in their references (``Z_L``) and ``D = diag(sqrt(Z_ref))``::

        T = -2 U1 Z_L^-1 P D
        Gamma = 1 - 2 D P^T Z_L^-1 P D
        S = 1 - 2 U1 Z_L^-1 U1^T
        R = T^T
    """
    if not mesh.material.is_pec:
        raise ValidationError("antenna extraction supports PEC antennas only")
    if not ports:
        raise ValidationError("antenna extraction needs at least one port")
    start = time.perf_counter()
    basis = basis or build_rwg(mesh)
    frequency = frequency_from_wavenumber(k0)
    z = assemble_efie(mesh, basis, frequency, workers=workers)
    p = port_matrix(basis, ports)
    refs = [port.reference_impedance for port in ports]
    u1 = assemble_coupling(basis, mesh, Frame(), k0, l_max, 1).matrix
    lu = lu_factor_checked(loaded_impedance(z, p, refs))
    d = np.sqrt(np.asarray(refs, dtype=float))
    x_port = lu_solve(lu, p * d[None, :])
    x_wave = lu_solve(lu, u1.T)
    t = -2.0 * u1 @ x_port
    gamma = np.eye(len(ports)) - 2.0 * (p * d[None, :]).T @ x_port
    s = np.eye(u1.shape[0]) - 2.0 * u1 @ x_wave
    logger.info(
        "extracted GSM: %d ports, L=%d, %d unknowns in %.2f s",
        len(ports),
        l_max,
        basis.count,
        time.perf_counter() - start,
    )
    return Gsm(
        gamma=gamma,
        r=t.T.copy(),
        t=t,
        s=s,
        l_max=l_max,
        frequency=frequency,
        reference_impedance=tuple(refs),
    )


def receive_solve(
    mesh: TriangleMesh,
    basis: RwgBasis,
    ports: Sequence[PortSpec],
    z: ImpedanceMatrix,
    wave: PlaneWave,
) -> PortWaves:
    """Port waves received from a plane wave with every port terminated."""
    p = port_matrix(basis, ports)
    refs = np.asarray([port.reference_impedance for port in ports], dtype=float)
    v = excitation_plane_wave(basis, "efie", wave, z.frequency)
    lu = lu_factor_checked(loaded_impedance(z, p, refs))
    current = lu_solve(lu, v.values)
    return PortWaves(-np.sqrt(refs) * (p.T @ current))


# --- Repositioning ---


def gsm_transform_matrix(gsm: Gsm, transform: np.ndarray) -> Gsm:
    """Express the GSM in another frame; ``transform`` maps frame to antenna coefficients."""
    tm = np.asarray(transform)
    if tm.shape[0] != gsm.n_wave:
        raise ValidationError(f"transform has {tm.shape[0]} rows, GSM has {gsm.n_wave} waves")
    l_new = degree_from_count(tm.shape[1])
    s_new = np.eye(tm.shape[1]) + tm.T @ (gsm.s - np.eye(gsm.n_wave)) @ tm
    return Gsm(
        gamma=gsm.gamma.copy(),
        r=gsm.r @ tm,
        t=tm.T @ gsm.t,
        s=s_new,
        l_max=l_new,
        frequency=gsm.frequency,
        reference_impedance=gsm.reference_impedance,
    )


def shifted_degree(l_max: int, k0: float, delta: float) -> int:
    """Truncation that holds an ``l_max`` antenna displaced by ``delta``."""
    if delta == 0.0:
        return int(l_max)
    return int(l_max) + int(math.ceil(2.0 * k0 * abs(delta))) + SHIFT_MARGIN


def shift_round_trip_error(gsm: Gsm, delta: float, l_max: int) -> float:
    """Largest change of ``T`` or ``S`` when the GSM is shifted to ``l_max`` and back."""
    if delta == 0.0:
        return 0.0
    fwd = axial_translation(delta, gsm.k0, l_max, l_out=gsm.l_max)
    back = axial_translation(-delta, gsm.k0, gsm.l_max, l_out=l_max)
    m = (fwd @ back).T
    eye = np.eye(gsm.n_wave)
    t_err = np.abs(m @ gsm.t - gsm.t).max(initial=0.0)
    s_err = np.abs(m @ (gsm.s - eye) @ m.T - (gsm.s - eye)).max(initial=0.0)
    return float(max(t_err, s_err))


def gsm_transform(
    gsm: Gsm, delta: float, euler: Sequence[float], *, l_max: Optional[int] = None
) -> Gsm:
    """Reposition an antenna by ``delta`` along its rotated z axis with ZYZ ``euler`` angles.

    The result is expressed with ``l_max`` (default ``shifted_degree``). A
    smaller ``l_max`` is accepted with a warning when the move no longer
    inverts to ``ROUND_TRIP_TOL``.
    """
    k0 = gsm.k0
    if l_max is None:
        l_max = shifted_degree(gsm.l_max, k0, delta)
    elif l_max < shifted_degree(gsm.l_max, k0, delta):
        err = shift_round_trip_error(gsm, delta, l_max)
        if err > ROUND_TRIP_TOL:
            logger.warning(
                "GSM transform to L=%d loses the shift %.4g m: round-trip error %.3g",
                l_max,
                delta,
                err,
            )
    wt: WignerTransform = transform_matrix(delta, euler, k0, l_max, l_out=gsm.l_max)
    logger.info(
        "GSM transform path: delta=%.4g m, euler=%s rad, L %d -> %d",
        delta,
        tuple(round(e, 6) for e in wt.euler),
        gsm.l_max,
        l_max,
    )
    return gsm_transform_matrix(gsm, wt.matrix)


# --- Persistence ---


def save_gsm(gsm: Gsm, path: formats.PathLike) -> Path:
    buf = io.BytesIO()
    buf.write(formats.HGSM_MAGIC)
    buf.write(np.array([gsm.n_port, gsm.l_max], dtype="<i8").tobytes())
    buf.write(np.array([gsm.frequency], dtype="<f8").tobytes())
    buf.write(np.array(gsm.reference_impedance, dtype="<f8").tobytes())
    for block in (gsm.gamma, gsm.r, gsm.t, gsm.s):
        formats.write_matrix(buf, block)
    return formats.atomic_write(path, buf.getvalue())


def load_gsm(path: formats.PathLike) -> Gsm:
    with open(path, "rb") as fh:
        formats.expect_magic(fh, formats.HGSM_MAGIC, str(path))
        n_port, l_max = (int(x) for x in formats.read_scalars(fh, np.dtype("<i8"), 2))
        frequency = float(formats.read_scalars(fh, np.dtype("<f8"), 1)[0])
        refs = tuple(float(x) for x in formats.read_scalars(fh, np.dtype("<f8"), n_port))
        n_wave = wave_count(l_max)
        gamma = formats.read_matrix(fh, n_port, n_port)
        r = formats.read_matrix(fh, n_port, n_wave)
        t = formats.read_matrix(fh, n_wave, n_port)
        s = formats.read_matrix(fh, n_wave, n_wave)
    logger.info("loaded GSM %s: %d ports, L=%d, %.6g Hz", path, n_port, l_max, frequency)
    return Gsm(gamma, r, t, s, l_max, frequency, refs)
