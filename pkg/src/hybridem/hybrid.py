"""MoM structure coupled to an antenna GSM.

With ``D = (S - 1) / 2`` and outgoing-wave coupling ``U4`` the structure
currents solve::

    (Z + U4^T D U4) I = V_inc + U4^T D a_inc + U4^T T v

The waves reaching the antenna are ``a = a_inc - U4 I``; the antenna answers
with ``f = T v + D a`` and ``w = Gamma v + 1/2 R a``.

Two solve paths share one interface: a direct LU of the modified matrix, and
a Sherman-Morrison-Woodbury update that only factorizes the small
``M = 1 + G D`` once ``Z`` is factorized and ``G = U4 Z^-1 U4^T`` is known.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Tuple

import numpy as np

from .cache import HybridCache, structure_digest
from .coupling import CouplingMatrix
from .errors import SolverError, ValidationError
from .gsm import Gsm, PortWaves
from .mom import (
    CurrentVector,
    ExcitationVector,
    ImpedanceMatrix,
    lu_factor_checked,
    lu_solve,
    solve_matrix,
)
from .waves import CoeffVector

logger = logging.getLogger(__name__)

IDENTITY_SAMPLES = 100
IDENTITY_TOLERANCE = 1e-12

SolvePath = Literal["direct", "smw"]


@dataclass
class StructureFactors:
    """Antenna-independent quantities of a structure in one antenna frame."""

    z: ImpedanceMatrix
    u4: CouplingMatrix
    zinv_u4t: np.ndarray  # Z^-1 U4^T
    g: np.ndarray  # U4 Z^-1 U4^T
    timings: Dict[str, float] = field(default_factory=dict)
    from_cache: bool = False


def factor_structure(
    z: ImpedanceMatrix, u4: CouplingMatrix, *, cache: Optional[HybridCache] = None, digest: str = ""
) -> StructureFactors:
    """Factorize ``Z`` and form ``G``, reusing cached entries when available."""
    _check_dims(z, u4)
    timings: Dict[str, float] = {}
    start = time.perf_counter()
    cached = cache.load_factor(digest) if cache is not None and digest else None
    if cached is not None:
        z.set_factor(*cached)
    else:
        lu, piv = z.factor()
        if cache is not None and digest:
            cache.store_factor(digest, lu, piv)
    timings["factorization"] = time.perf_counter() - start
    start = time.perf_counter()
    zinv_u4t = lu_solve(z.factor(), u4.matrix.T)
    g = cache.load_g(digest) if cache is not None and digest else None
    if g is None:
        g = u4.matrix @ zinv_u4t
        if cache is not None and digest:
            cache.store_g(digest, g)
    timings["g"] = time.perf_counter() - start
    logger.info(
        "structure factors: %d unknowns, %d waves (factorization %.2f s, G %.2f s)",
        z.size,
        u4.n_wave,
        timings["factorization"],
        timings["g"],
    )
    return StructureFactors(
        z=z, u4=u4, zinv_u4t=zinv_u4t, g=g, timings=timings, from_cache=cached is not None
    )


class HybridSystem:
    """Structure plus antenna; immutable once built, solves are read-only."""

    def __init__(
        self,
        *,
        z: ImpedanceMatrix,
        u4: CouplingMatrix,
        gsm: Gsm,
        z_tilde: Optional[np.ndarray] = None,
        factors: Optional[StructureFactors] = None,
    ) -> None:
        self._z = z
        self._u4 = u4
        self._gsm = gsm
        self._z_tilde = z_tilde
        self._factors = factors
        self._tilde_lu: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self._m_lu: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @property
    def z(self) -> ImpedanceMatrix:
        return self._z

    @property
    def u4(self) -> CouplingMatrix:
        return self._u4

    @property
    def gsm(self) -> Gsm:
        return self._gsm

    @property
    def factors(self) -> Optional[StructureFactors]:
        return self._factors

    @property
    def half_scattering(self) -> np.ndarray:
        return self._gsm.half_scattering

    @property
    def z_tilde(self) -> np.ndarray:
        if self._z_tilde is None:
            self._z_tilde = modified_impedance(self._z.z, self._u4.matrix, self.half_scattering)
        return self._z_tilde

    def tilde_factor(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._tilde_lu is None:
            start = time.perf_counter()
            self._tilde_lu = lu_factor_checked(self.z_tilde)
            logger.debug("factorized modified matrix in %.2f s", time.perf_counter() - start)
        return self._tilde_lu

    def m_factor(self) -> Tuple[np.ndarray, np.ndarray]:
        """LU of ``M = 1 + G D``; raises ``SolverError`` when singular."""
        if self._factors is None:
            raise ValidationError("SMW path needs cached structure factors")
        if self._m_lu is None:
            m = np.eye(self._u4.n_wave) + self._factors.g @ self.half_scattering
            self._m_lu = lu_factor_checked(m)
        return self._m_lu

    def apply_inverse(self, rhs: np.ndarray, path: SolvePath = "direct") -> np.ndarray:
        if path == "direct":
            return solve_matrix(self.z_tilde, self.tilde_factor(), rhs)
        f = self._factors
        if f is None:
            raise ValidationError("SMW path needs cached structure factors")
        y = lu_solve(f.z.factor(), rhs)
        d = self.half_scattering
        corr = lu_solve(self.m_factor(), self._u4.matrix @ y)
        return y - f.zinv_u4t @ (d @ corr)


def modified_impedance(z: np.ndarray, u4: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``Z + U4^T D U4``."""
    return z + u4.T @ (d @ u4)


def _check_dims(z: ImpedanceMatrix, u4: CouplingMatrix) -> None:
    if u4.n_unknown != z.size:
        raise ValidationError(f"coupling has {u4.n_unknown} unknowns, impedance matrix {z.size}")


def _check_identity(sys: HybridSystem, rng: np.random.Generator) -> float:
    """Compare sampled entries of the modified matrix against triple products."""
    n = sys.z.size
    if n == 0:
        return 0.0
    rows = rng.integers(0, n, IDENTITY_SAMPLES)
    cols = rng.integers(0, n, IDENTITY_SAMPLES)
    u = sys.u4.matrix
    d = sys.half_scattering
    expected = np.array([sys.z.z[i, j] + u[:, i] @ d @ u[:, j] for i, j in zip(rows, cols)])
    got = sys.z_tilde[rows, cols]
    scale = max(float(np.max(np.abs(sys.z_tilde))), 1e-300)
    err = float(np.max(np.abs(got - expected)) / scale)
    if err > IDENTITY_TOLERANCE:
        raise SolverError(f"modified matrix failed its entry identity check (error {err:.3e})")
    return err


def build_hybrid(
    z: ImpedanceMatrix,
    u4: CouplingMatrix,
    gsm: Gsm,
    *,
    factors: Optional[StructureFactors] = None,
    assemble: bool = True,
    seed: int = 0,
) -> HybridSystem:
    """Combine a structure and an antenna.

    ``assemble=False`` skips forming the modified matrix; the system then
    only supports the SMW path through ``factors``.
    """
    _check_dims(z, u4)
    if u4.n_wave != gsm.n_wave:
        raise ValidationError(f"coupling has {u4.n_wave} waves, GSM has {gsm.n_wave}")
    if factors is not None and factors.u4 is not u4:
        raise ValidationError("structure factors were built for a different coupling matrix")
    if not assemble and factors is None:
        raise ValidationError("a system without the modified matrix needs structure factors")
    sys = HybridSystem(z=z, u4=u4, gsm=gsm, factors=factors)
    if assemble:
        start = time.perf_counter()
        _ = sys.z_tilde
        err = _check_identity(sys, np.random.default_rng(seed))
        logger.info(
            "built hybrid system %dx%d with %d waves in %.2f s (identity error %.1e)",
            z.size,
            z.size,
            u4.n_wave,
            time.perf_counter() - start,
            err,
        )
    return sys


def _inputs(sys: HybridSystem, v_inc, a_inc, v):
    n_wave = sys.u4.n_wave
    vi = np.zeros(sys.z.size, dtype=complex) if v_inc is None else v_inc.values
    ai = np.zeros(n_wave, dtype=complex) if a_inc is None else a_inc.values
    vp = np.zeros(sys.gsm.n_port, dtype=complex) if v is None else v.values
    if vi.shape[0] != sys.z.size:
        raise ValidationError(f"excitation length {vi.shape[0]} != {sys.z.size} unknowns")
    if ai.shape[0] != n_wave:
        raise ValidationError(f"incident expansion has {ai.shape[0]} waves, system {n_wave}")
    if vp.shape[0] != sys.gsm.n_port:
        raise ValidationError(f"{vp.shape[0]} port waves for {sys.gsm.n_port} ports")
    return vi, ai, vp


def _solve(sys: HybridSystem, v_inc, a_inc, v, path: SolvePath):
    vi, ai, vp = _inputs(sys, v_inc, a_inc, v)
    gsm = sys.gsm
    u = sys.u4.matrix
    d = sys.half_scattering
    rhs = vi + u.T @ (d @ ai + gsm.t @ vp)
    current = sys.apply_inverse(rhs, path)
    a_total = ai - u @ current
    f = gsm.t @ vp + d @ a_total
    w = gsm.gamma @ vp + 0.5 * (gsm.r @ a_total)
    return (
        CurrentVector(current, sys.z.formulation),
        CoeffVector(f, "f"),
        PortWaves(w),
    )


def solve_hybrid(
    sys: HybridSystem,
    v_inc: Optional[ExcitationVector] = None,
    a_inc: Optional[CoeffVector] = None,
    v: Optional[PortWaves] = None,
) -> Tuple[CurrentVector, CoeffVector, PortWaves]:
    """Structure currents, antenna outgoing waves and outgoing port waves."""
    return _solve(sys, v_inc, a_inc, v, "direct")


def smw_solve(
    sys: HybridSystem,
    v_inc: Optional[ExcitationVector] = None,
    a_inc: Optional[CoeffVector] = None,
    v: Optional[PortWaves] = None,
) -> Tuple[CurrentVector, CoeffVector, PortWaves]:
    """Same outputs as ``solve_hybrid`` through the low-rank update.

    Falls back to the direct path when ``M`` is singular.
    """
    try:
        sys.m_factor()
    except SolverError as exc:
        logger.warning("SMW update matrix singular (%s); falling back to direct solve", exc)
        return _solve(sys, v_inc, a_inc, v, "direct")
    return _solve(sys, v_inc, a_inc, v, "smw")


def effective_sparams(sys: HybridSystem, *, path: SolvePath = "direct") -> np.ndarray:
    """``Gamma - 1/2 R U4 Z~^-1 U4^T T``: port reflections including the structure."""
    gsm = sys.gsm
    if gsm.n_port == 0:
        raise ValidationError("effective S-parameters need an antenna with ports")
    u = sys.u4.matrix
    if path == "smw":
        f = sys.factors
        if f is None:
            raise ValidationError("SMW path needs cached structure factors")
        try:
            m_lu = sys.m_factor()
        except SolverError as exc:
            logger.warning("SMW update matrix singular (%s); falling back to direct solve", exc)
            return effective_sparams(sys, path="direct")
        # U4 Z~^-1 U4^T = G - G D M^-1 G
        coupled = f.g - f.g @ sys.half_scattering @ lu_solve(m_lu, f.g)
    else:
        coupled = u @ sys.apply_inverse(u.T, "direct")
    return gsm.gamma - 0.5 * gsm.r @ coupled @ gsm.t


def antenna_outgoing(
    sys: HybridSystem,
    current: CurrentVector,
    a_inc: Optional[CoeffVector] = None,
    v: Optional[PortWaves] = None,
) -> CoeffVector:
    """Antenna outgoing waves for known structure currents."""
    _, ai, vp = _inputs(sys, None, a_inc, v)
    a_total = ai - sys.u4.matrix @ current.values
    return CoeffVector(sys.gsm.t @ vp + sys.half_scattering @ a_total, "f")


def hybrid_digest(z: ImpedanceMatrix, u4: CouplingMatrix) -> str:
    if z.basis is None:
        raise ValidationError("caching needs an impedance matrix that knows its basis")
    return structure_digest(z.basis.mesh, z.frequency, u4.l_max, u4.frame)
