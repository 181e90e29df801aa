"""Surface integral equations on RWG bases.

The discretized operators are

    L_mn = int int [psi_m . psi_n - div psi_m div psi_n / k^2] g dA dA'
    K_mn = int psi_m . int grad g x psi_n dA' dA

with ``g = exp(-j k R) / (4 pi R)``. EFIE uses ``Z = j k0 Z0 L0``; PMCHWT
stacks electric and magnetic unknowns as ``[J; j M]``.

Regular triangle pairs use a 6-point rule on both triangles. Pairs closer
than ``NEAR_FACTOR`` times the longest edge use a 12-point rule with the
static ``1/R`` kernel integrated in closed form. Same-triangle ``K`` terms
are zero on flat triangles.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.linalg import lapack

from .errors import SolverError, ValidationError
from .geometry import RwgBasis, TriangleMesh, nearest_edge
from .potentials import static_potentials
from .quadrature import DUNAVANT_6, DUNAVANT_12, TriangleRule, triangle_points
from .units import ETA0, wavenumber
from .waves import plane_wave_field

logger = logging.getLogger(__name__)

Formulation = Literal["efie", "pmchwt"]
Region = Literal["exterior", "interior"]

NEAR_FACTOR = 2.0
RESIDUAL_TOLERANCE = 1e-10
_FOUR_PI = 4.0 * math.pi


# --- Data types ---


class ImpedanceMatrix:
    """Dense impedance matrix with a lazily cached LU factorization."""

    def __init__(
        self,
        z: np.ndarray,
        *,
        formulation: Formulation,
        frequency: float,
        k_d: Optional[complex] = None,
        eta_d: Optional[complex] = None,
        basis: Optional[RwgBasis] = None,
    ) -> None:
        z = np.asarray(z, dtype=complex)
        if z.ndim != 2 or z.shape[0] != z.shape[1]:
            raise ValidationError(f"impedance matrix must be square, got {z.shape}")
        self._z = z
        self._formulation: Formulation = formulation
        self._frequency = float(frequency)
        self._k_d = k_d
        self._eta_d = eta_d
        self._basis = basis
        self._lu: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @property
    def z(self) -> np.ndarray:
        return self._z

    @property
    def formulation(self) -> Formulation:
        return self._formulation

    @property
    def frequency(self) -> float:
        return self._frequency

    @property
    def k0(self) -> float:
        return wavenumber(self._frequency)

    @property
    def eta0(self) -> float:
        return ETA0

    @property
    def k_d(self) -> Optional[complex]:
        return self._k_d

    @property
    def eta_d(self) -> Optional[complex]:
        return self._eta_d

    @property
    def basis(self) -> Optional[RwgBasis]:
        return self._basis

    @property
    def size(self) -> int:
        return int(self._z.shape[0])

    @property
    def is_factored(self) -> bool:
        return self._lu is not None

    def factor(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._lu is None:
            self._lu = lu_factor_checked(self._z)
        return self._lu

    def set_factor(self, lu: np.ndarray, piv: np.ndarray) -> None:
        self._lu = (np.asarray(lu), np.asarray(piv))


@dataclass(frozen=True, eq=False)
class CurrentVector:
    values: np.ndarray
    formulation: Formulation = "efie"

    @property
    def n_basis(self) -> int:
        n = self.values.shape[0]
        return n // 2 if self.formulation == "pmchwt" else n

    @property
    def electric(self) -> np.ndarray:
        return self.values[: self.n_basis]

    @property
    def magnetic(self) -> np.ndarray:
        """Magnetic current coefficients (the stored block is ``j M``)."""
        if self.formulation != "pmchwt":
            return np.zeros(self.n_basis, dtype=complex)
        return -1j * self.values[self.n_basis :]


@dataclass(frozen=True, eq=False)
class ExcitationVector:
    values: np.ndarray
    formulation: Formulation = "efie"
    source: Literal["plane-wave", "antenna", "port", "combined"] = "plane-wave"

    def __add__(self, other: "ExcitationVector") -> "ExcitationVector":
        if other.formulation != self.formulation:
            raise ValidationError("cannot add excitations of different formulations")
        return ExcitationVector(self.values + other.values, self.formulation, "combined")


@dataclass(frozen=True)
class PlaneWave:
    """``amplitude * e_hat * exp(-j k k_hat . r)`` (V/m)."""

    k_hat: Tuple[float, float, float] = (0.0, 0.0, -1.0)
    e_hat: Tuple[float, float, float] = (1.0, 0.0, 0.0)
    amplitude: complex = 1.0

    def __post_init__(self) -> None:
        k = np.asarray(self.k_hat, dtype=float)
        e = np.asarray(self.e_hat, dtype=complex)
        if abs(np.linalg.norm(k) - 1.0) > 1e-9 or abs(np.linalg.norm(e) - 1.0) > 1e-9:
            raise ValidationError("plane-wave directions must be unit vectors")
        if abs(np.dot(k, e)) > 1e-9:
            raise ValidationError(f"polarization {self.e_hat} is not orthogonal to {self.k_hat}")

    @classmethod
    def from_angles(
        cls,
        theta: float,
        phi: float,
        polarization: Literal["theta", "phi"] = "theta",
        amplitude: complex = 1.0,
    ) -> "PlaneWave":
        """Wave arriving from direction (theta, phi), i.e. propagating along ``-r_hat``."""
        st, ct, sp, cp = math.sin(theta), math.cos(theta), math.sin(phi), math.cos(phi)
        k_hat = (-st * cp, -st * sp, -ct)
        e_hat = (ct * cp, ct * sp, -st) if polarization == "theta" else (-sp, cp, 0.0)
        return cls(k_hat=k_hat, e_hat=e_hat, amplitude=amplitude)

    def fields(self, k: float, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return plane_wave_field(self.k_hat, self.e_hat, self.amplitude, k, points)


@dataclass(frozen=True)
class PortSpec:
    """Delta-gap port on the RWG function nearest ``position``."""

    position: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    reference_impedance: float = 50.0
    name: str = "port1"


# --- Sampling and testing ---


@dataclass(frozen=True, eq=False)
class TriangleSamples:
    points: np.ndarray  # (T, q, 3)
    weights: np.ndarray  # (T, q), rule weight times area


def sample_triangles(mesh: TriangleMesh, rule: TriangleRule = DUNAVANT_12) -> TriangleSamples:
    pts = triangle_points(mesh.corners, rule)
    return TriangleSamples(points=pts, weights=mesh.areas[:, None] * rule.weights[None, :])


def _rwg_from_moments(basis: RwgBasis, scalar: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """Combine per-triangle moments into RWG tests.

    ``scalar[t] = sum w r . F`` and ``vector[t] = sum w F`` give
    ``<psi_n, F> = sum_halves c (scalar - v . vector)``.
    """
    h = basis.halves
    vals = h.coef[:, None] * (
        scalar[h.tri] - np.einsum("hx,hxa->ha", h.free, vector[h.tri])
    )
    n = basis.count
    return vals[:n] + vals[n:]


def project_field(
    basis: RwgBasis,
    field_fn: Callable[[np.ndarray], np.ndarray],
    *,
    rule: TriangleRule = DUNAVANT_12,
    chunk: int = 256,
) -> np.ndarray:
    """``<psi_n, F>`` for a field returning (npts, 3, ...) at (npts, 3) points.

    Trailing field dimensions are preserved: the result is (N, ...).
    """
    samples = sample_triangles(basis.mesh, rule)
    n_tri, nq = samples.weights.shape
    scalar_parts: List[np.ndarray] = []
    vector_parts: List[np.ndarray] = []
    tail: Tuple[int, ...] = ()
    for start in range(0, n_tri, chunk):
        stop = min(n_tri, start + chunk)
        pts = samples.points[start:stop].reshape(-1, 3)
        values = np.asarray(field_fn(pts))
        tail = values.shape[2:]
        values = values.reshape(stop - start, nq, 3, -1)
        w = samples.weights[start:stop]
        p = samples.points[start:stop]
        scalar_parts.append(np.einsum("tq,tqx,tqxa->ta", w, p, values))
        vector_parts.append(np.einsum("tq,tqxa->txa", w, values))
    if not scalar_parts:
        return np.zeros((basis.count,) + tail, dtype=complex)
    scalar = np.concatenate(scalar_parts)
    vector = np.concatenate(vector_parts)
    out = _rwg_from_moments(basis, scalar, vector)
    return out.reshape((basis.count,) + tail)


# --- Operator assembly ---


@dataclass
class _Moments:
    s0: np.ndarray
    sr: np.ndarray
    srp: np.ndarray
    srrp: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


def _far_moments(tp, tw, sp, sw, k) -> _Moments:
    d = tp[:, None, :, None, :] - sp[None, :, None, :, :]
    big_r = np.linalg.norm(d, axis=-1)
    big_r = np.where(big_r > 0.0, big_r, 1.0)
    ww = tw[:, None, :, None] * sw[None, :, None, :]
    e = np.exp(-1j * k * big_r)
    g = ww * e / (_FOUR_PI * big_r)
    gk = ww * (-(1.0 + 1j * k * big_r) * e / (_FOUR_PI * big_r**3))
    s0 = g.sum(axis=(2, 3))
    sr = np.einsum("abij,aix->abx", g, tp)
    srp = np.einsum("abij,bjx->abx", g, sp)
    srrp = np.einsum("abij,aix,bjx->ab", g, tp, sp)
    gkd = gk[..., None] * d
    w1 = gkd.sum(axis=(2, 3))
    w2 = np.cross(gkd, tp[:, None, :, None, :]).sum(axis=(2, 3))
    return _Moments(s0, sr, srp, srrp, w1, w2)


def _smooth_green(k: complex, big_r: np.ndarray) -> np.ndarray:
    """``(exp(-j k R) - 1) / (4 pi R)`` with its R -> 0 limit."""
    x = 0.5 * k * big_r
    safe = np.where(np.abs(x) > 1e-8, x, 1.0)
    sinc = np.where(np.abs(x) > 1e-8, np.sin(safe) / safe, 1.0)
    return -1j * k * sinc * np.exp(-1j * x) / _FOUR_PI


def _remainder_kernel(k: complex, big_r: np.ndarray) -> np.ndarray:
    """``[1 - (1 + j k R) exp(-j k R)] / (4 pi R^3)``, zero where R = 0."""
    kr = k * big_r
    safe_r = np.where(big_r > 0.0, big_r, 1.0)
    exact = (1.0 - (1.0 + 1j * kr) * np.exp(-1j * kr)) / (_FOUR_PI * safe_r**3)
    series = k * k * (-0.5 + 1j * kr / 3.0 + kr * kr / 8.0) / (_FOUR_PI * safe_r)
    out = np.where(np.abs(kr) < 1e-3, series, exact)
    return np.where(big_r > 0.0, out, 0.0)


def _near_moments(mesh: TriangleMesh, pairs_t, pairs_s, k) -> _Moments:
    rule = DUNAVANT_12
    tp = triangle_points(mesh.corners[pairs_t], rule)  # (M, q, 3)
    tw = mesh.areas[pairs_t][:, None] * rule.weights[None, :]
    sp = triangle_points(mesh.corners[pairs_s], rule)
    sw = mesh.areas[pairs_s][:, None] * rule.weights[None, :]
    pot = static_potentials(tp, mesh.corners[pairs_s][:, None, :, :])
    d = tp[:, :, None, :] - sp[:, None, :, :]
    big_r = np.linalg.norm(d, axis=-1)
    gm = _smooth_green(k, big_r) * sw[:, None, :]
    i0 = pot.f0 / _FOUR_PI + gm.sum(axis=2)
    iv = (pot.fv + pot.rho * pot.f0[..., None]) / _FOUR_PI + np.einsum("mij,mjx->mix", gm, sp)
    h = _remainder_kernel(k, big_r) * sw[:, None, :]
    wfield = -pot.gs / _FOUR_PI + np.einsum("mij,mijx->mix", h, d)
    same = pairs_t == pairs_s
    wfield[same] = 0.0
    s0 = np.einsum("mi,mi->m", tw, i0)
    sr = np.einsum("mi,mi,mix->mx", tw, i0, tp)
    srp = np.einsum("mi,mix->mx", tw, iv)
    srrp = np.einsum("mi,mix,mix->m", tw, tp, iv)
    w1 = np.einsum("mi,mix->mx", tw, wfield)
    w2 = np.einsum("mi,mix->mx", tw, np.cross(wfield, tp))
    return _Moments(s0, sr, srp, srrp, w1, w2)


def _incidence(basis: RwgBasis, halves_idx: np.ndarray) -> scipy.sparse.csr_matrix:
    fn = basis.halves.function[halves_idx]
    data = np.ones(halves_idx.shape[0])
    return scipy.sparse.csr_matrix(
        (data, (fn, np.arange(halves_idx.shape[0]))), shape=(basis.count, halves_idx.shape[0])
    )


def _chunk_operators(basis: RwgBasis, k: complex, tri_chunk: np.ndarray, far: TriangleSamples):
    mesh = basis.mesh
    h = basis.halves
    local = {int(t): i for i, t in enumerate(tri_chunk)}
    mom = _far_moments(far.points[tri_chunk], far.weights[tri_chunk], far.points, far.weights, k)

    cdist = np.linalg.norm(
        mesh.centroids[tri_chunk][:, None, :] - mesh.centroids[None, :, :], axis=-1
    )
    reach = NEAR_FACTOR * np.maximum(
        mesh.max_edge_length[tri_chunk][:, None], mesh.max_edge_length[None, :]
    )
    near_a, near_b = np.nonzero(cdist < reach)
    if near_a.size:
        nm = _near_moments(mesh, tri_chunk[near_a], near_b, k)
        mom.s0[near_a, near_b] = nm.s0
        mom.sr[near_a, near_b] = nm.sr
        mom.srp[near_a, near_b] = nm.srp
        mom.srrp[near_a, near_b] = nm.srrp
        mom.w1[near_a, near_b] = nm.w1
        mom.w2[near_a, near_b] = nm.w2

    ha = np.flatnonzero(np.isin(h.tri, tri_chunk))
    ta = np.array([local[int(t)] for t in h.tri[ha]], dtype=np.int64)
    tb = h.tri
    va = h.free[ha]
    vb = h.free
    ca = h.coef[ha][:, None] * h.coef[None, :]
    da = h.div[ha][:, None] * h.div[None, :]
    s0 = mom.s0[ta][:, tb]
    sr = mom.sr[ta][:, tb]
    srp = mom.srp[ta][:, tb]
    srrp = mom.srrp[ta][:, tb]
    lh = ca * (
        srrp
        - np.einsum("abx,bx->ab", sr, vb)
        - np.einsum("ax,abx->ab", va, srp)
        + (va @ vb.T) * s0
    ) - da * s0 / (k * k)
    w1 = mom.w1[ta][:, tb]
    w2 = mom.w2[ta][:, tb]
    dv = vb[None, :, :] - va[:, None, :]
    kh = ca * np.einsum("abx,abx->ab", dv, w2 - np.cross(w1, vb[None, :, :]))
    pa = _incidence(basis, ha)
    pb = _incidence(basis, np.arange(h.tri.shape[0]))
    l_part = np.asarray(pa @ (pb @ lh.T).T)
    k_part = np.asarray(pa @ (pb @ kh.T).T)
    return l_part, k_part, int(near_a.size)


def assemble_operators(
    basis: RwgBasis,
    k: complex,
    *,
    workers: int = 1,
    chunk: Optional[int] = None,
    symmetrize: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """``(L, K)`` for wavenumber ``k`` (complex in lossy media).

    Regular pairs are symmetric to rounding. Near pairs integrate the analytic
    potential on one side only, which leaves a small quadrature asymmetry;
    ``symmetrize`` replaces each operator by ``(A + A.T) / 2``.
    """
    mesh = basis.mesh
    n = basis.count
    n_tri = mesh.n_triangles
    if n == 0:
        return np.zeros((0, 0), dtype=complex), np.zeros((0, 0), dtype=complex)
    if np.any(mesh.areas <= 0.0):
        raise ValidationError("zero-area triangle in mesh")
    far = sample_triangles(mesh, DUNAVANT_6)
    if chunk is None:
        chunk = max(1, int(400_000 // max(1, n_tri * 36)))
    chunks = [np.arange(s, min(n_tri, s + chunk)) for s in range(0, n_tri, chunk)]
    start = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _chunk_operators(basis, k, c, far), chunks))
    else:
        parts = [_chunk_operators(basis, k, c, far) for c in chunks]
    l_op = np.zeros((n, n), dtype=complex)
    k_op = np.zeros((n, n), dtype=complex)
    near_pairs = 0
    for l_part, k_part, n_near in parts:
        l_op += l_part
        k_op += k_part
        near_pairs += n_near
    if symmetrize:
        logger.debug(
            "raw operator asymmetry: L %.3g, K %.3g",
            operator_asymmetry(l_op),
            operator_asymmetry(k_op),
        )
        l_op = 0.5 * (l_op + l_op.T)
        k_op = 0.5 * (k_op + k_op.T)
    if not (np.all(np.isfinite(l_op)) and np.all(np.isfinite(k_op))):
        raise SolverError("singular quadrature produced non-finite operator entries")
    logger.debug(
        "operators for k=%s: %d functions, %d near triangle pairs, %.2f s",
        k,
        n,
        near_pairs,
        time.perf_counter() - start,
    )
    return l_op, k_op


def operator_asymmetry(a: np.ndarray) -> float:
    """``|A - A.T| / |A|`` in the Frobenius norm."""
    scale = float(np.linalg.norm(a))
    return float(np.linalg.norm(a - a.T)) / scale if scale > 0.0 else 0.0


def _check_mesh_basis(mesh: TriangleMesh, basis: RwgBasis) -> None:
    if basis.mesh is not mesh:
        raise ValidationError("RWG basis was built on a different mesh")


def assemble_efie(
    mesh: TriangleMesh,
    basis: RwgBasis,
    frequency: float,
    *,
    workers: int = 1,
    symmetrize: bool = True,
) -> ImpedanceMatrix:
    _check_mesh_basis(mesh, basis)
    if not mesh.material.is_pec:
        raise ValidationError("EFIE assembly needs a PEC mesh")
    k0 = wavenumber(frequency)
    start = time.perf_counter()
    l0, _ = assemble_operators(basis, k0, workers=workers, symmetrize=symmetrize)
    z = 1j * k0 * ETA0 * l0
    logger.info(
        "assembled EFIE %dx%d in %.2f s", z.shape[0], z.shape[1], time.perf_counter() - start
    )
    return ImpedanceMatrix(z, formulation="efie", frequency=frequency, basis=basis)


def assemble_pmchwt(
    mesh: TriangleMesh,
    basis: RwgBasis,
    frequency: float,
    *,
    workers: int = 1,
    symmetrize: bool = True,
) -> ImpedanceMatrix:
    _check_mesh_basis(mesh, basis)
    material = mesh.material
    if material.is_pec:
        raise ValidationError("PMCHWT assembly needs a penetrable mesh")
    if not mesh.closed:
        raise ValidationError("PMCHWT assembly needs a closed mesh")
    k0 = wavenumber(frequency)
    k_d = k0 * material.refractive_index
    eta_d = ETA0 * material.relative_impedance
    start = time.perf_counter()
    l0, k0_op = assemble_operators(basis, k0, workers=workers, symmetrize=symmetrize)
    ld, kd_op = assemble_operators(basis, k_d, workers=workers, symmetrize=symmetrize)
    k_sum = k0_op + kd_op
    z = np.block(
        [
            [1j * (k0 * ETA0 * l0 + k_d * eta_d * ld), -1j * k_sum],
            [-1j * k_sum, 1j * (k0 / ETA0 * l0 + k_d / eta_d * ld)],
        ]
    )
    logger.info(
        "assembled PMCHWT %dx%d (eps_r=%s) in %.2f s",
        z.shape[0],
        z.shape[1],
        material.eps_r,
        time.perf_counter() - start,
    )
    return ImpedanceMatrix(
        z, formulation="pmchwt", frequency=frequency, k_d=k_d, eta_d=eta_d, basis=basis
    )


def assemble_impedance(
    mesh: TriangleMesh, basis: RwgBasis, frequency: float, *, workers: int = 1
) -> ImpedanceMatrix:
    """EFIE for PEC meshes, PMCHWT otherwise."""
    if mesh.material.is_pec:
        return assemble_efie(mesh, basis, frequency, workers=workers)
    return assemble_pmchwt(mesh, basis, frequency, workers=workers)


# --- Excitations ---


def stack_excitation(
    ve: np.ndarray, vm: Optional[np.ndarray], formulation: Formulation
) -> np.ndarray:
    if formulation == "efie":
        return np.asarray(ve, dtype=complex)
    return np.concatenate([ve, 1j * (vm if vm is not None else np.zeros_like(ve))])


def excitation_plane_wave(
    basis: RwgBasis, formulation: Formulation, wave: PlaneWave, frequency: float
) -> ExcitationVector:
    """``[<psi, E_inc>; j <psi, H_inc>]`` with the 12-point rule."""
    k0 = wavenumber(frequency)

    def fields(points: np.ndarray) -> np.ndarray:
        e, h = wave.fields(k0, points)
        return np.stack([e, h], axis=-1)

    tested = project_field(basis, fields)
    values = stack_excitation(tested[:, 0], tested[:, 1], formulation)
    return ExcitationVector(values, formulation, "plane-wave")


def port_matrix(
    basis: RwgBasis, ports: Sequence[PortSpec], formulation: Formulation = "efie"
) -> np.ndarray:
    """Delta-gap incidence ``P[n, k] = length of port k's edge`` (n over unknowns)."""
    n_unknown = basis.count * (2 if formulation == "pmchwt" else 1)
    p = np.zeros((n_unknown, len(ports)))
    for k, port in enumerate(ports):
        fn = nearest_edge(basis, port.position)
        p[fn, k] = basis.length[fn]
    return p


def excitation_delta_gap(
    basis: RwgBasis,
    ports: Sequence[PortSpec],
    voltages: Sequence[complex],
    formulation: Formulation = "efie",
) -> ExcitationVector:
    if len(ports) != len(voltages):
        raise ValidationError(f"{len(ports)} ports but {len(voltages)} voltages")
    values = port_matrix(basis, ports, formulation) @ np.asarray(voltages, dtype=complex)
    return ExcitationVector(values.astype(complex), formulation, "port")


# --- Solves ---


def lu_factor_checked(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """LU factorization that raises ``SolverError`` on numerically singular input."""
    a = np.asarray(a, dtype=complex)
    if a.shape[0] == 0:
        return a.copy(), np.zeros(0, dtype=np.int32)
    anorm = float(np.linalg.norm(a, 1))
    if not np.isfinite(anorm):
        raise SolverError("matrix has non-finite entries")
    lu, piv, info = lapack.zgetrf(a)
    if info > 0:
        raise SolverError(f"exactly singular matrix (zero pivot {info})", rcond=0.0)
    rcond, _ = lapack.zgecon(lu, anorm, norm="1")
    if rcond < 10.0 * np.finfo(float).eps:
        raise SolverError("numerically singular matrix", rcond=float(rcond))
    logger.debug("LU of %dx%d, rcond %.3e", a.shape[0], a.shape[1], rcond)
    return lu, piv


def lu_solve(lu: Tuple[np.ndarray, np.ndarray], rhs: np.ndarray, *, trans: int = 0) -> np.ndarray:
    if lu[0].shape[0] == 0:
        return np.zeros_like(np.asarray(rhs, dtype=complex))
    return scipy.linalg.lu_solve(lu, np.asarray(rhs, dtype=complex), trans=trans)


def solve_matrix(z: np.ndarray, lu, rhs: np.ndarray) -> np.ndarray:
    """LU solve with one refinement step and a residual check."""
    rhs = np.asarray(rhs, dtype=complex)
    x = lu_solve(lu, rhs)
    norm_rhs = np.linalg.norm(rhs)
    if norm_rhs == 0.0:
        return x
    resid = rhs - z @ x
    if np.linalg.norm(resid) > RESIDUAL_TOLERANCE * norm_rhs:
        x = x + lu_solve(lu, resid)
        resid = rhs - z @ x
        rel = float(np.linalg.norm(resid) / norm_rhs)
        if rel > RESIDUAL_TOLERANCE:
            logger.warning(
                "solve residual %.3e above %.0e after refinement", rel, RESIDUAL_TOLERANCE
            )
    return x


def solve_direct(z: ImpedanceMatrix, *rhs: ExcitationVector) -> Tuple[CurrentVector, ...]:
    """Solve ``Z I = V`` for each excitation, reusing one cached factorization."""
    if not rhs:
        raise ValidationError("solve_direct needs at least one excitation")
    for v in rhs:
        if v.values.shape[0] != z.size:
            raise ValidationError(f"excitation length {v.values.shape[0]} != matrix size {z.size}")
    lu = z.factor()
    block = np.stack([v.values for v in rhs], axis=1)
    sol = solve_matrix(z.z, lu, block)
    return tuple(CurrentVector(sol[:, i], z.formulation) for i in range(len(rhs)))


def solve_iterative(
    matvec: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    *,
    rtol: float = 1e-8,
    restart: int = 200,
    maxiter: Optional[int] = None,
) -> np.ndarray:
    """Unpreconditioned GMRES on a caller-supplied matrix-vector product."""
    b = np.asarray(rhs, dtype=complex)
    n = b.shape[0]
    op = scipy.sparse.linalg.LinearOperator((n, n), matvec=matvec, dtype=complex)
    x, info = scipy.sparse.linalg.gmres(op, b, rtol=rtol, restart=restart, maxiter=maxiter)
    if info != 0:
        raise SolverError(f"GMRES did not converge (info={info})")
    return x


# --- Fields of surface currents ---


def point_triangle_distance(points: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """Distance from each point to the nearest triangle, plus that triangle's index."""
    pts = np.atleast_2d(points)
    c = mesh.corners
    best = np.full(pts.shape[0], np.inf)
    which = np.zeros(pts.shape[0], dtype=np.int64)
    for start in range(0, pts.shape[0], 64):
        p = pts[start : start + 64][:, None, :]
        dist = _tri_distance(p, c[None])
        idx = np.argmin(dist, axis=1)
        best[start : start + 64] = dist[np.arange(dist.shape[0]), idx]
        which[start : start + 64] = idx
    return np.stack([best, which.astype(float)], axis=1)


def _segment_distance(p, a, b):
    ab = b - a
    along = np.einsum("...x,...x->...", p - a, ab) / np.einsum("...x,...x->...", ab, ab)
    t = np.clip(along, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def _tri_distance(p, c):
    a, b, cc = c[..., 0, :], c[..., 1, :], c[..., 2, :]
    n = np.cross(b - a, cc - a)
    n = n / np.linalg.norm(n, axis=-1, keepdims=True)
    h = np.einsum("...x,...x->...", p - a, n)
    q = p - h[..., None] * n
    inside = np.ones(h.shape, dtype=bool)
    for u, v in ((a, b), (b, cc), (cc, a)):
        inside &= np.einsum("...x,...x->...", np.cross(v - u, q - u), n) >= 0.0
    edge = np.minimum(
        np.minimum(_segment_distance(p, a, b), _segment_distance(p, b, cc)),
        _segment_distance(p, cc, a),
    )
    return np.where(inside, np.abs(h), edge)


def current_samples(basis: RwgBasis, coeffs: np.ndarray, rule: TriangleRule):
    """Current density and surface divergence at every triangle sample."""
    samples = sample_triangles(basis.mesh, rule)
    h = basis.halves
    n_tri = basis.mesh.n_triangles
    c = coeffs[h.function]
    # sum_h c_h coef_h (r - v_h) on tri_h  =  r * A[t] - B[t]
    a = np.zeros(n_tri, dtype=complex)
    b = np.zeros((n_tri, 3), dtype=complex)
    dv = np.zeros(n_tri, dtype=complex)
    np.add.at(a, h.tri, c * h.coef)
    np.add.at(b, h.tri, (c * h.coef)[:, None] * h.free)
    np.add.at(dv, h.tri, c * h.div)
    current = a[:, None, None] * samples.points - b[:, None, :]
    return samples, current, dv


def _potential_fields(k, points, src_pts, weights, current, div):
    """``L(J)`` and ``K(J)`` at ``points`` from sampled currents."""
    d = points[:, None, :] - src_pts[None, :, :]
    big_r = np.linalg.norm(d, axis=-1)
    e = np.exp(-1j * k * big_r)
    g = e / (_FOUR_PI * big_r)
    gk = -(1.0 + 1j * k * big_r) * e / (_FOUR_PI * big_r**3)
    l_field = np.einsum("pq,q,qx->px", g, weights, current) + np.einsum(
        "pq,q,q,pqx->px", gk, weights, div, d
    ) / (k * k)
    k_field = np.einsum("pq,q,pqx->px", gk, weights, np.cross(d, current[None, :, :]))
    return l_field, k_field


def radiate_near(
    currents: CurrentVector,
    mesh: TriangleMesh,
    basis: RwgBasis,
    points: np.ndarray,
    region: Region,
    frequency: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Fields of the equivalent currents at points off the surface.

    ``exterior`` returns the scattered free-space fields; ``interior`` returns
    the total field inside a penetrable body.
    """
    _check_mesh_basis(mesh, basis)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if mesh.n_triangles:
        dist = point_triangle_distance(pts, mesh)
        edge = mesh.max_edge_length[dist[:, 1].astype(np.int64)]
        if np.any(dist[:, 0] <= 0.01 * edge):
            raise ValidationError("observation point lies on the surface")
    k0 = wavenumber(frequency)
    if region == "exterior":
        k, eta, sign = k0, ETA0, 1.0
    else:
        if mesh.material.is_pec:
            raise ValidationError("interior fields are only defined for penetrable bodies")
        k = k0 * mesh.material.refractive_index
        eta = ETA0 * mesh.material.relative_impedance
        sign = -1.0
    samples, j_cur, j_div = current_samples(basis, currents.electric, DUNAVANT_12)
    src = samples.points.reshape(-1, 3)
    w = samples.weights.ravel()
    nq = samples.weights.shape[1]
    jc = j_cur.reshape(-1, 3)
    jd = np.repeat(j_div, nq)
    l_j, k_j = _potential_fields(k, pts, src, w, jc, jd)
    e = -1j * k * eta * l_j
    h = k_j
    if currents.formulation == "pmchwt":
        _, m_cur, m_div = current_samples(basis, currents.magnetic, DUNAVANT_12)
        l_m, k_m = _potential_fields(k, pts, src, w, m_cur.reshape(-1, 3), np.repeat(m_div, nq))
        e = e - k_m
        h = h - 1j * k / eta * l_m
    return sign * e, sign * h
