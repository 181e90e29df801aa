"""Power-normalized vector spherical waves.

Waves are indexed by (tau, l, m) with tau in {1, 2}, l = 1..L and
m = -l..l. The zero-based linear index is ``2 (l^2 + l + m - 1) + tau - 1``
so the list is l-major with tau innermost and there are ``2 L (L + 2)`` waves.

Angular dependence uses real (tesseral) spherical harmonics built from
orthonormal associated Legendre functions with the Condon-Shortley phase:
``m > 0`` carries ``sqrt(2) cos(m phi)``, ``m < 0`` carries
``sqrt(2) sin(|m| phi)``. Time dependence is ``exp(+j w t)``; outgoing waves
use spherical Hankel functions of the second kind.

A field with coefficients ``c`` is ``E = k sqrt(Z) sum c u``, the matching
magnetic field ``H = j k / sqrt(Z) sum c u_dual`` where the dual swaps tau
(``u_dual = curl(u) / k``). A unit outgoing coefficient radiates 1/2 W.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Literal, Sequence, Tuple

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .errors import ValidationError
from .units import ETA0

logger = logging.getLogger(__name__)

WaveKind = Literal["f", "a", "a_inc", "a_sca", "f_ext", "a_ext"]
OUTGOING_KINDS = ("f", "f_ext")
_TINY_ARGUMENT = 1e-12


@dataclass(frozen=True)
class WaveIndex:
    tau: int
    l: int  # noqa: E741
    m: int

    def __post_init__(self) -> None:
        if self.tau not in (1, 2) or self.l < 1 or abs(self.m) > self.l:
            raise ValidationError(f"invalid wave index (tau={self.tau}, l={self.l}, m={self.m})")

    @property
    def linear(self) -> int:
        return linear_index(self.tau, self.l, self.m)

    @property
    def dual(self) -> "WaveIndex":
        return WaveIndex(3 - self.tau, self.l, self.m)

    @classmethod
    def from_linear(cls, j: int) -> "WaveIndex":
        tau = j % 2 + 1
        lm = j // 2 + 1  # l^2 + l + m, which lies in [l^2, (l+1)^2)
        l = math.isqrt(lm)  # noqa: E741
        return cls(tau, l, lm - l * l - l)


def wave_count(l_max: int) -> int:
    return 2 * l_max * (l_max + 2)


def linear_index(tau: int, l: int, m: int) -> int:  # noqa: E741
    return 2 * (l * l + l + m - 1) + tau - 1


def dual_linear(j: int) -> int:
    return j ^ 1


def iter_indices(l_max: int) -> Iterator[WaveIndex]:
    for l in range(1, l_max + 1):  # noqa: E741
        for m in range(-l, l + 1):
            for tau in (1, 2):
                yield WaveIndex(tau, l, m)


def index_arrays(l_max: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(tau, l, m) arrays in linear order."""
    idx = list(iter_indices(l_max))
    return (
        np.array([a.tau for a in idx], dtype=np.int64),
        np.array([a.l for a in idx], dtype=np.int64),
        np.array([a.m for a in idx], dtype=np.int64),
    )


def degree_from_count(n_wave: int) -> int:
    l_max = int(round(math.sqrt(n_wave / 2.0 + 1.0) - 1.0))
    if wave_count(l_max) != n_wave:
        raise ValidationError(f"{n_wave} is not a valid wave count 2L(L+2)")
    return l_max


@dataclass(frozen=True, eq=False)
class CoeffVector:
    values: np.ndarray
    kind: WaveKind = "f"

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        degree_from_count(v.shape[0])
        object.__setattr__(self, "values", v)

    @property
    def l_max(self) -> int:
        return degree_from_count(self.values.shape[0])

    @property
    def is_outgoing(self) -> bool:
        return self.kind in OUTGOING_KINDS

    @property
    def power(self) -> float:
        """Time-averaged power (W) carried by the coefficients."""
        return 0.5 * float(np.sum(np.abs(self.values) ** 2))

    def rows(self) -> List[Tuple[int, int, int, float, float]]:
        return [
            (a.tau, a.l, a.m, float(c.real), float(c.imag))
            for a, c in zip(iter_indices(self.l_max), self.values)
        ]

    @classmethod
    def zeros(cls, l_max: int, kind: WaveKind = "f") -> "CoeffVector":
        return cls(np.zeros(wave_count(l_max), dtype=complex), kind)


def truncation_degree(k0: float, r_a: float, iota: float = 2.0) -> int:
    """Highest degree needed outside a sphere of radius ``r_a``."""
    kr = float(k0) * float(r_a)
    if not kr > 0.0:
        raise ValidationError(f"k0 * r_a must be positive, got {kr}")
    if iota < 0:
        raise ValidationError(f"accuracy parameter must be >= 0, got {iota}")
    # exact integers (k0 r_a = 8, iota = 2) must not round up past themselves
    return int(math.ceil(kr + float(iota) * float(np.cbrt(kr)) + 3.0 - 1e-12))


# --- Angular functions ---


def _legendre_tables(l_max: int, theta: np.ndarray):
    """Orthonormal Legendre functions with their theta derivatives.

    Returns ``lam[l, m]``, ``lam_s[l, m]`` (``lam / sin(theta)`` for m >= 1) and
    ``dlam[l, m]``, each with a trailing point axis.
    """
    x = np.cos(theta)
    s = np.sin(theta)
    n = theta.shape[0]
    lam = np.zeros((l_max + 2, l_max + 2, n))
    lam_s = np.zeros((l_max + 2, l_max + 2, n))
    lam[0, 0] = 1.0 / math.sqrt(4.0 * math.pi)
    for m in range(0, l_max + 1):
        if m > 0:
            f = -math.sqrt((2.0 * m + 1.0) / (2.0 * m))
            lam_s[m, m] = f * lam[m - 1, m - 1]
            lam[m, m] = lam_s[m, m] * s
        for table in (lam, lam_s) if m > 0 else (lam,):
            if m + 1 <= l_max:
                table[m + 1, m] = math.sqrt(2.0 * m + 3.0) * x * table[m, m]
            for l in range(m + 2, l_max + 1):  # noqa: E741
                a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
                b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
                table[l, m] = a * (x * table[l - 1, m] - b * table[l - 2, m])
    dlam = np.zeros_like(lam)
    for l in range(1, l_max + 1):  # noqa: E741
        dlam[l, 0] = math.sqrt(l * (l + 1.0)) * s * lam_s[l, 1]
        for m in range(1, l + 1):
            c = math.sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0) * (l * l - m * m))
            dlam[l, m] = l * x * lam_s[l, m] - c * lam_s[l - 1, m]
    return lam, lam_s, dlam


def _harmonic_parts(l_max: int, theta: np.ndarray, phi: np.ndarray):
    """Y, dY/dtheta and (1/sin) dY/dphi, each (npts, L(L+2)) in (l, m) order."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    lam, lam_s, dlam = _legendre_tables(l_max, theta)
    n_lm = l_max * (l_max + 2)
    y = np.zeros((theta.shape[0], n_lm))
    dy = np.zeros_like(y)
    py = np.zeros_like(y)
    r2 = math.sqrt(2.0)
    for l in range(1, l_max + 1):  # noqa: E741
        for m in range(-l, l + 1):
            j = l * l + l + m - 1
            mu = abs(m)
            if m == 0:
                y[:, j] = lam[l, 0]
                dy[:, j] = dlam[l, 0]
            elif m > 0:
                c, sn = np.cos(mu * phi), np.sin(mu * phi)
                y[:, j] = r2 * lam[l, mu] * c
                dy[:, j] = r2 * dlam[l, mu] * c
                py[:, j] = -r2 * mu * lam_s[l, mu] * sn
            else:
                c, sn = np.cos(mu * phi), np.sin(mu * phi)
                y[:, j] = r2 * lam[l, mu] * sn
                dy[:, j] = r2 * dlam[l, mu] * sn
                py[:, j] = r2 * mu * lam_s[l, mu] * c
    return y, dy, py


def real_harmonics(l_max: int, theta, phi) -> np.ndarray:
    """Scalar real harmonics for l = 1..l_max, shape (npts, L(L+2))."""
    return _harmonic_parts(l_max, theta, phi)[0]


def unit_vectors(theta, phi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    r_hat = np.stack([st * cp, st * sp, ct], axis=-1)
    t_hat = np.stack([ct * cp, ct * sp, -st], axis=-1)
    p_hat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return r_hat, t_hat, p_hat


def vector_harmonics(l_max: int, theta, phi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A1, A2, A3 with shape (npts, L(L+2), 3)."""
    y, dy, py = _harmonic_parts(l_max, theta, phi)
    r_hat, t_hat, p_hat = unit_vectors(theta, phi)
    ls = np.concatenate([np.full(2 * l + 1, float(l)) for l in range(1, l_max + 1)])
    norm = 1.0 / np.sqrt(ls * (ls + 1.0))
    a1 = (py * norm)[..., None] * t_hat[:, None, :] - (dy * norm)[..., None] * p_hat[:, None, :]
    a2 = (dy * norm)[..., None] * t_hat[:, None, :] + (py * norm)[..., None] * p_hat[:, None, :]
    a3 = y[..., None] * r_hat[:, None, :]
    return a1, a2, a3


def cartesian_to_spherical(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(p, axis=1)
    safe = np.where(r > 0, r, 1.0)
    theta = np.arccos(np.clip(p[:, 2] / safe, -1.0, 1.0))
    phi = np.arctan2(p[:, 1], p[:, 0])
    return r, theta, phi


# --- Radial functions ---


def _radial(l_max: int, x: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """z_l(x) and z_l'(x) for l = 1..l_max, shape (L, npts)."""
    ls = np.arange(1, l_max + 1)[:, None]
    xx = np.broadcast_to(x[None, :], (l_max, x.shape[0]))
    z = spherical_jn(ls, xx).astype(complex)
    dz = spherical_jn(ls, xx, derivative=True).astype(complex)
    if p == 4:
        z = z - 1j * spherical_yn(ls, xx)
        dz = dz - 1j * spherical_yn(ls, xx, derivative=True)
    return z, dz


def _check_kind(p: int) -> None:
    if p not in (1, 4):
        raise ValidationError(f"wave kind p must be 1 (regular) or 4 (outgoing), got {p}")


def eval_waves(l_max: int, p: int, k: complex, points: np.ndarray) -> np.ndarray:
    """All waves u_alpha^(p)(k r) at ``points``; shape (npts, 2L(L+2), 3).

    ``k`` may be complex for lossy media.
    """
    _check_kind(p)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r, theta, phi = cartesian_to_spherical(pts)
    if p == 4 and np.any(r == 0.0):
        raise ValidationError("outgoing waves are singular at the expansion origin")
    if np.iscomplexobj(k) and complex(k).imag != 0.0:
        return _eval_waves_complex(l_max, p, complex(k), r, theta, phi)
    x = np.maximum(float(np.real(k)) * r, _TINY_ARGUMENT)
    z, dz = _radial(l_max, x, p)
    return _assemble_waves(l_max, x, z, dz, theta, phi)


def _eval_waves_complex(l_max, p, k, r, theta, phi) -> np.ndarray:
    if p == 4:
        raise ValidationError("outgoing waves are only evaluated in lossless media")
    x = np.where(r > 0, k * r, _TINY_ARGUMENT)
    ls = np.arange(1, l_max + 1)[:, None]
    xx = np.broadcast_to(x[None, :], (l_max, x.shape[0]))
    z = spherical_jn(ls, xx)
    dz = spherical_jn(ls, xx, derivative=True)
    return _assemble_waves(l_max, x, z, dz, theta, phi)


def _assemble_waves(l_max, x, z, dz, theta, phi) -> np.ndarray:
    a1, a2, a3 = vector_harmonics(l_max, theta, phi)
    reps = np.array([2 * l + 1 for l in range(1, l_max + 1)])
    zl = np.repeat(z, reps, axis=0).T  # (npts, n_lm)
    dzl = np.repeat(dz, reps, axis=0).T
    ls = np.repeat(np.arange(1, l_max + 1, dtype=float), reps)
    xi = x[:, None]
    u1 = zl[..., None] * a1
    u2 = (zl / xi + dzl)[..., None] * a2 + (np.sqrt(ls * (ls + 1.0)) * zl / xi)[..., None] * a3
    out = np.empty((x.shape[0], 2 * zl.shape[1], 3), dtype=complex)
    out[:, 0::2] = u1
    out[:, 1::2] = u2
    return out


def eval_wave(alpha: WaveIndex, p: int, k: float, r: Sequence[float]) -> np.ndarray:
    """Single wave u_alpha^(p)(k r) as a complex 3-vector."""
    _check_kind(p)
    vals = eval_waves(alpha.l, p, k, np.asarray(r, dtype=float)[None, :])
    return vals[0, alpha.linear]


def far_patterns(l_max: int, theta, phi) -> np.ndarray:
    """Far-zone angular functions j^(l+2-tau) A_tau, shape (npts, 2L(L+2), 3).

    The far field of outgoing coefficients ``f`` is ``sqrt(Z) * f @ patterns``
    times ``exp(-j k r) / r``.
    """
    a1, a2, _ = vector_harmonics(l_max, theta, phi)
    out = np.empty((a1.shape[0], 2 * a1.shape[1], 3), dtype=complex)
    reps = np.array([2 * l + 1 for l in range(1, l_max + 1)])
    ls = np.repeat(np.arange(1, l_max + 1), reps)
    out[:, 0::2] = (1j ** (ls + 1))[None, :, None] * a1
    out[:, 1::2] = (1j**ls)[None, :, None] * a2
    return out


# --- Plane waves and the Green dyadic ---


def plane_wave_coeffs(
    k_hat: Sequence[float],
    e_hat: Sequence[float],
    amplitude: complex,
    k0: float,
    l_max: int,
    *,
    impedance: float = ETA0,
) -> CoeffVector:
    """Regular-wave coefficients of ``amplitude * e_hat * exp(-j k0 k_hat . r)``."""
    kh = np.asarray(k_hat, dtype=float)
    eh = np.asarray(e_hat, dtype=complex)
    if abs(np.linalg.norm(kh) - 1.0) > 1e-9 or abs(np.linalg.norm(eh) - 1.0) > 1e-9:
        raise ValidationError("propagation and polarization vectors must be unit length")
    if abs(np.dot(kh, eh)) > 1e-9:
        raise ValidationError(f"polarization {eh} is not orthogonal to propagation {kh}")
    _, theta, phi = cartesian_to_spherical(kh[None, :])
    a1, a2, _ = vector_harmonics(l_max, theta, phi)
    reps = np.array([2 * l + 1 for l in range(1, l_max + 1)])
    ls = np.repeat(np.arange(1, l_max + 1), reps)
    scale = 4.0 * math.pi * complex(amplitude) / (k0 * math.sqrt(impedance))
    values = np.empty(wave_count(l_max), dtype=complex)
    values[0::2] = scale * (-1j) ** ls * (a1[0] @ eh)
    values[1::2] = scale * (-1j) ** (ls - 1) * (a2[0] @ eh)
    return CoeffVector(values, "a_inc")


def plane_wave_field(
    k_hat: Sequence[float], e_hat: Sequence[float], amplitude: complex, k: float, points: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Direct (E, H) of a plane wave in free space."""
    kh = np.asarray(k_hat, dtype=float)
    eh = np.asarray(e_hat, dtype=complex)
    phase = np.exp(-1j * k * (np.atleast_2d(points) @ kh))
    e = complex(amplitude) * phase[:, None] * eh[None, :]
    h = np.cross(kh, e) / ETA0
    return e, h


def field_from_coeffs(
    coeffs: np.ndarray, p: int, k: float, points: np.ndarray, *, impedance: float = ETA0
) -> Tuple[np.ndarray, np.ndarray]:
    """(E, H) of a wave expansion at ``points``."""
    c = np.asarray(coeffs, dtype=complex)
    l_max = degree_from_count(c.shape[0])
    u = eval_waves(l_max, p, k, points)
    dual = np.arange(c.shape[0]) ^ 1
    e = k * math.sqrt(impedance) * np.einsum("nax,a->nx", u, c)
    h = 1j * k / math.sqrt(impedance) * np.einsum("nax,a->nx", u[:, dual], c)
    return e, h


def green_dyadic(k: float, r: np.ndarray, r_src: np.ndarray) -> np.ndarray:
    """Free-space dyadic Green function (I + grad grad / k^2) exp(-jkR)/(4 pi R)."""
    d = np.asarray(r, dtype=float) - np.asarray(r_src, dtype=float)
    big_r = float(np.linalg.norm(d))
    kr = k * big_r
    rr = np.outer(d, d) / big_r**2
    g = np.exp(-1j * kr) / (4.0 * math.pi * big_r)
    return g * (
        (1.0 - 1.0 / kr**2 - 1j / kr) * np.eye(3) + ((3.0 + 3.0j * kr) / kr**2 - 1.0) * rr
    )


def green_expansion_check(
    r: Sequence[float], r_prime: Sequence[float], k0: float, l_max: int
) -> float:
    """Relative residual of the truncated wave expansion of the Green dyadic."""
    ra = np.asarray(r, dtype=float)
    rb = np.asarray(r_prime, dtype=float)
    if np.linalg.norm(ra) >= np.linalg.norm(rb):
        raise ValidationError("the expansion needs |r| < |r'|")
    exact = green_dyadic(k0, ra, rb)
    u1 = eval_waves(l_max, 1, k0, ra[None, :])[0]
    u4 = eval_waves(l_max, 4, k0, rb[None, :])[0]
    approx = -1j * k0 * np.einsum("ai,aj->ij", u1, u4)
    return float(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
