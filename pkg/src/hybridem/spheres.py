"""Wave matching across concentric spherical interfaces.

A layered sphere is described from the center outwards: ``radii[i]`` is the
outer radius of layer ``i`` and ``materials[i]`` its filling. The outermost
region is free space. Only the core may be PEC; a free-space core models a
cavity that can hold an antenna.

In every region the field of one (tau, l) channel is
``c * regular + d * outgoing`` in the power-normalized wave basis of that
region's medium. Tangential continuity at each interface gives a 2x2
transfer matrix; the product over all interfaces maps the core amplitudes
``(c0, d0)`` to the free-space amplitudes ``(a, f)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from .errors import ValidationError
from .geometry import Material
from .units import ETA0
from .waves import index_arrays

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayeredSphere:
    radii: Tuple[float, ...]
    materials: Tuple[Material, ...]

    def __post_init__(self) -> None:
        radii = tuple(float(r) for r in self.radii)
        if not radii or len(radii) != len(self.materials):
            raise ValidationError("a layered sphere needs one material per radius")
        if radii[0] <= 0.0:
            raise ValidationError(f"radii must be positive, got {radii[0]}")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValidationError(f"layers overlap: radii {radii} are not strictly increasing")
        if any(m.is_pec for m in self.materials[1:]):
            raise ValidationError("only the core of a layered sphere may be PEC")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "materials", tuple(self.materials))

    @classmethod
    def solid(cls, radius: float, material: Material) -> "LayeredSphere":
        return cls((radius,), (material,))

    @classmethod
    def shell(cls, r_inner: float, r_outer: float, material: Material) -> "LayeredSphere":
        return cls((r_inner, r_outer), (Material.dielectric(1.0), material))

    @property
    def outer_radius(self) -> float:
        return self.radii[-1]

    @property
    def has_cavity(self) -> bool:
        core = self.materials[0]
        return (not core.is_pec) and core.eps_r == 1.0 and core.mu_r == 1.0


def _medium(material: Material, k0: float) -> Tuple[complex, complex]:
    """(k, Z) of a penetrable medium."""
    return k0 * material.refractive_index, ETA0 * material.relative_impedance


def _bessel(l: int, x: complex) -> Tuple[complex, complex, complex, complex]:  # noqa: E741
    """j_l, h_l^(2) and their Riccati derivatives (x z)'/x."""
    j = complex(spherical_jn(l, x))
    dj = complex(spherical_jn(l, x, derivative=True))
    y = complex(spherical_yn(l, x))
    dy = complex(spherical_yn(l, x, derivative=True))
    h = j - 1j * y
    dh = dj - 1j * dy
    return j, h, j / x + dj, h / x + dh


def _interface_matrix(
    tau: int, l: int, k: complex, z: complex, r: float  # noqa: E741
) -> np.ndarray:
    """Tangential (E, H) of unit regular/outgoing amplitudes at radius r."""
    j, h, pj, ph = _bessel(l, k * r)
    e_scale = k * np.sqrt(z)
    h_scale = k / np.sqrt(z)
    if tau == 1:
        return np.array([[e_scale * j, e_scale * h], [h_scale * pj, h_scale * ph]])
    return np.array([[e_scale * pj, e_scale * ph], [h_scale * j, h_scale * h]])


def _pec_start(tau: int, l: int, k: complex, r: float) -> np.ndarray:  # noqa: E741
    """Amplitudes just outside a PEC core with zero tangential E."""
    j, h, pj, ph = _bessel(l, k * r)
    if tau == 1:
        return np.array([h, -j])
    return np.array([ph, -pj])


def transfer_matrix(sphere: LayeredSphere, k0: float, tau: int, l: int) -> np.ndarray:  # noqa: E741
    """Product of interface matrices from the core to free space.

    For a PEC core the first column holds the amplitude vector just outside
    the core and the second column is zero.
    """
    media = list(sphere.materials) + [Material.dielectric(1.0)]
    if sphere.materials[0].is_pec:
        k1, _ = _medium(media[1], k0)
        start = _pec_start(tau, l, k1, sphere.radii[0])
        p = np.zeros((2, 2), dtype=complex)
        p[:, 0] = start
        first = 1
    else:
        p = np.eye(2, dtype=complex)
        first = 0
    for i in range(first, len(sphere.radii)):
        k_in, z_in = _medium(media[i], k0)
        k_out, z_out = _medium(media[i + 1], k0)
        r = sphere.radii[i]
        inner = _interface_matrix(tau, l, k_in, z_in, r)
        outer = _interface_matrix(tau, l, k_out, z_out, r)
        p = np.linalg.solve(outer, inner @ p)
    return p


@dataclass(frozen=True, eq=False)
class SphereBlocks:
    """Diagonal wave-matching blocks of a layered sphere, per linear wave index."""

    t: np.ndarray
    psi: np.ndarray
    psi_t: np.ndarray
    rho: np.ndarray


def sphere_blocks(sphere: LayeredSphere, k0: float, l_max: int) -> SphereBlocks:
    """Exterior reflection ``t``, transmissions ``psi``/``psi_t`` and cavity reflection ``rho``.

    Cavity quantities are zero for PEC or filled cores.
    """
    if k0 <= 0.0:
        raise ValidationError(f"k0 must be positive, got {k0}")
    taus, ls, _ = index_arrays(l_max)
    cache = {}
    cavity = sphere.has_cavity
    for tau in (1, 2):
        for l in range(1, l_max + 1):  # noqa: E741
            p = transfer_matrix(sphere, k0, tau, l)
            t = p[1, 0] / p[0, 0]
            if cavity:
                det = p[0, 0] * p[1, 1] - p[0, 1] * p[1, 0]
                cache[(tau, l)] = (t, det / p[0, 0], 1.0 / p[0, 0], -p[0, 1] / p[0, 0])
            else:
                cache[(tau, l)] = (t, 0.0, 0.0, 0.0)
    vals = np.array([cache[(int(a), int(b))] for a, b in zip(taus, ls)], dtype=complex)
    return SphereBlocks(t=vals[:, 0], psi=vals[:, 1], psi_t=vals[:, 2], rho=vals[:, 3])


def scattering_diagonal(sphere: LayeredSphere, k0: float, l_max: int) -> np.ndarray:
    """``1 + 2 t`` per wave: the diagonal scattering matrix for exterior incidence."""
    return 1.0 + 2.0 * sphere_blocks(sphere, k0, l_max).t

