"""Far-zone patterns of surface currents and spherical-wave expansions.

Every pattern is the vector ``F`` in ``E ~ F exp(-j k0 r) / r``. Gain uses a
caller-supplied reference power (accepted or radiated); RCS uses the
incident plane-wave amplitude.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Literal, Optional, Sequence, Tuple

import numpy as np

from . import formats
from .errors import ValidationError
from .geometry import RwgBasis, TriangleMesh
from .mom import CurrentVector, current_samples
from .quadrature import DUNAVANT_12, sphere_grid
from .units import ETA0
from .waves import CoeffVector, cartesian_to_spherical, far_patterns, unit_vectors
from .wigner import Frame

logger = logging.getLogger(__name__)

CutKind = Literal["phi", "theta"]
Normalization = Literal["gain", "directivity"]

PATTERN_HEADER = (
    "theta_deg",
    "phi_deg",
    "re_Etheta",
    "im_Etheta",
    "re_Ephi",
    "im_Ephi",
    "gain_dbi",
    "rcs_dbsm",
)


@dataclass(frozen=True)
class CutSpec:
    """A pattern cut: ``phi`` fixes phi and sweeps theta over [0, 360] degrees."""

    kind: CutKind = "phi"
    angle_deg: float = 0.0
    step_deg: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("phi", "theta"):
            raise ValidationError(f"cut kind must be 'phi' or 'theta', got {self.kind!r}")
        if not 0.0 < self.step_deg <= 360.0:
            raise ValidationError(f"cut step must be in (0, 360] degrees, got {self.step_deg}")

    def angles(self) -> Tuple[np.ndarray, np.ndarray]:
        n = int(round(360.0 / self.step_deg))
        sweep = np.linspace(0.0, 360.0, n + 1)
        fixed = np.full_like(sweep, self.angle_deg)
        if self.kind == "phi":
            return np.radians(sweep), np.radians(fixed)
        return np.radians(fixed), np.radians(sweep)

    @property
    def label(self) -> str:
        return f"{self.kind}{self.angle_deg:g}"


def directions(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


@dataclass(frozen=True, eq=False)
class PatternCut:
    theta: np.ndarray  # radians
    phi: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray
    reference_power: Optional[float] = None
    incident_amplitude: Optional[float] = None

    @property
    def intensity(self) -> np.ndarray:
        """Radiation intensity (W/sr)."""
        return (np.abs(self.e_theta) ** 2 + np.abs(self.e_phi) ** 2) / (2.0 * ETA0)

    @property
    def gain_dbi(self) -> np.ndarray:
        if not self.reference_power:
            return np.full(self.theta.shape, np.nan)
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(4.0 * math.pi * self.intensity / self.reference_power)

    @property
    def rcs_dbsm(self) -> np.ndarray:
        if not self.incident_amplitude:
            return np.full(self.theta.shape, np.nan)
        power = np.abs(self.e_theta) ** 2 + np.abs(self.e_phi) ** 2
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(4.0 * math.pi * power / self.incident_amplitude**2)

    def normalized(
        self, *, reference_power: Optional[float] = None, incident_amplitude: Optional[float] = None
    ) -> "PatternCut":
        return replace(
            self,
            reference_power=(
                reference_power if reference_power is not None else self.reference_power
            ),
            incident_amplitude=(
                incident_amplitude if incident_amplitude is not None else self.incident_amplitude
            ),
        )

    def rows(self):
        gain = self.gain_dbi
        rcs = self.rcs_dbsm
        for i in range(self.theta.shape[0]):
            yield (
                float(np.degrees(self.theta[i])),
                float(np.degrees(self.phi[i])),
                float(self.e_theta[i].real),
                float(self.e_theta[i].imag),
                float(self.e_phi[i].real),
                float(self.e_phi[i].imag),
                float(gain[i]),
                float(rcs[i]),
            )


def _to_cut(theta: np.ndarray, phi: np.ndarray, field: np.ndarray) -> PatternCut:
    _, t_hat, p_hat = unit_vectors(theta, phi)
    return PatternCut(
        theta=theta,
        phi=phi,
        e_theta=np.einsum("nx,nx->n", field, t_hat),
        e_phi=np.einsum("nx,nx->n", field, p_hat),
    )


def _radiation_integral(k: float, dirs: np.ndarray, pts: np.ndarray, weights: np.ndarray, current):
    phase = np.exp(1j * k * dirs @ pts.T) * weights[None, :]
    return phase @ current


def currents_far_vectors(
    currents: CurrentVector, basis: RwgBasis, k0: float, dirs: np.ndarray
) -> np.ndarray:
    samples, j_cur, _ = current_samples(basis, currents.electric, DUNAVANT_12)
    pts = samples.points.reshape(-1, 3)
    w = samples.weights.ravel()
    nj = _radiation_integral(k0, dirs, pts, w, j_cur.reshape(-1, 3))
    field = -1j * k0 * ETA0 / (4.0 * math.pi) * (
        nj - np.einsum("dx,dx->d", nj, dirs)[:, None] * dirs
    )
    if currents.formulation == "pmchwt":
        _, m_cur, _ = current_samples(basis, currents.magnetic, DUNAVANT_12)
        lm = _radiation_integral(k0, dirs, pts, w, m_cur.reshape(-1, 3))
        field = field + 1j * k0 / (4.0 * math.pi) * np.cross(dirs, lm)
    return field


def far_from_currents(
    currents: CurrentVector, mesh: TriangleMesh, basis: RwgBasis, k0: float, cut: CutSpec
) -> PatternCut:
    """Free-space pattern of the exterior equivalent currents."""
    if basis.mesh is not mesh:
        raise ValidationError("RWG basis was built on a different mesh")
    theta, phi = cut.angles()
    field = currents_far_vectors(currents, basis, k0, directions(theta, phi))
    return _to_cut(theta, phi, field)


def waves_far_vectors(
    f: CoeffVector, frame: Frame, dirs: np.ndarray, k0: Optional[float]
) -> np.ndarray:
    if not f.is_outgoing:
        raise ValidationError(f"far fields need outgoing coefficients, got kind {f.kind!r}")
    origin = np.asarray(frame.origin, dtype=float)
    if np.any(origin != 0.0) and k0 is None:
        raise ValidationError("a displaced frame needs k0 for the phase reference")
    q = frame.rotation
    local = dirs @ q
    _, theta_l, phi_l = cartesian_to_spherical(local)
    patterns = far_patterns(f.l_max, theta_l, phi_l)
    field = math.sqrt(ETA0) * np.einsum("nax,a->nx", patterns, f.values) @ q.T
    if k0 is not None:
        field = field * np.exp(1j * k0 * dirs @ origin)[:, None]
    return field


def far_from_waves(
    f: CoeffVector, frame: Frame, cut: CutSpec, *, k0: Optional[float] = None
) -> PatternCut:
    """Pattern of an outgoing expansion defined in ``frame``."""
    theta, phi = cut.angles()
    return _to_cut(theta, phi, waves_far_vectors(f, frame, directions(theta, phi), k0))


def far_from_vectors(
    field_fn: Callable[[np.ndarray], np.ndarray], cut: CutSpec
) -> PatternCut:
    theta, phi = cut.angles()
    return _to_cut(theta, phi, field_fn(directions(theta, phi)))


def superpose(a: PatternCut, b: PatternCut) -> PatternCut:
    if a.theta.shape != b.theta.shape or not (
        np.allclose(a.theta, b.theta, atol=1e-12) and np.allclose(a.phi, b.phi, atol=1e-12)
    ):
        raise ValidationError("cannot superpose patterns sampled on different cuts")
    return PatternCut(
        theta=a.theta,
        phi=a.phi,
        e_theta=a.e_theta + b.e_theta,
        e_phi=a.e_phi + b.e_phi,
        reference_power=a.reference_power or b.reference_power,
        incident_amplitude=a.incident_amplitude or b.incident_amplitude,
    )


def radiated_power(field_fn: Callable[[np.ndarray], np.ndarray], *, n_theta: int = 48) -> float:
    """Power through the far sphere by Gauss-Legendre x trapezoid quadrature."""
    grid = sphere_grid(n_theta, 2 * n_theta)
    field = field_fn(grid.directions)
    intensity = np.sum(np.abs(field) ** 2, axis=1) / (2.0 * ETA0)
    return float(np.sum(grid.weights * intensity))


def accepted_power(v: Sequence[complex], w: Sequence[complex]) -> float:
    """Power accepted at the ports, ``1/2 sum(|v|^2 - |w|^2)``."""
    vv = np.asarray(v, dtype=complex)
    ww = np.asarray(w, dtype=complex)
    return 0.5 * float(np.sum(np.abs(vv) ** 2 - np.abs(ww) ** 2))


def write_pattern_csv(path: formats.PathLike, cut: PatternCut):
    return formats.write_csv(path, PATTERN_HEADER, cut.rows())
