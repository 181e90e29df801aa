"""Quadrature rules shared by assembly, coupling, PO and far-field code.

Triangle rules are symmetric Dunavant rules in barycentric form with weights
normalized to 1, so an integral over a triangle of area A is ``A * sum(w f)``.
Sphere rules pair Gauss-Legendre nodes in cos(theta) with a trapezoid rule in
phi; with ``n_theta >= L + 1`` and ``n_phi >= 2L + 1`` they integrate
band-limited products of degree ``2L`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class TriangleRule:
    bary: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])


def _orbit(a: float, b: float, c: float) -> list:
    perms = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
    return sorted(perms)


def _build_rule(orbits) -> TriangleRule:
    bary = []
    weights = []
    for w, (a, b, c) in orbits:
        pts = _orbit(a, b, c)
        bary.extend(pts)
        weights.extend([w] * len(pts))
    return TriangleRule(bary=np.array(bary, dtype=float), weights=np.array(weights, dtype=float))


DUNAVANT_6 = _build_rule(
    [
        (0.223381589678011, (0.108103018168070, 0.445948490915965, 0.445948490915965)),
        (0.109951743655322, (0.816847572980459, 0.091576213509771, 0.091576213509771)),
    ]
)

DUNAVANT_12 = _build_rule(
    [
        (0.116786275726379, (0.501426509658179, 0.249286745170910, 0.249286745170910)),
        (0.050844906370207, (0.873821971016996, 0.063089014491502, 0.063089014491502)),
        (0.082851075618374, (0.053145049844817, 0.310352451033784, 0.636502499121399)),
    ]
)


def triangle_points(corners: np.ndarray, rule: TriangleRule) -> np.ndarray:
    """Map barycentric nodes onto triangles.

    ``corners`` has shape (nt, 3, 3) (triangle, vertex, xyz); returns (nt, nq, 3).
    """
    return np.einsum("qi,tix->tqx", rule.bary, corners)


@dataclass(frozen=True)
class SphereGrid:
    theta: np.ndarray  # (n,)
    phi: np.ndarray  # (n,)
    weights: np.ndarray  # (n,) solid-angle weights, sum 4*pi

    @property
    def directions(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.stack(
            [st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)], axis=-1
        )


def sphere_grid(n_theta: int, n_phi: int) -> SphereGrid:
    """Product rule on the unit sphere, flattened theta-major."""
    x, wx = leggauss(int(n_theta))
    phi = 2.0 * np.pi * np.arange(int(n_phi)) / int(n_phi)
    theta = np.arccos(x)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    ww = np.outer(wx, np.full(int(n_phi), 2.0 * np.pi / int(n_phi)))
    return SphereGrid(theta=tt.ravel(), phi=pp.ravel(), weights=ww.ravel())


def sphere_grid_for_degree(l_max: int, extra: int = 2) -> SphereGrid:
    """Grid exact for products of two fields band-limited to ``l_max``."""
    return sphere_grid(l_max + 1 + extra, 2 * l_max + 2 + 2 * extra)


def gauss_interval(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w
