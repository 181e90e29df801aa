"""Closed-form static potentials of a flat triangle.

For observation points ``r`` and source triangles with corners ``c`` the
functions below return

* ``f0 = int 1/R dA'``
* ``fv = int (r' - rho)/R dA'`` where ``rho`` is ``r`` projected on the plane
* ``gs = int (r - r')/R^3 dA'``

using the edge decomposition of the surface integrals. Point and triangle
arrays broadcast against each other: ``points`` (..., 3), ``corners``
(..., 3, 3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StaticPotentials:
    f0: np.ndarray
    fv: np.ndarray
    gs: np.ndarray
    rho: np.ndarray


def _edge_log(r_plus, r_minus, l_plus, l_minus, r0_sq):
    """ln((R+ + l+)/(R- + l-)) without cancellation for negative l."""
    num = np.where(l_plus > 0, r_plus + l_plus, r0_sq / (r_plus - l_plus))
    den = np.where(l_minus > 0, r_minus + l_minus, r0_sq / (r_minus - l_minus))
    return np.log(num / den)


def static_potentials(points: np.ndarray, corners: np.ndarray) -> StaticPotentials:
    r = np.asarray(points, dtype=float)
    c = np.asarray(corners, dtype=float)
    e1 = c[..., 1, :] - c[..., 0, :]
    e2 = c[..., 2, :] - c[..., 0, :]
    nrm = np.cross(e1, e2)
    n_hat = nrm / np.linalg.norm(nrm, axis=-1, keepdims=True)
    d = np.einsum("...x,...x->...", r - c[..., 0, :], n_hat)
    rho = r - d[..., None] * n_hat
    abs_d = np.abs(d)
    scale = np.linalg.norm(e1, axis=-1) + np.linalg.norm(e2, axis=-1)
    floor = (1e-14 * scale) ** 2

    f0 = np.zeros(np.broadcast_shapes(r.shape[:-1], c.shape[:-2]))
    fv = np.zeros(f0.shape + (3,))
    u_f2 = np.zeros_like(fv)
    beta_sum = np.zeros_like(f0)
    for i in range(3):
        p_minus = c[..., i, :]
        p_plus = c[..., (i + 1) % 3, :]
        edge = p_plus - p_minus
        s_hat = edge / np.linalg.norm(edge, axis=-1, keepdims=True)
        u_hat = np.cross(s_hat, n_hat)
        l_plus = np.einsum("...x,...x->...", p_plus - rho, s_hat)
        l_minus = np.einsum("...x,...x->...", p_minus - rho, s_hat)
        p0 = np.einsum("...x,...x->...", p_minus - rho, u_hat)
        r0_sq = np.maximum(p0 * p0 + d * d, floor)
        r_plus = np.linalg.norm(r - p_plus, axis=-1)
        r_minus = np.linalg.norm(r - p_minus, axis=-1)
        f2 = _edge_log(r_plus, r_minus, l_plus, l_minus, r0_sq)
        beta = np.arctan2(p0 * l_plus, r0_sq + abs_d * r_plus) - np.arctan2(
            p0 * l_minus, r0_sq + abs_d * r_minus
        )
        f0 = f0 + p0 * f2 - abs_d * beta
        fv = fv + 0.5 * u_hat * (r0_sq * f2 + l_plus * r_plus - l_minus * r_minus)[..., None]
        u_f2 = u_f2 + u_hat * f2[..., None]
        beta_sum = beta_sum + beta
    gs = u_f2 + n_hat * (np.sign(d) * beta_sum)[..., None]
    return StaticPotentials(f0=f0, fv=fv, gs=gs, rho=rho)
