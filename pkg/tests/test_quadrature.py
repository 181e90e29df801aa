import math

import numpy as np
import pytest

from hybridem.quadrature import (
    DUNAVANT_6,
    DUNAVANT_12,
    gauss_interval,
    sphere_grid,
    sphere_grid_for_degree,
    triangle_points,
)
from hybridem.waves import real_harmonics


@pytest.mark.parametrize("rule", [DUNAVANT_6, DUNAVANT_12])
def test_triangle_rule_weights_and_nodes(rule):
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(rule.bary.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(rule.bary >= 0.0), "Nodes must lie inside the triangle"


def test_triangle_rule_integrates_quadratics_exactly():
    corners = np.array([[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]]])
    pts = triangle_points(corners, DUNAVANT_6)[0]
    area = 1.0
    # int x^2 over the triangle (0,0),(2,0),(0,1) is 2/3
    assert area * DUNAVANT_6.weights @ pts[:, 0] ** 2 == pytest.approx(2.0 / 3.0)


def test_sphere_grid_weights_cover_the_sphere():
    grid = sphere_grid(7, 12)

    assert grid.weights.sum() == pytest.approx(4.0 * math.pi)
    np.testing.assert_allclose(np.linalg.norm(grid.directions, axis=1), 1.0)


def test_sphere_grid_keeps_harmonics_orthonormal():
    l_max = 5
    grid = sphere_grid_for_degree(l_max)
    y = real_harmonics(l_max, grid.theta, grid.phi)
    gram = (y * grid.weights[:, None]).T @ y

    np.testing.assert_allclose(gram, np.eye(gram.shape[0]), atol=1e-12)


def test_gauss_interval_maps_the_weights():
    x, w = gauss_interval(5, 1.0, 3.0)

    assert w.sum() == pytest.approx(2.0)
    assert np.all((x > 1.0) & (x < 3.0))
    assert w @ x**3 == pytest.approx((3.0**4 - 1.0) / 4.0)
