import math

import numpy as np
import pytest

from hybridem.waves import plane_wave_coeffs, wave_count
from hybridem.wigner import (
    Frame,
    axial_translation,
    euler_from_matrix,
    euler_matrix,
    rotation_from_matrix,
    rotation_matrix,
    transform_matrix,
)

K0 = 2.0 * math.pi


def test_zero_rotation_is_identity():
    d = rotation_matrix(0.0, 0.0, 0.0, 3)

    np.testing.assert_allclose(d, np.eye(wave_count(3)), atol=1e-12)


def test_rotation_is_orthogonal_and_composes():
    q1 = euler_matrix(0.3, 1.1, -0.4)
    q2 = euler_matrix(-1.2, 0.5, 2.0)
    d1 = rotation_from_matrix(q1, 3)
    d2 = rotation_from_matrix(q2, 3)

    np.testing.assert_allclose(d1 @ d1.T, np.eye(d1.shape[0]), atol=1e-12)
    np.testing.assert_allclose(rotation_from_matrix(q1 @ q2, 3), d2 @ d1, atol=1e-12)


def test_euler_angles_round_trip():
    for angles in [(0.3, 1.1, -0.4), (2.0, 0.0, 0.0), (-1.0, math.pi, 0.0)]:
        q = euler_matrix(*angles)
        np.testing.assert_allclose(euler_matrix(*euler_from_matrix(q)), q, atol=1e-12)


def test_frame_maps_points_both_ways():
    frame = Frame.from_pose(0.4, (0.2, 0.9, -0.5))
    pts = np.array([[0.1, 0.2, 0.3], [-1.0, 0.0, 2.0]])

    np.testing.assert_allclose(frame.to_local(frame.to_global(pts)), pts, atol=1e-12)
    np.testing.assert_allclose(
        frame.to_global(np.zeros(3))[0], frame.rotation @ np.array([0.0, 0.0, 0.4])
    )


@pytest.mark.parametrize(
    "delta,euler", [(0.0, (0.4, 0.8, -0.3)), (0.1, (0.0, 0.0, 0.0)), (-0.08, (1.0, 2.2, 0.5))]
)
def test_transform_matches_the_plane_wave_seen_from_the_new_frame(delta, euler):
    k_hat = np.array([0.6, 0.0, 0.8])
    e_hat = np.array([0.0, 1.0, 0.0])
    l_in, l_out = 14, 6
    global_coeffs = plane_wave_coeffs(k_hat, e_hat, 1.0, K0, l_in).values

    frame = Frame.from_pose(delta, euler)
    q = frame.rotation
    phase = np.exp(-1j * K0 * (k_hat @ np.asarray(frame.origin)))
    expected = plane_wave_coeffs(q.T @ k_hat, q.T @ e_hat, phase, K0, l_out).values

    t = transform_matrix(delta, euler, K0, l_in, l_out=l_out)
    assert t.matrix.shape == (wave_count(l_out), wave_count(l_in))
    np.testing.assert_allclose(t.matrix @ global_coeffs, expected, atol=1e-8)


def test_translation_reverses_by_transposition():
    fwd = axial_translation(0.05, K0, 4)
    back = axial_translation(-0.05, K0, 4)

    np.testing.assert_allclose(back, fwd.T, atol=1e-12)
    np.testing.assert_allclose(axial_translation(0.0, K0, 3), np.eye(wave_count(3)))


@pytest.mark.parametrize("l_max,delta", [(4, 0.05), (8, 0.05), (12, 0.1)])
def test_padded_translation_inverts(l_max, delta):
    fwd = axial_translation(delta, K0, l_max + 4, l_out=l_max)
    back = axial_translation(-delta, K0, l_max, l_out=l_max + 4)

    np.testing.assert_allclose(fwd @ back, np.eye(wave_count(l_max)), atol=1e-9)


def test_long_translation_warns(caplog):
    with caplog.at_level("WARNING"):
        axial_translation(5.0, K0, 3)
    assert "expansion accuracy degrades" in caplog.text
