import math

import numpy as np
import pytest

from hybridem.errors import ValidationError
from hybridem.farfield import currents_far_vectors, waves_far_vectors
from hybridem.geometry import (
    Material,
    build_rwg,
    mesh_paraboloid,
    mesh_plate,
    mesh_sphere,
    mesh_strip_dipole,
    transform_mesh,
)
from hybridem.gsm import PortWaves, gsm_canonical_dipole, gsm_from_mom_antenna
from hybridem.mom import CurrentVector, PortSpec, assemble_efie, port_matrix
from hybridem.po import (
    illuminated_triangles,
    neumann_outgoing,
    po_far_field,
    po_gamma_firstorder,
    po_gamma_fullcoupled,
    po_gamma_neumann,
    po_outgoing,
    po_rho,
    second_term_bound,
)
from hybridem.units import wavenumber
from hybridem.waves import CoeffVector, truncation_degree
from hybridem.wigner import Frame, euler_matrix

from oracles import two_body_solve

FREQ = 300e6
K0 = wavenumber(FREQ)


@pytest.fixture(scope="module")
def reflector():
    plate = mesh_plate(2.0, 2.0, 10, 10, center=(0.0, 0.0, -0.5))
    gsm = gsm_canonical_dipole(FREQ, 3)
    rho = po_rho(plate, Frame(), K0, 3)
    return plate, gsm, rho


def test_plate_below_the_antenna_is_fully_lit(reflector):
    plate, _, rho = reflector

    assert rho.illuminated.shape[0] == plate.n_triangles
    assert np.abs(rho.matrix).max() > 0.0


def test_back_facing_triangles_are_culled():
    plate = mesh_plate(2.0, 2.0, 4, 4, center=(0.0, 0.0, 0.5))
    lit = illuminated_triangles(plate, Frame(), "cull")
    rho = po_rho(plate, Frame(), K0, 2)

    assert lit.shape[0] == 0
    np.testing.assert_array_equal(rho.matrix, 0.0)
    assert illuminated_triangles(plate, Frame(), "none").shape[0] == plate.n_triangles
    with pytest.raises(ValidationError):
        illuminated_triangles(plate, Frame(), "ray-trace")


def test_multiple_reflections_stay_within_the_bound(reflector):
    _, gsm, rho = reflector
    full = po_gamma_fullcoupled(gsm, rho)
    first = po_gamma_firstorder(gsm, rho)

    assert np.linalg.norm(full - first, 2) <= second_term_bound(gsm, rho) + 1e-12
    assert abs(full[0, 0] - first[0, 0]) > 0.0


def test_neumann_series_converges_to_the_full_solution(reflector):
    _, gsm, rho = reflector
    full = po_gamma_fullcoupled(gsm, rho)
    errors = [abs(po_gamma_neumann(gsm, rho, n)[0, 0] - full[0, 0]) for n in (1, 2, 4, 20)]

    np.testing.assert_allclose(po_gamma_neumann(gsm, rho, 1), po_gamma_firstorder(gsm, rho))
    assert errors[-1] < 1e-6
    assert errors == sorted(errors, reverse=True)

    sums = neumann_outgoing(gsm, rho, PortWaves([1.0]), 30)
    np.testing.assert_allclose(sums[-1].values, po_outgoing(gsm, rho, PortWaves([1.0])).values)
    with pytest.raises(ValidationError):
        po_gamma_neumann(gsm, rho, 0)


def test_reflector_adds_to_the_far_field(reflector):
    plate, gsm, rho = reflector
    f = po_outgoing(gsm, rho, PortWaves([1.0]))
    dirs = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    field = po_far_field(rho, plate, f, dirs)

    assert field.shape == (2, 3)
    np.testing.assert_allclose(np.einsum("dx,dx->d", field, dirs), 0.0, atol=1e-9)
    assert np.linalg.norm(field[1]) > 0.0


def test_physical_optics_needs_pec():
    sphere = mesh_sphere(0.3, 1, Material.dielectric(2.0), center=(0.0, 0.0, -1.0))
    with pytest.raises(ValidationError, match="PEC"):
        po_rho(sphere, Frame(), K0, 2)


def test_truncations_must_match(reflector):
    plate, _, rho = reflector
    with pytest.raises(ValidationError):
        po_gamma_fullcoupled(gsm_canonical_dipole(FREQ, 2), rho)
    with pytest.raises(ValidationError):
        po_far_field(rho, plate, CoeffVector.zeros(2), np.eye(3))


def _boresight_gain_db(dish_field: np.ndarray, free_field: np.ndarray) -> float:
    """Boresight intensity with the dish over the feed's own broadside peak."""
    return float(10.0 * np.log10(np.sum(np.abs(dish_field) ** 2) / np.sum(np.abs(free_field) ** 2)))


@pytest.mark.slow
def test_paraboloid_boresight_gain_matches_the_joint_solve():
    dish = mesh_paraboloid(3.0, 1.2, 14)
    feed = mesh_strip_dipole(0.48, 0.01, 16)
    port = PortSpec((0.0, 0.0, 0.0), 73.0)
    euler = (0.0, 0.5 * math.pi, 0.0)
    frame = Frame(euler=euler)
    boresight = np.array([[0.0, 0.0, 1.0]])
    broadside = np.array([[0.0, 1.0, 0.0]])

    gsm = gsm_from_mom_antenna(feed, [port], K0, truncation_degree(K0, 0.24))
    rho = po_rho(dish, frame, K0, gsm.l_max)
    f = po_outgoing(gsm, rho, PortWaves([1.0]))
    hybrid_dish = waves_far_vectors(f, frame, boresight, K0) + po_far_field(rho, dish, f, boresight)
    hybrid_free = waves_far_vectors(CoeffVector(gsm.t[:, 0]), frame, broadside, K0)

    placed = transform_mesh(feed, euler_matrix(*euler), (0.0, 0.0, 0.0))
    _, x, joint = two_body_solve(placed, dish, port, FREQ)
    joint_dish = currents_far_vectors(CurrentVector(x), joint, K0, boresight)
    basis = build_rwg(placed)
    p = port_matrix(basis, [port])[:, 0]
    z = assemble_efie(placed, basis, FREQ).z + port.reference_impedance * np.outer(p, p)
    free = CurrentVector(np.linalg.solve(z, p))
    joint_free = currents_far_vectors(free, basis, K0, broadside)

    hybrid_gain = _boresight_gain_db(hybrid_dish, hybrid_free)
    joint_gain = _boresight_gain_db(joint_dish, joint_free)
    assert joint_gain > 6.0, "The dish focuses the feed"
    assert abs(hybrid_gain - joint_gain) <= 1.0
