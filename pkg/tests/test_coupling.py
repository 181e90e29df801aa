import math

import numpy as np
import pytest

from hybridem.coupling import assemble_coupling, check_antenna_clearance
from hybridem.errors import GeometryError, ValidationError
from hybridem.geometry import Material, build_rwg, mesh_plate, mesh_sphere
from hybridem.mom import PlaneWave, excitation_plane_wave
from hybridem.units import ETA0, frequency_from_wavenumber
from hybridem.waves import eval_waves, plane_wave_coeffs
from hybridem.wigner import Frame

from oracles import project_subdivided

K0 = 8.0


def test_outgoing_coupling_matches_dense_projection():
    mesh = mesh_plate(0.3, 0.2, 2, 2, center=(0.1, 0.0, 0.5))
    basis = build_rwg(mesh)
    frame = Frame.from_pose(0.05, (0.3, 0.6, 0.0))
    u4 = assemble_coupling(basis, mesh, frame, K0, 3, 4, r_a=0.2)

    def waves(points):
        local = frame.to_local(points)
        u = eval_waves(3, 4, K0, local) @ frame.rotation.T
        return np.transpose(u, (0, 2, 1))

    reference = K0 * math.sqrt(ETA0) * project_subdivided(basis, waves).T
    assert u4.matrix.shape == (30, basis.count)
    np.testing.assert_allclose(u4.matrix, reference, rtol=2e-3, atol=2e-3 * np.abs(reference).max())


@pytest.mark.parametrize("material", [Material.pec(), Material.dielectric(2.0)])
def test_regular_coupling_tests_an_incident_expansion(material):
    mesh = mesh_sphere(0.15, 1, material, center=(0.05, -0.02, 0.03))
    basis = build_rwg(mesh)
    frame = Frame((0.01, 0.0, -0.02), (0.2, 0.4, -0.1))
    u1 = assemble_coupling(basis, mesh, frame, K0, 10, 1)
    wave = PlaneWave.from_angles(1.1, 0.4, "theta")

    q = frame.rotation
    phase = np.exp(-1j * K0 * (np.asarray(wave.k_hat) @ np.asarray(frame.origin)))
    a = plane_wave_coeffs(q.T @ np.asarray(wave.k_hat), q.T @ np.asarray(wave.e_hat), phase, K0, 10)
    v = excitation_plane_wave(basis, u1.formulation, wave, frequency_from_wavenumber(K0))

    np.testing.assert_allclose(u1.matrix.T @ a.values, v.values, rtol=1e-6, atol=1e-9)
    assert u1.formulation == ("efie" if material.is_pec else "pmchwt")


def test_antenna_sphere_must_clear_the_structure():
    mesh = mesh_sphere(0.5, 1)
    frame = Frame((0.0, 0.0, 0.9))

    assert check_antenna_clearance(mesh, frame, 0.2) > 0.2
    with pytest.raises(GeometryError, match="intersects"):
        check_antenna_clearance(mesh, frame, 0.45)
    with pytest.raises(GeometryError):
        assemble_coupling(build_rwg(mesh), mesh, Frame((0.0, 0.0, 0.4)), K0, 2, 4, r_a=0.2)


def test_coupling_checks_its_inputs():
    mesh = mesh_sphere(0.5, 1)
    with pytest.raises(ValidationError):
        assemble_coupling(build_rwg(mesh), mesh, Frame(), K0, 2, 3)
    with pytest.raises(ValidationError, match="different mesh"):
        assemble_coupling(build_rwg(mesh_sphere(0.5, 1)), mesh, Frame(), K0, 2, 1)
