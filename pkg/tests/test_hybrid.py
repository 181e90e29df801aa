import math
import time

import numpy as np
import pytest

from hybridem.cache import HybridCache
from hybridem.coupling import assemble_coupling
from hybridem.errors import ValidationError
from hybridem.farfield import currents_far_vectors, directions, waves_far_vectors
from hybridem.geometry import (
    Material,
    build_rwg,
    mesh_shell,
    mesh_sphere,
    mesh_strip_dipole,
    transform_mesh,
)
from hybridem.gsm import (
    Gsm,
    PortWaves,
    gsm_canonical_dipole,
    gsm_from_mom_antenna,
    gsm_transform,
)
from hybridem.hybrid import (
    antenna_outgoing,
    build_hybrid,
    effective_sparams,
    factor_structure,
    hybrid_digest,
    smw_solve,
    solve_hybrid,
)
from hybridem.mom import (
    CurrentVector,
    PlaneWave,
    PortSpec,
    assemble_efie,
    assemble_impedance,
    excitation_plane_wave,
    solve_direct,
)
from hybridem.units import frequency_from_wavenumber, wavenumber
from hybridem.waves import plane_wave_coeffs, truncation_degree, wave_count
from hybridem.wigner import Frame, euler_matrix

from oracles import embedded_reflection, free_reflection, two_body_reflection, two_body_solve

FREQ = 300e6
K0 = wavenumber(FREQ)


@pytest.fixture(scope="module")
def sphere_structure():
    mesh = mesh_sphere(0.2, 1, center=(0.6, 0.0, 0.0))
    basis = build_rwg(mesh)
    z = assemble_efie(mesh, basis, FREQ)
    u4 = assemble_coupling(basis, mesh, Frame(), K0, 3, 4, r_a=0.1)
    return mesh, basis, z, u4


def test_smw_and_direct_paths_agree(sphere_structure):
    mesh, basis, z, u4 = sphere_structure
    gsm = gsm_canonical_dipole(FREQ, 3)
    factors = factor_structure(z, u4)
    direct = build_hybrid(z, u4, gsm)
    lean = build_hybrid(z, u4, gsm, factors=factors, assemble=False)

    np.testing.assert_allclose(
        effective_sparams(lean, path="smw"), effective_sparams(direct), rtol=1e-9, atol=1e-12
    )
    wave = PlaneWave.from_angles(0.7, 1.2, "phi")
    v_inc = excitation_plane_wave(basis, "efie", wave, FREQ)
    a_inc = plane_wave_coeffs(wave.k_hat, wave.e_hat, 1.0, K0, 3)
    i_d, f_d, w_d = solve_hybrid(direct, v_inc, a_inc, PortWaves([1.0]))
    i_s, f_s, w_s = smw_solve(lean, v_inc, a_inc, PortWaves([1.0]))
    scale = np.abs(i_d.values).max()
    np.testing.assert_allclose(i_s.values, i_d.values, atol=1e-9 * scale)
    np.testing.assert_allclose(f_s.values, f_d.values, atol=1e-9)
    np.testing.assert_allclose(w_s.values, w_d.values, atol=1e-9)
    np.testing.assert_allclose(
        antenna_outgoing(direct, i_d, a_inc, PortWaves([1.0])).values, f_d.values, atol=1e-12
    )


def test_modified_matrix_adds_the_antenna_scattering(sphere_structure):
    _, _, z, u4 = sphere_structure
    gsm = gsm_canonical_dipole(FREQ, 3)
    sys = build_hybrid(z, u4, gsm)
    u = u4.matrix
    expected = z.z + u.T @ gsm.half_scattering @ u

    np.testing.assert_allclose(sys.z_tilde, expected)


def test_structure_changes_the_reflection_only_slightly(sphere_structure):
    _, _, z, u4 = sphere_structure
    sys = build_hybrid(z, u4, gsm_canonical_dipole(FREQ, 3))
    gamma = effective_sparams(sys)[0, 0]

    assert 0.0 < abs(gamma) < 0.5, "A matched dipole near a small sphere stays well matched"


def test_build_checks_dimensions(sphere_structure):
    _, _, z, u4 = sphere_structure
    with pytest.raises(ValidationError, match="waves"):
        build_hybrid(z, u4, gsm_canonical_dipole(FREQ, 2))
    with pytest.raises(ValidationError, match="structure factors"):
        build_hybrid(z, u4, gsm_canonical_dipole(FREQ, 3), assemble=False)


def test_factorization_cache_round_trip(sphere_structure, tmp_path):
    _, _, z, u4 = sphere_structure
    cache = HybridCache(root=tmp_path)
    digest = hybrid_digest(z, u4)
    first = factor_structure(z, u4, cache=cache, digest=digest)

    again_z = assemble_efie(z.basis.mesh, z.basis, FREQ)
    second = factor_structure(again_z, u4, cache=cache, digest=digest)
    assert not first.from_cache
    assert second.from_cache
    assert cache.stats.as_dict() == {"hits": 2, "misses": 2, "writes": 2}
    np.testing.assert_allclose(second.g, first.g)


def _transparent_antenna(l_max: int) -> Gsm:
    n = wave_count(l_max)
    return Gsm(
        gamma=np.zeros((1, 1), dtype=complex),
        r=np.zeros((1, n), dtype=complex),
        t=np.zeros((n, 1), dtype=complex),
        s=np.eye(n, dtype=complex),
        l_max=l_max,
        frequency=FREQ,
    )


def test_transparent_antenna_leaves_the_structure_alone(sphere_structure):
    _, basis, z, u4 = sphere_structure
    gsm = _transparent_antenna(3)
    factors = factor_structure(z, u4)
    sys = build_hybrid(z, u4, gsm, factors=factors)

    np.testing.assert_array_equal(sys.z_tilde, z.z)
    lu, _ = sys.m_factor()
    np.testing.assert_array_equal(lu, np.eye(u4.n_wave))

    wave = PlaneWave.from_angles(0.4, 2.1, "theta")
    v_inc = excitation_plane_wave(basis, "efie", wave, FREQ)
    a_inc = plane_wave_coeffs(wave.k_hat, wave.e_hat, 1.0, K0, 3)
    (plain,) = solve_direct(z, v_inc)
    for solve in (solve_hybrid, smw_solve):
        current, f, _ = solve(sys, v_inc, a_inc, PortWaves([1.0]))
        scale = np.abs(plain.values).max()
        np.testing.assert_allclose(current.values, plain.values, rtol=1e-10, atol=1e-12 * scale)
        assert not np.any(f.values)


def test_repeated_builds_are_identical(sphere_structure):
    _, _, z, u4 = sphere_structure
    gsm = gsm_canonical_dipole(FREQ, 3)
    first = build_hybrid(z, u4, gsm)
    second = build_hybrid(z, u4, gsm)

    np.testing.assert_array_equal(first.z_tilde, second.z_tilde)
    np.testing.assert_array_equal(effective_sparams(first), effective_sparams(second))
    np.testing.assert_array_equal(factor_structure(z, u4).g, factor_structure(z, u4).g)


def test_lossy_structure_keeps_the_port_passive():
    mesh = mesh_sphere(0.2, 1, Material.dielectric(5.0, tan_delta=0.09), center=(0.6, 0.0, 0.0))
    basis = build_rwg(mesh)
    z = assemble_impedance(mesh, basis, FREQ)
    u4 = assemble_coupling(basis, mesh, Frame(), K0, 3, 4, r_a=0.1)
    gamma = effective_sparams(build_hybrid(z, u4, gsm_canonical_dipole(FREQ, 3)))

    assert np.linalg.norm(gamma, 2) <= 1.0 + 1e-9


@pytest.mark.slow
def test_effective_reflection_matches_the_joint_solve():
    antenna = mesh_strip_dipole(0.48, 0.01, 16)
    port = PortSpec((0.0, 0.0, 0.0), 73.0)
    l_max = truncation_degree(K0, 0.24)
    gsm = gsm_from_mom_antenna(antenna, [port], K0, l_max)
    structure = mesh_sphere(0.2, 2, center=(0.7, 0.0, 0.0))
    basis = build_rwg(structure)
    z = assemble_efie(structure, basis, FREQ)
    u4 = assemble_coupling(basis, structure, Frame(), K0, l_max, 4, r_a=0.24)

    gamma = effective_sparams(build_hybrid(z, u4, gsm))[0, 0]
    reference = two_body_reflection(antenna, structure, port, FREQ)
    assert abs(gamma - reference) < 0.02
    assert abs(reference - free_reflection(antenna, port, FREQ)) > abs(gamma - reference)


@pytest.mark.slow
def test_low_rank_update_outpaces_refactorization():
    mesh = mesh_sphere(0.3, 3, center=(0.8, 0.0, 0.0))
    basis = build_rwg(mesh)
    z = assemble_efie(mesh, basis, FREQ)
    u4 = assemble_coupling(basis, mesh, Frame(), K0, 2, 4, r_a=0.1)
    factors = factor_structure(z, u4)
    variants = [
        gsm_transform(gsm_canonical_dipole(FREQ, 2), 0.0, (0.0, beta, 0.0))
        for beta in (0.0, 0.4, 0.8, 1.2)
    ]

    start = time.perf_counter()
    direct = [effective_sparams(build_hybrid(z, u4, gsm)) for gsm in variants]
    t_direct = time.perf_counter() - start
    start = time.perf_counter()
    lean = [
        effective_sparams(build_hybrid(z, u4, gsm, factors=factors, assemble=False), path="smw")
        for gsm in variants
    ]
    t_lean = time.perf_counter() - start

    np.testing.assert_allclose(lean, direct, rtol=1e-8, atol=1e-12)
    assert t_direct >= 10.0 * t_lean


@pytest.mark.slow
def test_dipole_in_a_lossy_shell_matches_the_embedded_solve():
    length = 1.0
    antenna = mesh_strip_dipole(length, length / 10.0, 10)
    port = PortSpec((0.0, 0.0, 0.0), 50.0)
    r_a = 0.5 * math.hypot(length, length / 10.0)
    material = Material.dielectric(5.0, tan_delta=0.09)
    shell = mesh_shell(0.6 * length, 0.8 * length, 2, material)
    basis = build_rwg(shell)

    for k0_length in np.linspace(0.5 * math.pi, 2.0 * math.pi, 21):
        k0 = k0_length / length
        frequency = frequency_from_wavenumber(k0)
        l_max = truncation_degree(k0, r_a)
        gsm = gsm_from_mom_antenna(antenna, [port], k0, l_max)
        z = assemble_impedance(shell, basis, frequency)
        u4 = assemble_coupling(basis, shell, Frame(), k0, l_max, 4, r_a=r_a)
        gamma = effective_sparams(build_hybrid(z, u4, gsm))[0, 0]

        reference = embedded_reflection(antenna, shell, port, frequency)
        assert abs(gamma) <= 1.0
        assert abs(gamma - reference) <= 2e-2, f"k0 l = {k0_length:.3f}"


def _relative_db(field: np.ndarray) -> np.ndarray:
    power = np.sum(np.abs(field) ** 2, axis=1)
    return 10.0 * np.log10(power / power.max())


@pytest.mark.slow
def test_repositioned_gsm_matches_an_antenna_meshed_at_the_new_pose():
    antenna = mesh_strip_dipole(0.48, 0.01, 16)
    port = PortSpec((0.0, 0.0, 0.0), 73.0)
    r_a = 0.24
    gsm = gsm_from_mom_antenna(antenna, [port], K0, truncation_degree(K0, r_a))
    delta, euler = 0.1, (0.0, math.radians(30.0), 0.0)
    moved = gsm_transform(gsm, delta, euler)
    frame = Frame.from_pose(delta, euler)

    structure = mesh_sphere(0.2, 2, center=(0.7, 0.0, 0.0))
    basis = build_rwg(structure)
    z = assemble_efie(structure, basis, FREQ)
    u4 = assemble_coupling(basis, structure, Frame(), K0, moved.l_max, 4, r_a=r_a + delta)
    sys = build_hybrid(z, u4, moved)
    gamma = effective_sparams(sys)[0, 0]

    placed = transform_mesh(antenna, euler_matrix(*euler), frame.origin)
    reference, x, joint = two_body_solve(placed, structure, PortSpec(frame.origin, 73.0), FREQ)
    assert abs(gamma - reference) <= 5e-2

    theta = np.linspace(0.0, math.pi, 37)
    dirs = np.vstack([directions(theta, np.full_like(theta, phi)) for phi in (0.0, 0.5 * math.pi)])
    current, f, _ = solve_hybrid(sys, v=PortWaves([1.0]))
    hybrid_db = _relative_db(
        currents_far_vectors(current, basis, K0, dirs) + waves_far_vectors(f, Frame(), dirs, K0)
    )
    joint_db = _relative_db(currents_far_vectors(CurrentVector(x), joint, K0, dirs))
    visible = joint_db > -20.0
    np.testing.assert_allclose(hybrid_db[visible], joint_db[visible], atol=0.5)
