import numpy as np
import pytest

from hybridem.errors import ValidationError
from hybridem.geometry import Material
from hybridem.spheres import LayeredSphere, scattering_diagonal, sphere_blocks, transfer_matrix
from hybridem.waves import index_arrays

from oracles import layered_system, mie_t

K0 = 10.0


@pytest.mark.parametrize(
    "material",
    [Material.pec(), Material.dielectric(2.5), Material.dielectric(4.0, tan_delta=0.05)],
)
def test_solid_sphere_reflection_matches_mie(material):
    sphere = LayeredSphere.solid(0.12, material)
    blocks = sphere_blocks(sphere, K0, 6)

    np.testing.assert_allclose(blocks.t, mie_t(0.12, material, K0, 6), rtol=1e-9, atol=1e-12)
    np.testing.assert_array_equal(blocks.rho, 0.0)


def test_lossless_sphere_scatters_without_loss():
    s = scattering_diagonal(LayeredSphere.solid(0.1, Material.dielectric(3.0)), K0, 5)
    np.testing.assert_allclose(np.abs(s), 1.0, atol=1e-12)

    lossy = scattering_diagonal(
        LayeredSphere.solid(0.1, Material.dielectric(3.0, tan_delta=0.1)), K0, 5
    )
    assert np.all(np.abs(lossy) < 1.0)


@pytest.mark.parametrize("tau", [1, 2])
@pytest.mark.parametrize("l", [1, 3])
def test_coated_pec_core_matches_the_global_interface_solve(tau, l):
    materials = (Material.pec(), Material.dielectric(2.2), Material.dielectric(4.5))
    radii = (0.05, 0.08, 0.1)
    p = transfer_matrix(LayeredSphere(radii, materials), K0, tau, l)
    t_ref, _ = layered_system(radii, materials, K0, tau, l, cavity=False)

    assert p[1, 0] / p[0, 0] == pytest.approx(t_ref, rel=1e-9)
    assert p[0, 1] == 0.0 and p[1, 1] == 0.0


@pytest.mark.parametrize("tau", [1, 2])
@pytest.mark.parametrize("l", [1, 2, 4])
def test_cavity_blocks_match_the_global_interface_solve(tau, l):
    shell = LayeredSphere.shell(0.08, 0.1, Material.dielectric(3.5))
    blocks = sphere_blocks(shell, K0, 4)
    taus, ls, ms = index_arrays(4)
    j = int(np.flatnonzero((taus == tau) & (ls == l) & (ms == 0))[0])

    t_ref, core_ref = layered_system(shell.radii, shell.materials, K0, tau, l, cavity=False)
    rho_ref, psi_ref = layered_system(shell.radii, shell.materials, K0, tau, l, cavity=True)
    assert blocks.t[j] == pytest.approx(t_ref, rel=1e-9)
    assert blocks.psi_t[j] == pytest.approx(core_ref, rel=1e-9)
    assert blocks.rho[j] == pytest.approx(rho_ref, rel=1e-9)
    assert blocks.psi[j] == pytest.approx(psi_ref, rel=1e-9)


def test_lossless_transfer_matrix_has_unit_determinant():
    shell = LayeredSphere.shell(0.07, 0.1, Material.dielectric(6.0))
    for tau in (1, 2):
        for l in (1, 2, 5):
            assert np.linalg.det(transfer_matrix(shell, K0, tau, l)) == pytest.approx(1.0)

    blocks = sphere_blocks(shell, K0, 5)
    np.testing.assert_allclose(blocks.psi, blocks.psi_t, rtol=1e-9)


def test_layered_sphere_validation():
    with pytest.raises(ValidationError):
        LayeredSphere((0.1, 0.05), (Material.pec(), Material.dielectric(2.0)))
    with pytest.raises(ValidationError):
        LayeredSphere((0.05, 0.1), (Material.dielectric(2.0), Material.pec()))
    with pytest.raises(ValidationError):
        LayeredSphere((0.1,), ())
    with pytest.raises(ValidationError):
        sphere_blocks(LayeredSphere.solid(0.1, Material.pec()), 0.0, 2)
