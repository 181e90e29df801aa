import time

import numpy as np
import pytest

from hybridem.coupling import assemble_coupling
from hybridem.errors import ValidationError
from hybridem.geometry import Material, build_rwg, mesh_shell, mesh_sphere
from hybridem.gsm import gsm_canonical_dipole
from hybridem.hybrid import build_hybrid, effective_sparams
from hybridem.mom import assemble_impedance
from hybridem.spheres import LayeredSphere
from hybridem.tmatrix import (
    TMatrixBlocks,
    hybrid_gsm_t,
    load_tmatrix,
    save_tmatrix,
    tmatrix_analytic_sphere,
    tmatrix_from_mom,
)
from hybridem.units import wavenumber
from hybridem.wigner import Frame

from oracles import mie_t

FREQ = 300e6
K0 = wavenumber(FREQ)


def _unitarity_defect(gsm) -> float:
    block = np.block([[gsm.gamma, gsm.r], [gsm.t, gsm.s]])
    return float(np.linalg.norm(block.conj().T @ block - np.eye(block.shape[0]), 2))


def test_absent_structure_returns_the_antenna():
    gsm = gsm_canonical_dipole(FREQ, 3)
    composite = hybrid_gsm_t(gsm, TMatrixBlocks.empty(3, 3, FREQ)).as_gsm()

    np.testing.assert_allclose(composite.gamma, gsm.gamma)
    np.testing.assert_allclose(composite.s, gsm.s)
    np.testing.assert_allclose(composite.t, gsm.t)


def test_dipole_in_a_lossless_shell_stays_lossless():
    shell = LayeredSphere.shell(0.3, 0.36, Material.dielectric(4.0))
    blocks = tmatrix_analytic_sphere(shell, K0, 3, 6)
    composite = hybrid_gsm_t(gsm_canonical_dipole(FREQ, 3), blocks).as_gsm()

    assert composite.l_max == 6
    assert _unitarity_defect(composite) < 1e-9
    assert abs(composite.gamma[0, 0]) > 1e-3, "The shell reflects part of the dipole's power"


def test_lossy_shell_absorbs_power():
    shell = LayeredSphere.shell(0.3, 0.36, Material.dielectric(4.0, tan_delta=0.2))
    blocks = tmatrix_analytic_sphere(shell, K0, 3, 5)
    composite = hybrid_gsm_t(gsm_canonical_dipole(FREQ, 3), blocks)

    radiated = np.linalg.norm(composite.t[:, 0]) ** 2 + abs(composite.gamma[0, 0]) ** 2
    assert radiated < 1.0


def test_interior_truncation_must_match_the_antenna():
    blocks = TMatrixBlocks.empty(2, 4, FREQ)
    with pytest.raises(ValidationError):
        hybrid_gsm_t(gsm_canonical_dipole(FREQ, 3), blocks)
    with pytest.raises(ValidationError, match="shape"):
        TMatrixBlocks(
            t=np.zeros((6, 6)),
            psi=np.zeros((6, 6)),
            psi_t=np.zeros((6, 16)),
            rho=np.zeros((6, 6)),
            frequency=FREQ,
        )


def test_save_and_load_round_trip(tmp_path):
    shell = LayeredSphere.shell(0.3, 0.36, Material.dielectric(3.0))
    blocks = tmatrix_analytic_sphere(shell, K0, 2, 4)
    again = load_tmatrix(save_tmatrix(blocks, tmp_path / "shell.htm"))

    assert (again.l_int, again.l_ext) == (2, 4)
    np.testing.assert_array_equal(again.psi, blocks.psi)
    np.testing.assert_array_equal(again.rho, blocks.rho)


@pytest.mark.slow
def test_mom_blocks_of_a_pec_sphere_match_mie():
    mesh = mesh_sphere(0.15, 2)
    basis = build_rwg(mesh)
    z = assemble_impedance(mesh, basis, FREQ)
    u1 = assemble_coupling(basis, mesh, Frame(), K0, 3, 1)
    u4 = assemble_coupling(basis, mesh, Frame(), K0, 2, 4, r_a=0.05)
    blocks = tmatrix_from_mom(z, u1, u4)

    expected = mie_t(0.15, Material.pec(), K0, 3)
    np.testing.assert_allclose(np.diag(blocks.t)[:6], expected[:6], rtol=0.05)
    off = blocks.t - np.diag(np.diag(blocks.t))
    assert np.abs(off).max() < 0.05 * np.abs(expected[:6]).max()


@pytest.mark.slow
def test_composite_reflection_matches_the_mom_hybrid():
    material = Material.dielectric(3.0)
    gsm = gsm_canonical_dipole(FREQ, 2)

    start = time.perf_counter()
    mesh = mesh_shell(0.25, 0.4, 2, material)
    basis = build_rwg(mesh)
    z = assemble_impedance(mesh, basis, FREQ)
    u4 = assemble_coupling(basis, mesh, Frame(), K0, 2, 4, r_a=0.1)
    hybrid = effective_sparams(build_hybrid(z, u4, gsm))
    mom_seconds = time.perf_counter() - start

    u1 = assemble_coupling(basis, mesh, Frame(), K0, 4, 1)
    composite = hybrid_gsm_t(gsm, tmatrix_from_mom(z, u1, u4))
    np.testing.assert_allclose(composite.gamma, hybrid, atol=1e-8)

    start = time.perf_counter()
    analytic = hybrid_gsm_t(
        gsm, tmatrix_analytic_sphere(LayeredSphere.shell(0.25, 0.4, material), K0, 2, 4)
    )
    analytic_seconds = time.perf_counter() - start
    assert abs(composite.gamma[0, 0] - analytic.gamma[0, 0]) <= 5e-2
    assert analytic_seconds <= 0.01 * mom_seconds
