import math

import numpy as np
import pytest

from hybridem.errors import MeshError, ValidationError
from hybridem.geometry import (
    Material,
    build_rwg,
    enclosing_radii,
    load_mesh,
    make_mesh,
    mesh_paraboloid,
    mesh_plate,
    mesh_shell,
    mesh_sphere,
    mesh_strip_dipole,
    nearest_edge,
    save_mesh,
    transform_mesh,
)

TETRA_V = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]


def _write(tmp_path, text, name="m.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_dielectric_loss_is_given_one_way():
    lossy = Material.dielectric(5.0, tan_delta=0.09)
    assert lossy.eps_r == pytest.approx(5.0 - 0.45j)
    assert Material.dielectric(5.0 - 0.45j).eps_r == pytest.approx(lossy.eps_r)
    with pytest.raises(ValidationError, match="either as complex eps_r or as tan_delta"):
        Material.dielectric(5.0 - 0.45j, tan_delta=0.09)


def test_icosphere_counts_and_radius():
    mesh = mesh_sphere(0.3, 2)

    assert mesh.n_triangles == 20 * 4**2
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.max(np.abs(radii - 0.3)) <= 1e-12 * 0.3, "Vertices should lie on the sphere"
    assert mesh.euler_characteristic == 2
    assert mesh.closed


def test_icosphere_is_outward_oriented():
    mesh = mesh_sphere(1.0, 1)

    assert 0.0 < mesh.signed_volume < 4.0 / 3.0 * math.pi
    outward = np.einsum("ij,ij->i", mesh.normals, mesh.centroids)
    assert np.all(outward > 0.0), "Every normal should point away from the center"


def test_load_mesh_parses_comments_and_repairs_orientation(tmp_path):
    # last triangle deliberately wound the wrong way
    text = "\n".join(
        ["# tetrahedron", "counts 4 4"]
        + [f"v {x} {y} {z}  # corner" for x, y, z in TETRA_V]
        + ["t 0 2 1", "t 0 1 3", "t 0 3 2", "t 1 3 2"]
    )
    mesh = load_mesh(_write(tmp_path, text))

    assert mesh.n_triangles == 4
    assert mesh.signed_volume == pytest.approx(1.0 / 6.0)


def test_load_mesh_rejects_bad_files(tmp_path):
    with pytest.raises(MeshError):
        load_mesh(_write(tmp_path, "v 0 0 0\n", "nocounts.txt"))
    with pytest.raises(MeshError):
        load_mesh(_write(tmp_path, "counts 2 0\nv 0 0 0\n", "short.txt"))
    with pytest.raises(MeshError):
        load_mesh(_write(tmp_path, "counts 3 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nt 0 1 7\n", "ref.txt"))


def test_open_surface_needs_explicit_permission():
    v = [(0, 0, 0), (1, 0, 0), (0, 1, 0)]
    with pytest.raises(MeshError, match="non-manifold"):
        make_mesh(v, [(0, 1, 2)])

    mesh = make_mesh(v, [(0, 1, 2)], require_closed=False)
    assert not mesh.closed


def test_edge_shared_by_three_triangles_is_rejected():
    v = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1)]
    with pytest.raises(MeshError, match="non-manifold"):
        make_mesh(v, [(0, 1, 2), (0, 1, 3), (0, 1, 4)], require_closed=False)


def test_degenerate_triangle_is_rejected():
    v = [(0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0)]
    with pytest.raises(MeshError, match="degenerate"):
        make_mesh(v, [(0, 1, 2), (0, 1, 3)], require_closed=False)


def test_save_and_load_preserve_geometry(tmp_path):
    mesh = mesh_sphere(0.5, 1)
    path = save_mesh(mesh, tmp_path / "sphere.txt", comment="test sphere")
    again = load_mesh(path)

    np.testing.assert_array_equal(again.vertices, mesh.vertices)
    assert again.signed_volume == pytest.approx(mesh.signed_volume)


def test_rwg_counts_on_closed_and_open_meshes():
    sphere = mesh_sphere(1.0, 1)
    assert build_rwg(sphere).count == 3 * sphere.n_triangles // 2

    plate = mesh_plate(1.0, 1.0, 3, 3)
    basis = build_rwg(plate)
    boundary = 4 * 3
    total_edges = plate.edges.shape[0]
    assert basis.count == total_edges - boundary


def test_rwg_normal_component_is_continuous_across_edges():
    mesh = mesh_sphere(1.0, 1)
    basis = build_rwg(mesh)

    for n in range(0, basis.count, 7):
        a, b = mesh.vertices[basis.edges[n]]
        mid = 0.5 * (a + b)
        edge = (b - a) / np.linalg.norm(b - a)
        values = []
        for side, tri, free in (
            ("plus", basis.tri_plus[n], basis.free_plus[n]),
            ("minus", basis.tri_minus[n], basis.free_minus[n]),
        ):
            away = mid - mesh.vertices[free]
            away -= (away @ edge) * edge
            away /= np.linalg.norm(away)
            values.append(basis.evaluate(n, mid, side) @ away)
        assert values[0] == pytest.approx(1.0)
        assert values[1] == pytest.approx(-1.0), "Minus half points back into its own triangle"


def test_enclosing_radii_and_saving():
    antenna = mesh_strip_dipole(0.2, 0.01, 4)
    structure = mesh_sphere(1.0, 1, center=(0.0, 0.0, 0.0))
    radii = enclosing_radii(antenna, structure)

    assert radii.r_a == pytest.approx(math.hypot(0.1, 0.005))
    assert radii.r_b == pytest.approx(1.0)
    assert radii.predicted_saving == pytest.approx(radii.kappa**6)


def test_nearest_edge_finds_the_dipole_feed():
    mesh = mesh_strip_dipole(0.5, 0.02, 10)
    basis = build_rwg(mesh)
    n = nearest_edge(basis, (0.0, 0.0, 0.0))

    mid = mesh.vertices[basis.edges[n]].mean(axis=0)
    np.testing.assert_allclose(mid, 0.0, atol=1e-12)
    assert basis.length[n] == pytest.approx(0.02)


def test_shell_has_outward_outer_and_inward_inner_wall():
    shell = mesh_shell(0.5, 0.6, 1, Material.dielectric(3.0))
    expected = 4.0 / 3.0 * math.pi * (0.6**3 - 0.5**3)

    assert shell.closed
    assert 0.0 < shell.signed_volume < expected * 1.05
    radii = np.linalg.norm(shell.centroids, axis=1)
    outward = np.einsum("ij,ij->i", shell.normals, shell.centroids)
    inner = radii < 0.55
    assert np.all(outward[inner] < 0.0)
    assert np.all(outward[~inner] > 0.0)


def test_shell_rejects_overlapping_radii():
    with pytest.raises(ValidationError):
        mesh_shell(0.6, 0.5, 1, Material.dielectric(2.0))


def test_paraboloid_normals_face_the_focus():
    dish = mesh_paraboloid(1.0, 0.4, 4)

    assert not dish.closed
    to_focus = -dish.centroids
    assert np.all(np.einsum("ij,ij->i", dish.normals, to_focus) > 0.0)


def test_rigid_motion_keeps_orientation_and_volume():
    mesh = mesh_sphere(0.3, 1)
    q = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    moved = transform_mesh(mesh, q, (1.0, 2.0, -0.5))

    np.testing.assert_allclose(moved.vertices.mean(axis=0), [1.0, 2.0, -0.5], atol=1e-12)
    assert moved.signed_volume == pytest.approx(mesh.signed_volume)
    assert moved.closed
