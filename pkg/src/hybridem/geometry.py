"""Triangle meshes, RWG bases and enclosing-sphere radii.

Orientation convention: every triangle normal points out of the material
into the surrounding free space. For a solid body that is the outward
normal; for the inner wall of a hollow shell the normal points into the
cavity, so that component has negative signed volume.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import MeshError, ValidationError

logger = logging.getLogger(__name__)

MaterialKind = Literal["pec", "dielectric"]


@dataclass(frozen=True)
class Material:
    kind: MaterialKind = "pec"
    eps_r: complex = 1.0 + 0.0j
    mu_r: complex = 1.0 + 0.0j

    @classmethod
    def pec(cls) -> "Material":
        return cls(kind="pec")

    @classmethod
    def dielectric(
        cls, eps_r: complex, *, tan_delta: float = 0.0, mu_r: complex = 1.0
    ) -> "Material":
        eps = complex(eps_r)
        if tan_delta and eps.imag:
            raise ValidationError(
                f"give loss either as complex eps_r or as tan_delta, got {eps} and {tan_delta}"
            )
        if tan_delta:
            eps = complex(eps.real * (1.0 - 1j * float(tan_delta)))
        return cls(kind="dielectric", eps_r=eps, mu_r=complex(mu_r))

    @property
    def is_pec(self) -> bool:
        return self.kind == "pec"

    @property
    def refractive_index(self) -> complex:
        n = np.sqrt(complex(self.eps_r) * complex(self.mu_r))
        # lossy media with e^{+jwt} have Im(n) <= 0
        return complex(n if n.imag <= 0 else -n)

    @property
    def relative_impedance(self) -> complex:
        return complex(np.sqrt(complex(self.mu_r) / complex(self.eps_r)))

    def describe(self) -> str:
        if self.is_pec:
            return "pec"
        return f"dielectric(eps_r={self.eps_r:.6g}, mu_r={self.mu_r:.6g})"


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (nv, 3) meters
    triangles: np.ndarray  # (nt, 3) vertex indices
    material: Material = field(default_factory=Material.pec)
    closed: bool = True

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def corners(self) -> np.ndarray:
        return self.vertices[self.triangles]

    @cached_property
    def _cross(self) -> np.ndarray:
        c = self.corners
        if c.shape[0] == 0:
            return np.zeros((0, 3))
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        if self.n_triangles == 0:
            return np.zeros((0, 3))
        return self._cross / (2.0 * self.areas[:, None])

    @cached_property
    def centroids(self) -> np.ndarray:
        if self.n_triangles == 0:
            return np.zeros((0, 3))
        return self.corners.mean(axis=1)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs."""
        if self.n_triangles == 0:
            return np.zeros((0, 2), dtype=np.int64)
        return np.unique(_all_edges(self.triangles), axis=0)

    @cached_property
    def max_edge_length(self) -> np.ndarray:
        """Longest edge of every triangle."""
        c = self.corners
        if c.shape[0] == 0:
            return np.zeros(0)
        lens = np.linalg.norm(c - np.roll(c, -1, axis=1), axis=2)
        return lens.max(axis=1)

    @property
    def signed_volume(self) -> float:
        c = self.corners
        if c.shape[0] == 0:
            return 0.0
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - int(self.edges.shape[0]) + self.n_triangles

    def content_bytes(self) -> bytes:
        return (
            np.ascontiguousarray(self.vertices, dtype="<f8").tobytes()
            + np.ascontiguousarray(self.triangles, dtype="<i8").tobytes()
            + self.material.describe().encode()
        )


@dataclass(frozen=True)
class EnclosingRadii:
    r_a: float
    r_b: float

    @property
    def kappa(self) -> float:
        return self.r_b / self.r_a

    @property
    def predicted_saving(self) -> float:
        """Dense-update saving factor kappa**6 of a cached structure."""
        return self.kappa**6


@dataclass(frozen=True)
class HalfFunctions:
    """Per-triangle halves of RWG functions: psi = coef * (r - free) on ``tri``."""

    function: np.ndarray
    tri: np.ndarray
    free: np.ndarray
    coef: np.ndarray
    div: np.ndarray


@dataclass(frozen=True, eq=False)
class RwgBasis:
    mesh: TriangleMesh
    edges: np.ndarray  # (N, 2)
    tri_plus: np.ndarray
    tri_minus: np.ndarray
    free_plus: np.ndarray  # vertex indices opposite the edge
    free_minus: np.ndarray
    length: np.ndarray

    @property
    def count(self) -> int:
        return int(self.length.shape[0])

    @cached_property
    def halves(self) -> HalfFunctions:
        mesh = self.mesh
        n = self.count
        tri = np.concatenate([self.tri_plus, self.tri_minus])
        free = mesh.vertices[np.concatenate([self.free_plus, self.free_minus])]
        sign = np.concatenate([np.ones(n), -np.ones(n)])
        lengths = np.concatenate([self.length, self.length])
        area = mesh.areas[tri]
        return HalfFunctions(
            function=np.concatenate([np.arange(n), np.arange(n)]),
            tri=tri,
            free=free,
            coef=sign * lengths / (2.0 * area),
            div=sign * lengths / area,
        )

    @cached_property
    def midpoints(self) -> np.ndarray:
        return self.mesh.vertices[self.edges].mean(axis=1)

    def evaluate(
        self, n: int, point: Sequence[float], side: Literal["plus", "minus"]
    ) -> np.ndarray:
        """psi_n at ``point`` using the plus or minus triangle formula."""
        r = np.asarray(point, dtype=float)
        if side == "plus":
            tri, v, s = self.tri_plus[n], self.free_plus[n], 1.0
        else:
            tri, v, s = self.tri_minus[n], self.free_minus[n], -1.0
        area = self.mesh.areas[tri]
        return s * self.length[n] / (2.0 * area) * (r - self.mesh.vertices[v])

    def nearest_function(self, point: Sequence[float]) -> int:
        d = np.linalg.norm(self.midpoints - np.asarray(point, dtype=float), axis=1)
        return int(np.argmin(d))


def nearest_edge(basis: RwgBasis, point: Sequence[float]) -> int:
    """RWG function whose edge midpoint is closest to ``point``; used to place ports."""
    if basis.count == 0:
        raise ValidationError("mesh has no interior edges")
    return basis.nearest_function(point)


# --- Parsing and validation ---


def _all_edges(triangles: np.ndarray) -> np.ndarray:
    t = np.asarray(triangles)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)
    return np.sort(e, axis=1)


def _parse_mesh_text(text: str, source: str) -> Tuple[np.ndarray, np.ndarray]:
    counts: Optional[Tuple[int, int]] = None
    verts: List[List[float]] = []
    tris: List[List[int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag, args = parts[0], parts[1:]
        try:
            if tag == "counts" and len(args) == 2 and counts is None:
                counts = (int(args[0]), int(args[1]))
            elif tag == "v" and len(args) == 3:
                verts.append([float(a) for a in args])
            elif tag == "t" and len(args) == 3:
                tris.append([int(a) for a in args])
            else:
                raise ValueError(f"unexpected record {tag!r}")
        except ValueError as exc:
            raise MeshError(f"{source}:{lineno}: {exc}") from exc
    if counts is None:
        raise MeshError(f"{source}: missing 'counts <nv> <nt>' header")
    if counts != (len(verts), len(tris)):
        raise MeshError(
            f"{source}: header declares {counts[0]} vertices/{counts[1]} triangles, "
            f"found {len(verts)}/{len(tris)}"
        )
    vertices = np.array(verts, dtype=float).reshape(-1, 3)
    triangles = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if triangles.size and (triangles.min() < 0 or triangles.max() >= len(verts)):
        raise MeshError(f"{source}: triangle references a missing vertex")
    return vertices, triangles


def _check_manifold(triangles: np.ndarray, require_closed: bool) -> None:
    if triangles.shape[0] == 0:
        return
    _, counts = np.unique(_all_edges(triangles), axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError(f"non-manifold edge shared by {int(counts.max())} triangles")
    if require_closed and np.any(counts == 1):
        raise MeshError(f"non-manifold edge: {int(np.sum(counts == 1))} open boundary edges")


def _check_degenerate(vertices: np.ndarray, triangles: np.ndarray) -> None:
    if triangles.shape[0] == 0:
        return
    c = vertices[triangles]
    area = 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
    scale = float(np.ptp(vertices, axis=0).max()) or 1.0
    bad = np.flatnonzero(area <= 1e-14 * scale * scale)
    if bad.size:
        raise MeshError(f"degenerate triangle {int(bad[0])} (zero area)")


def _orient_components(triangles: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Flip triangles so neighbors traverse shared edges in opposite directions.

    Returns the re-oriented triangles and the triangle indices of each
    edge-connected component.
    """
    tris = np.array(triangles, dtype=np.int64, copy=True)
    edge_map: Dict[Tuple[int, int], List[int]] = {}
    for t, (a, b, c) in enumerate(tris):
        for u, v in ((a, b), (b, c), (c, a)):
            edge_map.setdefault((min(u, v), max(u, v)), []).append(t)

    def directed(t: int) -> set:
        a, b, c = tris[t]
        return {(int(a), int(b)), (int(b), int(c)), (int(c), int(a))}

    visited = np.zeros(len(tris), dtype=bool)
    components: List[np.ndarray] = []
    for seed in range(len(tris)):
        if visited[seed]:
            continue
        visited[seed] = True
        queue = deque([seed])
        members = [seed]
        while queue:
            t = queue.popleft()
            for u, v in directed(t):
                for n in edge_map[(min(u, v), max(u, v))]:
                    if n == t:
                        continue
                    same_direction = (u, v) in directed(n)
                    if visited[n]:
                        if same_direction:
                            raise MeshError(
                                f"orientation not repairable: triangles {t} and {n} conflict"
                            )
                        continue
                    if same_direction:
                        tris[n] = tris[n][[0, 2, 1]]
                    visited[n] = True
                    members.append(n)
                    queue.append(n)
        components.append(np.array(sorted(members), dtype=np.int64))
    return tris, components


def _winding_number(point: np.ndarray, corners: np.ndarray) -> float:
    a = corners[:, 0] - point
    b = corners[:, 1] - point
    c = corners[:, 2] - point
    la, lb, lc = (np.linalg.norm(x, axis=1) for x in (a, b, c))
    num = np.einsum("ij,ij->i", a, np.cross(b, c))
    den = (
        la * lb * lc
        + np.einsum("ij,ij->i", a, b) * lc
        + np.einsum("ij,ij->i", a, c) * lb
        + np.einsum("ij,ij->i", b, c) * la
    )
    return float(np.sum(2.0 * np.arctan2(num, den)) / (4.0 * math.pi))


def _component_volume(vertices: np.ndarray, tris: np.ndarray) -> float:
    c = vertices[tris]
    return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


def _normalize_orientation(
    vertices: np.ndarray, triangles: np.ndarray, closed: bool
) -> np.ndarray:
    tris, components = _orient_components(triangles)
    if not closed:
        return tris
    depth = []
    for i, comp in enumerate(components):
        probe = vertices[tris[comp[0], 0]]
        inside = 0
        for j, other in enumerate(components):
            if i != j and abs(_winding_number(probe, vertices[tris[other]])) > 0.5:
                inside += 1
        depth.append(inside)
    for comp, d in zip(components, depth):
        vol = _component_volume(vertices, tris[comp])
        want_positive = d % 2 == 0
        if (vol > 0) != want_positive:
            tris[comp] = tris[comp][:, [0, 2, 1]]
    if len(components) > 1:
        logger.debug(
            "orientation normalized over %d components (depths %s)", len(components), depth
        )
    return tris


def make_mesh(
    vertices: np.ndarray,
    triangles: np.ndarray,
    material: Optional[Material] = None,
    *,
    require_closed: bool = True,
) -> TriangleMesh:
    """Validate raw arrays and return an outward-oriented mesh."""
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    _check_degenerate(v, t)
    _check_manifold(t, require_closed)
    closed = bool(require_closed)
    if not require_closed and t.shape[0]:
        _, counts = np.unique(_all_edges(t), axis=0, return_counts=True)
        closed = bool(np.all(counts == 2))
    t = _normalize_orientation(v, t, closed)
    return TriangleMesh(vertices=v, triangles=t, material=material or Material.pec(), closed=closed)


def load_mesh(
    path: Union[str, Path],
    material: Optional[Material] = None,
    *,
    require_closed: bool = True,
) -> TriangleMesh:
    """Read the ``counts``/``v``/``t`` text format and validate it."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {p}: {exc}") from exc
    vertices, triangles = _parse_mesh_text(text, str(p))
    mesh = make_mesh(vertices, triangles, material, require_closed=require_closed)
    logger.info(
        "loaded %s: %d vertices, %d triangles, %s",
        p.name,
        mesh.n_vertices,
        mesh.n_triangles,
        mesh.material.describe(),
    )
    return mesh


def save_mesh(mesh: TriangleMesh, path: Union[str, Path], *, comment: str = "") -> Path:
    p = Path(path)
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"counts {mesh.n_vertices} {mesh.n_triangles}")
    lines.extend(f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist())
    lines.extend(f"t {i} {j} {k}" for i, j, k in mesh.triangles.tolist())
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


# --- RWG ---


def build_rwg(mesh: TriangleMesh) -> RwgBasis:
    """One RWG function per interior edge; boundary edges of open meshes are skipped."""
    tris = mesh.triangles
    if tris.shape[0] == 0:
        empty = np.zeros(0, dtype=np.int64)
        no_edges = np.zeros((0, 2), dtype=np.int64)
        return RwgBasis(mesh, no_edges, empty, empty, empty, empty, np.zeros(0))
    owners: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for t, (a, b, c) in enumerate(tris.tolist()):
        for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
            owners.setdefault((min(u, v), max(u, v)), []).append((t, w))
    edges, plus, minus, fplus, fminus = [], [], [], [], []
    for key in sorted(owners):
        pair = owners[key]
        if len(pair) > 2:
            raise MeshError(f"non-manifold edge {key} shared by {len(pair)} triangles")
        if len(pair) == 1:
            if mesh.closed:
                raise MeshError(f"non-manifold edge {key}: open boundary on a closed mesh")
            continue
        (t0, w0), (t1, w1) = pair
        edges.append(key)
        plus.append(t0)
        minus.append(t1)
        fplus.append(w0)
        fminus.append(w1)
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    length = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)
    basis = RwgBasis(
        mesh=mesh,
        edges=e,
        tri_plus=np.array(plus, dtype=np.int64),
        tri_minus=np.array(minus, dtype=np.int64),
        free_plus=np.array(fplus, dtype=np.int64),
        free_minus=np.array(fminus, dtype=np.int64),
        length=length,
    )
    logger.debug("built %d RWG functions", basis.count)
    return basis


def enclosing_radii(
    antenna: TriangleMesh,
    structure: TriangleMesh,
    antenna_origin: Sequence[float] = (0.0, 0.0, 0.0),
    structure_origin: Optional[Sequence[float]] = None,
) -> EnclosingRadii:
    if antenna.n_vertices == 0 or structure.n_vertices == 0:
        raise ValidationError("enclosing_radii needs non-empty meshes")
    pa = np.asarray(antenna_origin, dtype=float)
    pb = pa if structure_origin is None else np.asarray(structure_origin, dtype=float)
    r_a = float(np.linalg.norm(antenna.vertices - pa, axis=1).max())
    r_b = float(np.linalg.norm(structure.vertices - pb, axis=1).max())
    if r_a <= 0.0:
        raise ValidationError("antenna enclosing radius is zero")
    return EnclosingRadii(r_a=r_a, r_b=r_b)


# --- Canonical meshes ---


def _icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    g = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, g, 0], [1, g, 0], [-1, -g, 0], [1, -g, 0],
            [0, -1, g], [0, 1, g], [0, -1, -g], [0, 1, -g],
            [g, 0, -1], [g, 0, 1], [-g, 0, -1], [-g, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return v / np.linalg.norm(v, axis=1)[:, None], f


def _subdivide(vertices: List[np.ndarray], faces: np.ndarray) -> np.ndarray:
    cache: Dict[Tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key not in cache:
            m = vertices[i] + vertices[j]
            vertices.append(m / np.linalg.norm(m))
            cache[key] = len(vertices) - 1
        return cache[key]

    out = []
    for a, b, c in faces.tolist():
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
    return np.array(out, dtype=np.int64)


def _unit_icosphere(subdivisions: int) -> Tuple[np.ndarray, np.ndarray]:
    if subdivisions < 0:
        raise ValidationError(f"subdivisions must be >= 0, got {subdivisions}")
    v, f = _icosahedron()
    verts = list(v)
    for _ in range(int(subdivisions)):
        f = _subdivide(verts, f)
    v = np.array(verts)
    return v / np.linalg.norm(v, axis=1)[:, None], f


def mesh_sphere(
    radius: float,
    subdivisions: int,
    material: Optional[Material] = None,
    *,
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> TriangleMesh:
    """Icosphere with ``20 * 4**subdivisions`` triangles, vertices on the sphere."""
    if radius <= 0:
        raise ValidationError(f"radius must be positive, got {radius}")
    v, f = _unit_icosphere(subdivisions)
    v = radius * v + np.asarray(center, dtype=float)
    return make_mesh(v, f, material)


def mesh_shell(
    r_inner: float,
    r_outer: float,
    subdivisions: int,
    material: Material,
    *,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    inner_subdivisions: Optional[int] = None,
) -> TriangleMesh:
    """Hollow spherical shell: two concentric icospheres, inner wall facing the cavity."""
    if not 0 < r_inner < r_outer:
        raise ValidationError(
            f"shell radii must satisfy 0 < r_inner < r_outer, got {r_inner}, {r_outer}"
        )
    vo, fo = _unit_icosphere(subdivisions)
    vi, fi = _unit_icosphere(subdivisions if inner_subdivisions is None else inner_subdivisions)
    c = np.asarray(center, dtype=float)
    v = np.vstack([r_outer * vo + c, r_inner * vi + c])
    f = np.vstack([fo, fi + len(vo)])
    return make_mesh(v, f, material)


def _grid_mesh(points: np.ndarray, nu: int, nv: int) -> np.ndarray:
    """Triangulate an (nu+1) x (nv+1) structured point grid (u-major)."""
    tris = []
    for i in range(nu):
        for j in range(nv):
            a = i * (nv + 1) + j
            b = a + nv + 1
            tris.append([a, b, b + 1])
            tris.append([a, b + 1, a + 1])
    return np.array(tris, dtype=np.int64)


def mesh_plate(
    size_x: float,
    size_y: float,
    nx: int,
    ny: int,
    *,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    normal_axis: Literal["x", "y", "z"] = "z",
) -> TriangleMesh:
    """Open rectangular PEC plate with normals along +``normal_axis``."""
    u = np.linspace(-size_x / 2.0, size_x / 2.0, nx + 1)
    w = np.linspace(-size_y / 2.0, size_y / 2.0, ny + 1)
    uu, ww = np.meshgrid(u, w, indexing="ij")
    flat = np.stack([uu.ravel(), ww.ravel(), np.zeros(uu.size)], axis=1)
    # cyclic permutation keeps the in-plane axes right-handed about the normal
    order = {"z": [0, 1, 2], "x": [2, 0, 1], "y": [1, 2, 0]}[normal_axis]
    pts = flat[:, order] + np.asarray(center, dtype=float)
    tris = _grid_mesh(pts, nx, ny)
    n_axis = "xyz".index(normal_axis)
    c = pts[tris[0]]
    if np.cross(c[1] - c[0], c[2] - c[0])[n_axis] < 0:
        tris = tris[:, [0, 2, 1]]
    return make_mesh(pts, tris, Material.pec(), require_closed=False)


def mesh_strip_dipole(length: float, width: float, segments: int) -> TriangleMesh:
    """Center-fed strip dipole along z in the xz-plane; ``segments`` must be even.

    The feed edge is the transverse edge at z = 0.
    """
    if segments < 2 or segments % 2:
        raise ValidationError(f"strip dipole needs an even segment count >= 2, got {segments}")
    if width <= 0 or length <= 0:
        raise ValidationError("strip dipole length and width must be positive")
    v = _strip_vertices(length, width, segments)
    return make_mesh(v, _grid_mesh(v, segments, 1), Material.pec(), require_closed=False)


def _strip_vertices(length: float, width: float, segments: int) -> np.ndarray:
    z = np.linspace(-length / 2.0, length / 2.0, segments + 1)
    x = np.array([-width / 2.0, width / 2.0])
    zz, xx = np.meshgrid(z, x, indexing="ij")
    return np.stack([xx.ravel(), np.zeros(zz.size), zz.ravel()], axis=1)


def mesh_paraboloid(
    diameter: float,
    focal_length: float,
    rings: int,
    *,
    material: Optional[Material] = None,
) -> TriangleMesh:
    """Open paraboloidal reflector with its focus at the origin, opening toward +z.

    Ring ``i`` carries ``6 i`` vertices; normals face the focus.
    """
    if rings < 1:
        raise ValidationError(f"paraboloid needs at least one ring, got {rings}")
    radii = np.linspace(0.0, diameter / 2.0, rings + 1)
    verts = [[0.0, 0.0, -focal_length]]
    ring_idx: List[np.ndarray] = [np.array([0])]
    ring_ang: List[np.ndarray] = [np.array([0.0])]
    for i in range(1, rings + 1):
        n = 6 * i
        ang = 2.0 * math.pi * np.arange(n) / n
        rho = radii[i]
        start = len(verts)
        for a in ang:
            x, y = rho * math.cos(a), rho * math.sin(a)
            verts.append([x, y, (x * x + y * y) / (4.0 * focal_length) - focal_length])
        ring_idx.append(np.arange(start, start + n))
        ring_ang.append(ang)
    tris: List[List[int]] = []
    for i in range(1, rings + 1):
        tris.extend(_stitch_rings(ring_idx[i - 1], ring_ang[i - 1], ring_idx[i], ring_ang[i]))
    v = np.array(verts)
    t = np.array(tris, dtype=np.int64)
    c = v[t[0]]
    if np.cross(c[1] - c[0], c[2] - c[0])[2] < 0:
        t = t[:, [0, 2, 1]]
    return make_mesh(v, t, material or Material.pec(), require_closed=False)


def _stitch_rings(
    inner: np.ndarray, inner_ang: np.ndarray, outer: np.ndarray, outer_ang: np.ndarray
) -> List[List[int]]:
    """Counter-clockwise strip between two closed rings ordered by angle."""
    if inner.size == 1:
        return [
            [int(inner[0]), int(outer[k]), int(outer[(k + 1) % outer.size])]
            for k in range(outer.size)
        ]
    tris = []
    i = j = 0
    ni, no = inner.size, outer.size
    while i < ni or j < no:
        next_i = inner_ang[i + 1] if i + 1 < ni else 2.0 * math.pi
        next_o = outer_ang[j + 1] if j + 1 < no else 2.0 * math.pi
        if j < no and (i >= ni or next_o <= next_i):
            tris.append([int(inner[i % ni]), int(outer[j]), int(outer[(j + 1) % no])])
            j += 1
        else:
            tris.append([int(inner[i]), int(outer[j % no]), int(inner[(i + 1) % ni])])
            i += 1
    return tris


# --- Rigid motion and merging ---


def transform_mesh(
    mesh: TriangleMesh, rotation: np.ndarray, offset: Sequence[float]
) -> TriangleMesh:
    """Map vertices ``r -> Q r + p``; orientation is preserved for proper rotations."""
    q = np.asarray(rotation, dtype=float)
    v = mesh.vertices @ q.T + np.asarray(offset, dtype=float)
    return TriangleMesh(
        vertices=v, triangles=mesh.triangles.copy(), material=mesh.material, closed=mesh.closed
    )


def merge_meshes(
    meshes: Iterable[TriangleMesh], material: Optional[Material] = None
) -> TriangleMesh:
    """Concatenate meshes without re-orienting them."""
    verts, tris, offset = [], [], 0
    parts = list(meshes)
    for m in parts:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += m.n_vertices
    return TriangleMesh(
        vertices=np.vstack(verts),
        triangles=np.vstack(tris),
        material=material or parts[0].material,
        closed=all(m.closed for m in parts),
    )
