"""Triangulations of polygonal domains and the barycentric dual mesh.

A :class:`TriMesh` stores vertices, counter-clockwise triangles and the derived
edge structure.  Local edge ``i`` of a triangle is the edge opposite local
vertex ``i``.  Edges are numbered lexicographically by ``(min vertex, max
vertex)``; interior edges (exactly two adjacent triangles) carry a contiguous
degree-of-freedom id, boundary edges carry ``-1``.

The dual mesh splits each triangle ``K`` into three subtriangles by joining
its interior point ``z_K`` to the vertices.  The subtriangle ``K_e`` is the one
sharing edge ``e`` with ``K``; the control volume of an interior edge is the
union of its two subtriangles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "TriMesh",
    "DualMesh",
    "MeshDiagnostics",
    "build_unit_square_mesh",
    "validate_mesh",
    "build_dual_mesh",
    "read_mesh",
    "write_mesh",
]

_DIAGONALS = ("ll_ur", "ul_lr")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _signed_areas(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (points[triangles[:, i]] for i in range(3))
    d1, d2 = p1 - p0, p2 - p0
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True, eq=False)
class TriMesh:
    points: np.ndarray
    triangles: np.ndarray
    region_tags: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    edge_triangles: np.ndarray
    edge_tri_count: np.ndarray
    edge_dof: np.ndarray
    dof_edges: np.ndarray
    structured_n: int | None = None
    diagonal: str | None = None

    @classmethod
    def from_arrays(cls, points, triangles, region_tags=None, *,
                    structured_n: int | None = None,
                    diagonal: str | None = None) -> "TriMesh":
        """Build the edge structure for a raw vertex/triangle list.

        No validity checks are made here so that broken meshes can still be
        inspected with :func:`validate_mesh`.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        nt = len(triangles)
        if region_tags is None:
            region_tags = np.zeros(nt, dtype=np.int64)
        region_tags = np.asarray(region_tags, dtype=np.int64).reshape(nt)

        # local edge i is opposite local vertex i
        local = np.stack([triangles[:, [1, 2]], triangles[:, [2, 0]],
                          triangles[:, [0, 1]]], axis=1)  # (nt, 3, 2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        tri_edges = inverse.reshape(nt, 3)

        ne = len(edges)
        count = np.bincount(inverse, minlength=ne)
        edge_triangles = np.full((ne, 2), -1, dtype=np.int64)
        owner = np.repeat(np.arange(nt), 3)
        order = np.argsort(inverse, kind="stable")
        starts = np.concatenate([[0], np.cumsum(count)[:-1]])
        sorted_owner = owner[order]
        edge_triangles[:, 0] = sorted_owner[starts] if ne else []
        has_two = count >= 2
        edge_triangles[has_two, 1] = sorted_owner[starts[has_two] + 1]

        interior = count == 2
        edge_dof = np.full(ne, -1, dtype=np.int64)
        dof_edges = np.flatnonzero(interior)
        edge_dof[dof_edges] = np.arange(len(dof_edges))

        return cls(
            points=_readonly(points),
            triangles=_readonly(triangles),
            region_tags=_readonly(region_tags),
            edges=_readonly(edges.astype(np.int64)),
            tri_edges=_readonly(tri_edges),
            edge_triangles=_readonly(edge_triangles),
            edge_tri_count=_readonly(count),
            edge_dof=_readonly(edge_dof),
            dof_edges=_readonly(dof_edges),
            structured_n=structured_n,
            diagonal=diagonal,
        )

    def with_region_tags(self, region_tags) -> "TriMesh":
        """Same geometry with new per-triangle region tags."""
        return TriMesh.from_arrays(self.points, self.triangles, region_tags,
                                   structured_n=self.structured_n,
                                   diagonal=self.diagonal)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_dofs(self) -> int:
        return len(self.dof_edges)

    @cached_property
    def is_boundary_edge(self) -> np.ndarray:
        return _readonly(self.edge_tri_count == 1)

    @cached_property
    def areas(self) -> np.ndarray:
        return _readonly(_signed_areas(self.points, self.triangles))

    @cached_property
    def diameters(self) -> np.ndarray:
        lengths = self.edge_lengths[self.tri_edges]
        return _readonly(lengths.max(axis=1))

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.points[self.edges[:, 1]] - self.points[self.edges[:, 0]]
        return _readonly(np.hypot(d[:, 0], d[:, 1]))

    @cached_property
    def midpoints(self) -> np.ndarray:
        return _readonly(0.5 * (self.points[self.edges[:, 0]]
                                + self.points[self.edges[:, 1]]))

    @property
    def dof_midpoints(self) -> np.ndarray:
        return self.midpoints[self.dof_edges]

    @cached_property
    def centroids(self) -> np.ndarray:
        return _readonly(self.points[self.triangles].mean(axis=1))

    @property
    def h(self) -> float:
        return float(self.diameters.max()) if self.n_triangles else 0.0

    @cached_property
    def vertex_edges(self) -> sp.csr_matrix:
        """Vertex-by-edge incidence matrix (row v lists the edges at v)."""
        ne = self.n_edges
        rows = self.edges.reshape(-1)
        cols = np.repeat(np.arange(ne), 2)
        return sp.csr_matrix((np.ones(2 * ne), (rows, cols)),
                             shape=(self.n_vertices, ne))

    @cached_property
    def tri_dofs(self) -> np.ndarray:
        """Dof id of each local edge, ``-1`` on the boundary."""
        return _readonly(self.edge_dof[self.tri_edges])

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())


def build_unit_square_mesh(n: int, diagonal: str = "ll_ur",
                           region_tags=None) -> TriMesh:
    """Structured triangulation of the unit square with ``n`` cells per side.

    Every cell is split along the same diagonal: ``"ll_ur"`` joins the
    lower-left and upper-right corners, ``"ul_lr"`` the other two.
    Triangle ``2*(j*n + i)`` and ``2*(j*n + i) + 1`` belong to cell ``(i, j)``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"need at least one cell per side, got n={n}")
    if diagonal not in _DIAGONALS:
        raise ValueError(f"diagonal must be one of {_DIAGONALS}, got {diagonal!r}")
    n = int(n)
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)
    points = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.divmod(np.arange(n * n), n)
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    if diagonal == "ll_ur":
        t1 = np.column_stack([v00, v10, v11])
        t2 = np.column_stack([v00, v11, v01])
    else:
        t1 = np.column_stack([v00, v10, v01])
        t2 = np.column_stack([v10, v11, v01])
    triangles = np.stack([t1, t2], axis=1).reshape(-1, 3)
    return TriMesh.from_arrays(points, triangles, region_tags,
                               structured_n=n, diagonal=diagonal)


@dataclass
class MeshDiagnostics:
    n_vertices: int
    n_triangles: int
    n_edges: int
    n_dofs: int
    orientation_errors: list[int] = field(default_factory=list)
    degenerate_triangles: list[int] = field(default_factory=list)
    conformity_violations: list[int] = field(default_factory=list)
    h_min: float = 0.0
    h_max: float = 0.0
    shape_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return not (self.orientation_errors or self.degenerate_triangles
                    or self.conformity_violations)


def validate_mesh(mesh: TriMesh, area_tol: float = 1e-14) -> MeshDiagnostics:
    """Report orientation, degeneracy and conformity problems.

    ``shape_ratio`` is the largest ratio of diameter to inradius.
    """
    areas = mesh.areas
    scale = max(mesh.h, 1.0) ** 2
    degenerate = np.flatnonzero(np.abs(areas) <= area_tol * scale)
    flipped = np.flatnonzero(areas < -area_tol * scale)

    # an edge with more than two triangles cannot belong to a conforming mesh;
    # neither can a triangle listed twice
    bad_edges = np.flatnonzero(mesh.edge_tri_count > 2)
    _, inv, counts = np.unique(np.sort(mesh.triangles, axis=1), axis=0,
                               return_inverse=True, return_counts=True)
    dup_tris = np.flatnonzero(counts[inv.reshape(-1)] > 1)
    violations = sorted(set(bad_edges.tolist())
                        | set(mesh.tri_edges[dup_tris].ravel().tolist()))

    diam = mesh.diameters
    perim = mesh.edge_lengths[mesh.tri_edges].sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inradius = 2.0 * np.abs(areas) / perim
        ratio = np.where(inradius > 0, diam / inradius, np.inf)
    return MeshDiagnostics(
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
        n_edges=mesh.n_edges,
        n_dofs=mesh.n_dofs,
        orientation_errors=flipped.tolist(),
        degenerate_triangles=degenerate.tolist(),
        conformity_violations=violations,
        h_min=float(diam.min()) if len(diam) else 0.0,
        h_max=float(diam.max()) if len(diam) else 0.0,
        shape_ratio=float(ratio.max()) if len(ratio) else 0.0,
    )


@dataclass(frozen=True, eq=False)
class DualMesh:
    """Barycentric control volumes of a :class:`TriMesh`.

    Per triangle there are three internal segments ``z_K -> v_j``.  Segment
    ``j`` separates the subtriangles of local edges ``(j+1) % 3`` and
    ``(j+2) % 3``; ``seg_normals[t, j]`` is the unit normal pointing out of
    the former and into the latter.
    """

    mesh: TriMesh
    interior_points: np.ndarray    # (nt, 2)
    sub_areas: np.ndarray          # (nt, 3), area of K_e for local edge e
    seg_lengths: np.ndarray        # (nt, 3)
    seg_normals: np.ndarray        # (nt, 3, 2)

    @cached_property
    def control_volume_areas(self) -> np.ndarray:
        m = self.mesh
        out = np.zeros(m.n_dofs)
        dofs = m.tri_dofs
        mask = dofs >= 0
        np.add.at(out, dofs[mask], self.sub_areas[mask])
        return _readonly(out)

    @property
    def boundary_subtriangle_area(self) -> float:
        return float(self.sub_areas[self.mesh.tri_dofs < 0].sum())

    def control_volume(self, dof: int) -> dict:
        """Polygon and boundary segments of the control volume ``b_e``.

        Returns ``{"polygon": (4, 2) array, "segments": [...]}`` where each
        segment is ``(start, end, outward_normal, triangle)``.  The polygon
        runs ``v_a -> z_K+ -> v_b -> z_K- -> v_a``.
        """
        m = self.mesh
        e = int(m.dof_edges[dof])
        va, vb = m.edges[e]
        segments = []
        zs = []
        for t in m.edge_triangles[e]:
            loc = int(np.flatnonzero(m.tri_edges[t] == e)[0])
            z = self.interior_points[t]
            zs.append(z)
            # the two internal segments of K_loc end at the vertices j != loc
            for j in ((loc + 1) % 3, (loc + 2) % 3):
                sign = 1.0 if (j + 1) % 3 == loc else -1.0
                v = m.points[m.triangles[t, j]]
                segments.append((z.copy(), v.copy(),
                                 sign * self.seg_normals[t, j], int(t)))
        pa, pb = m.points[va], m.points[vb]
        polygon = np.array([pa, zs[0], pb, zs[1]])
        return {"polygon": polygon, "segments": segments}


def build_dual_mesh(mesh: TriMesh, interior_point_rule: str = "barycenter",
                    area_tol: float = 1e-14) -> DualMesh:
    """Split every triangle at its barycenter and collect the segment data."""
    if interior_point_rule != "barycenter":
        raise ValueError(f"unsupported interior point rule {interior_point_rule!r}")
    areas = mesh.areas
    if np.any(np.abs(areas) <= area_tol * max(mesh.h, 1.0) ** 2):
        bad = np.flatnonzero(np.abs(areas) <= area_tol * max(mesh.h, 1.0) ** 2)
        raise ValueError(f"degenerate triangles: {bad[:10].tolist()}")
    P = mesh.points[mesh.triangles]                  # (nt, 3, 2)
    z = P.mean(axis=1)

    # K_e for local edge e is (z, v_{e+1}, v_{e+2})
    p1 = np.roll(P, -1, axis=1)
    p2 = np.roll(P, -2, axis=1)
    d1 = p1 - z[:, None, :]
    d2 = p2 - z[:, None, :]
    sub_areas = 0.5 * (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])

    t = P - z[:, None, :]                            # segment j: z -> v_j
    lengths = np.hypot(t[..., 0], t[..., 1])
    normal = np.stack([t[..., 1], -t[..., 0]], axis=-1) / lengths[..., None]
    # orient from K_{j+1} toward K_{j+2}: K_{j+2} contains v_{j+1}
    toward = p1 - z[:, None, :]
    flip = np.einsum("tjk,tjk->tj", normal, toward) < 0
    normal[flip] *= -1.0
    return DualMesh(mesh=mesh,
                    interior_points=_readonly(z),
                    sub_areas=_readonly(sub_areas),
                    seg_lengths=_readonly(lengths),
                    seg_normals=_readonly(normal))


def write_mesh(mesh: TriMesh, path) -> None:
    """Plain-text export: header, ``x y`` vertex lines, ``v0 v1 v2 tag`` lines."""
    lines = [f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.points]
    lines += [f"{a} {b} {c} {tag}" for (a, b, c), tag
              in zip(mesh.triangles.tolist(), mesh.region_tags.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "vertices" or header[2] != "triangles":
            raise ValueError(f"bad mesh header: {' '.join(header)!r}")
        nv, nt = int(header[1]), int(header[3])
        pts = np.loadtxt(fh, max_rows=nv, ndmin=2) if nv else np.zeros((0, 2))
        tris = np.loadtxt(fh, max_rows=nt, dtype=np.int64, ndmin=2) \
            if nt else np.zeros((0, 4), dtype=np.int64)
    return TriMesh.from_arrays(pts, tris[:, :3], tris[:, 3])
