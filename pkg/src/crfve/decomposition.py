"""Non-overlapping subdomain partitions, the averaging interpolation and V_0.

Every interior edge is either *interior* to exactly one subdomain (both
neighbouring triangles in it) or an *interface* edge shared by the two
subdomains of its neighbours.  Midpoints on the outer boundary are not dofs
and never enter the subdomain averages.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .discretization import CoefficientField
from .mesh import TriMesh
from .quadrature import QuadratureRule

__all__ = [
    "Partition",
    "LayerContrast",
    "build_block_partition",
    "partition_from_labels",
    "apply_IA",
    "layer_contrast",
    "write_partition",
]


@dataclass(frozen=True, eq=False)
class Partition:
    mesh: TriMesh
    subdomain_of: np.ndarray           # (nt,) ids 0..N-1
    n_subdomains: int
    interior_dofs: tuple               # per subdomain, sorted dof ids
    boundary_dofs: tuple               # per subdomain, interface dofs on its boundary
    interface_dofs: np.ndarray         # all interface dofs, global order
    layer_triangles: tuple             # per subdomain, triangles touching the boundary
    H: np.ndarray                      # subdomain diameters
    h: np.ndarray                      # max element diameter per subdomain
    n_outer: np.ndarray | None = None  # outer-boundary midpoints per subdomain
    average_outer: bool = False        # count them (as zeros) in the average

    def __post_init__(self):
        if self.n_outer is None:
            object.__setattr__(self, "n_outer", np.zeros(self.n_subdomains, dtype=np.int64))

    @property
    def n_boundary(self) -> np.ndarray:
        """``n_i``: number of interface dofs on each subdomain boundary."""
        return np.array([len(b) for b in self.boundary_dofs])

    @property
    def averaging_count(self) -> np.ndarray:
        """Divisor of the subdomain average: ``n_i``, plus the outer-boundary
        midpoints when ``average_outer`` is set."""
        return self.n_boundary + (self.n_outer if self.average_outer else 0)

    @cached_property
    def interior_owner(self) -> np.ndarray:
        """Subdomain owning each dof, ``-1`` for interface dofs."""
        out = np.full(self.mesh.n_dofs, -1, dtype=np.int64)
        for i, dofs in enumerate(self.interior_dofs):
            out[dofs] = i
        return out

    @cached_property
    def prolongation(self) -> sp.csr_matrix:
        """Basis of ``V_0 = range(I_A)``, one column per interface dof.

        Column ``x`` is one at ``x`` and ``1/n_i`` at every interior dof of
        each subdomain ``i`` whose boundary contains ``x`` (``n_i`` being
        :attr:`averaging_count`).
        """
        n = self.mesh.n_dofs
        col_of = np.full(n, -1, dtype=np.int64)
        col_of[self.interface_dofs] = np.arange(len(self.interface_dofs))
        rows = [self.interface_dofs]
        cols = [np.arange(len(self.interface_dofs))]
        vals = [np.ones(len(self.interface_dofs))]
        for inner, bnd, cnt in zip(self.interior_dofs, self.boundary_dofs,
                                   self.averaging_count):
            if len(bnd) == 0 or len(inner) == 0:
                continue
            r, c = np.meshgrid(inner, col_of[bnd], indexing="ij")
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(np.full(r.size, 1.0 / cnt))
        return sp.csr_matrix((np.concatenate(vals),
                              (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, len(self.interface_dofs)))

    @property
    def restriction(self) -> sp.csr_matrix:
        return self.prolongation.T.tocsr()

    def prolongate(self, coarse: np.ndarray) -> np.ndarray:
        return self.prolongation @ coarse


def partition_from_labels(mesh: TriMesh, labels, H=None,
                          average_outer: bool = False) -> Partition:
    """Classify dofs for an arbitrary triangle-to-subdomain map.

    ``H`` defaults to the largest vertex distance within each subdomain
    boundary.  With ``average_outer`` the subdomain average also counts the
    (zero) outer-boundary midpoints of the subdomain.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (mesh.n_triangles,):
        raise ValueError("need one subdomain label per triangle")
    _, labels = np.unique(labels, return_inverse=True)
    labels = labels.reshape(-1)
    N = int(labels.max()) + 1 if len(labels) else 0

    et = mesh.edge_triangles
    s1 = labels[et[:, 0]]
    s2 = np.where(et[:, 1] >= 0, labels[np.maximum(et[:, 1], 0)], -1)
    is_dof = mesh.edge_dof >= 0
    interior_edge = is_dof & (s1 == s2)
    interface_edge = is_dof & (s1 != s2)

    dof_owner = np.full(mesh.n_dofs, -1, dtype=np.int64)
    dof_owner[mesh.edge_dof[interior_edge]] = s1[interior_edge]
    interface = np.sort(mesh.edge_dof[interface_edge])
    interior = tuple(np.flatnonzero(dof_owner == i) for i in range(N))

    ie = np.flatnonzero(interface_edge)
    side = np.concatenate([s1[ie], s2[ie]])
    bdofs = np.concatenate([mesh.edge_dof[ie]] * 2)
    boundary = tuple(np.sort(bdofs[side == i]) for i in range(N))

    # vertices on the subdomain boundaries: endpoints of interface edges and
    # of outer boundary edges, tagged with the subdomain they bound
    be = np.flatnonzero(mesh.is_boundary_edge)
    pair_sub = np.concatenate([s1[ie], s2[ie], s1[be]])
    pair_edges = np.concatenate([ie, ie, be])
    nv = mesh.n_vertices
    keys = np.unique(np.concatenate([pair_sub * nv + mesh.edges[pair_edges, 0],
                                     pair_sub * nv + mesh.edges[pair_edges, 1]]))
    tri_keys = labels[:, None] * nv + mesh.triangles
    in_layer = np.isin(tri_keys, keys).any(axis=1)
    layers = tuple(np.flatnonzero(in_layer & (labels == i)) for i in range(N))

    diam = mesh.diameters
    h = np.array([diam[labels == i].max() for i in range(N)])
    if H is None:
        H = np.zeros(N)
        for i in range(N):
            vk = keys[keys // nv == i] % nv
            pts = mesh.points[vk]
            if len(pts) > 1:
                d = pts[:, None, :] - pts[None, :, :]
                H[i] = np.sqrt((d ** 2).sum(-1).max())
    H = np.broadcast_to(np.asarray(H, dtype=float), (N,)).copy()
    n_outer = np.bincount(s1[be], minlength=N)
    return Partition(mesh=mesh, subdomain_of=labels, n_subdomains=N,
                     interior_dofs=interior, boundary_dofs=boundary,
                     interface_dofs=interface, layer_triangles=layers,
                     H=H, h=h, n_outer=n_outer, average_outer=average_outer)


def build_block_partition(mesh: TriMesh, M: int, average_outer: bool = False) -> Partition:
    """``M x M`` square subdomains of a structured unit-square mesh."""
    if M < 1:
        raise ValueError("need at least one block per side")
    n = mesh.structured_n
    if n is None:
        raise ValueError("block partitions need a structured unit-square mesh")
    if n % M:
        raise ValueError(f"n={n} is not divisible by M={M}")
    c = mesh.centroids
    i = np.minimum((c[:, 0] * M).astype(np.int64), M - 1)
    j = np.minimum((c[:, 1] * M).astype(np.int64), M - 1)
    return partition_from_labels(mesh, j * M + i, H=np.sqrt(2.0) / M,
                                 average_outer=average_outer)


def apply_IA(u: np.ndarray, p: Partition) -> np.ndarray:
    """Keep interface values, replace each subdomain's interior values by the
    mean of its interface values (zero if it has none)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (p.mesh.n_dofs,):
        raise ValueError(f"expected {p.mesh.n_dofs} values, got {u.shape}")
    out = u.copy()
    for inner, bnd, cnt in zip(p.interior_dofs, p.boundary_dofs, p.averaging_count):
        out[inner] = u[bnd].sum() / cnt if len(bnd) else 0.0
    return out


@dataclass
class LayerContrast:
    alpha_max: np.ndarray
    alpha_min: np.ndarray
    H_over_h: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.alpha_max / self.alpha_min

    @property
    def beta1_quadratic(self) -> float:
        return float(np.max(self.ratio * self.H_over_h ** 2))

    @property
    def beta1_linear(self) -> float:
        return float(np.max(self.ratio * self.H_over_h))


def layer_contrast(p: Partition, alpha: CoefficientField,
                   quad: QuadratureRule = QuadratureRule(triangle_degree=5)) -> LayerContrast:
    """Max/min of the coefficient over each boundary layer and the resulting
    condition indicators ``max_i ratio_i (H_i/h_i)^k`` for ``k = 1, 2``."""
    mesh = p.mesh
    bary, _ = quad.triangle
    amax = np.zeros(p.n_subdomains)
    amin = np.zeros(p.n_subdomains)
    for i, tris in enumerate(p.layer_triangles):
        if len(tris) == 0:
            raise ValueError(f"subdomain {i} has an empty boundary layer")
        P = mesh.points[mesh.triangles[tris]]
        X = np.einsum("qi,tik->tqk", bary, P)
        tags = np.broadcast_to(mesh.region_tags[tris][:, None], X.shape[:2])
        vals = alpha(X[..., 0], X[..., 1], tags)
        amax[i], amin[i] = vals.max(), vals.min()
    return LayerContrast(amax, amin, p.H / p.h)


def write_partition(p: Partition, path) -> None:
    """Text dump: ``triangle subdomain`` lines, then per-subdomain dof counts."""
    lines = [f"# triangles {p.mesh.n_triangles} subdomains {p.n_subdomains}"]
    lines += [f"{t} {s}" for t, s in enumerate(p.subdomain_of.tolist())]
    lines.append("# subdomain n_interior n_boundary")
    lines += [f"{i} {len(a)} {len(b)}" for i, (a, b)
              in enumerate(zip(p.interior_dofs, p.boundary_dofs))]
    Path(path).write_text("\n".join(lines) + "\n")
