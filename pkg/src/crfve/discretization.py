"""Crouzeix-Raviart finite element and finite volume element operators.

CR functions are plain vectors indexed by interior-edge dof id (the value at
the edge midpoint); boundary midpoints are eliminated, so homogeneous
Dirichlet data is implicit.

Matrices follow one convention throughout: ``A[i, j]`` is the bilinear form
with trial function ``phi_j`` tested against dof ``i``.  For the FVE matrix
the test functional of dof ``i`` is the flux balance over the control volume
``b_i``, so ``(A @ u)[i] = -int_{d b_i} alpha grad(u).n ds``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import DualMesh, TriMesh
from .quadrature import QuadratureRule

__all__ = [
    "CoefficientField",
    "constant_coefficient",
    "sinusoidal_coefficient",
    "piecewise_constant_coefficient",
    "local_cr_gradients",
    "assemble_fe_matrix",
    "assemble_fve_matrix",
    "assemble_fe_rhs",
    "assemble_fve_rhs",
    "interpolate_midpoints",
    "boundary_values",
    "evaluate_cr",
    "broken_h1_error",
    "perturbation_norm",
    "nonsymmetry_measures",
    "write_coo",
    "read_coo",
    "write_vector",
]

DEFAULT_QUAD = QuadratureRule()
ERROR_QUAD = QuadratureRule(triangle_degree=5, segment_points=3)


@dataclass(frozen=True)
class CoefficientField:
    """Diffusion coefficient ``alpha(x, y, region_tag)``.

    The region tag of the owning triangle is always passed so that values on
    either side of an element-aligned jump are unambiguous.  ``gradient``
    (same signature, returns ``(ax, ay)``) is optional and only needed for
    manufactured solutions.
    """

    evaluator: Callable
    regularity: str = "smooth_per_region"
    gradient: Callable | None = None

    def __call__(self, x, y, tags):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.evaluator(x, y, tags), dtype=float),
                               x.shape)

    def scaled(self, c: float) -> "CoefficientField":
        grad = None
        if self.gradient is not None:
            g = self.gradient
            grad = lambda x, y, t: tuple(c * v for v in g(x, y, t))  # noqa: E731
        return CoefficientField(lambda x, y, t: c * self.evaluator(x, y, t),
                                self.regularity, grad)


def constant_coefficient(c: float = 1.0) -> CoefficientField:
    return CoefficientField(
        lambda x, y, t: np.full(np.shape(x), float(c)),
        "piecewise_constant_per_element",
        lambda x, y, t: (np.zeros(np.shape(x)), np.zeros(np.shape(x))))


def _multiplier(multipliers, tags, shape):
    if not multipliers:
        return np.ones(shape)
    tags = np.broadcast_to(np.asarray(tags), shape)
    out = np.ones(shape)
    for tag, value in multipliers.items():
        out[tags == tag] = value
    return out


def sinusoidal_coefficient(frequency: float, offset: float = 2.0,
                           multipliers: dict[int, float] | None = None) -> CoefficientField:
    """``m(tag) * (offset + sin(k pi x) sin(k pi y))`` with ``k = frequency``."""
    k = np.pi * frequency

    def alpha(x, y, tags):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return _multiplier(multipliers, tags, x.shape) * (
            offset + np.sin(k * x) * np.sin(k * y))

    def grad(x, y, tags):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        m = _multiplier(multipliers, tags, x.shape)
        return (m * k * np.cos(k * x) * np.sin(k * y),
                m * k * np.sin(k * x) * np.cos(k * y))

    return CoefficientField(alpha, "smooth_per_region", grad)


def piecewise_constant_coefficient(values) -> CoefficientField:
    """Coefficient equal to ``values[tag]`` on triangles with that tag."""
    values = np.asarray(values, dtype=float)
    return CoefficientField(
        lambda x, y, t: values[np.broadcast_to(np.asarray(t), np.shape(x))],
        "piecewise_constant_per_element",
        lambda x, y, t: (np.zeros(np.shape(x)), np.zeros(np.shape(x))))


# --------------------------------------------------------------------------
# local quantities


def _tri_gradients(mesh: TriMesh) -> np.ndarray:
    """``(nt, 3, 2)`` gradients of the CR basis functions on every triangle."""
    P = mesh.points[mesh.triangles]
    J = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # columns
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(det == 0.0):
        raise ValueError("zero-area triangle")
    # rows of J^{-1} are grad(lambda_1), grad(lambda_2)
    g1 = np.column_stack([J[:, 1, 1], -J[:, 0, 1]]) / det[:, None]
    g2 = np.column_stack([-J[:, 1, 0], J[:, 0, 0]]) / det[:, None]
    g0 = -g1 - g2
    # phi_e = 1 - 2 lambda_{opposite vertex}
    return -2.0 * np.stack([g0, g1, g2], axis=1)


def local_cr_gradients(mesh: TriMesh, triangle: int) -> np.ndarray:
    """Constant gradients ``(3, 2)`` of the CR basis on one triangle.

    Row ``i`` belongs to the edge opposite local vertex ``i``.
    """
    P = mesh.points[mesh.triangles[triangle]]
    J = np.column_stack([P[1] - P[0], P[2] - P[0]])
    if abs(np.linalg.det(J)) == 0.0:
        raise ValueError(f"triangle {triangle} has zero area")
    Jinv = np.linalg.inv(J)
    grad_lam = np.vstack([-Jinv[0] - Jinv[1], Jinv[0], Jinv[1]])
    return -2.0 * grad_lam


def _tri_quad_points(mesh: TriMesh, quad: QuadratureRule):
    bary, w = quad.triangle
    P = mesh.points[mesh.triangles]                        # (nt, 3, 2)
    X = np.einsum("qi,tik->tqk", bary, P)                  # (nt, q, 2)
    return X, bary, w


def _sample_alpha(alpha: CoefficientField, X: np.ndarray, tags: np.ndarray):
    T = np.broadcast_to(tags.reshape((-1,) + (1,) * (X.ndim - 2)), X.shape[:-1])
    vals = alpha(X[..., 0], X[..., 1], T)
    if not np.all(vals > 0):
        raise ValueError("coefficient must be positive at every quadrature point")
    return vals


def _scatter(mesh: TriMesh, rows_loc, cols_loc, vals,
             boundary_columns: bool = False) -> sp.csr_matrix:
    """Sum triangle-local contributions ``vals[t, k]`` into dof space.

    With ``boundary_columns`` the result is ``n_dofs x n_edges`` and keeps
    only trial columns belonging to outer boundary edges (Dirichlet lifting).
    """
    t = np.arange(mesh.n_triangles)[:, None]
    r = mesh.tri_dofs[t, rows_loc]
    if boundary_columns:
        c = mesh.tri_edges[t, cols_loc]
        keep = (r >= 0) & mesh.is_boundary_edge[c]
        shape = (mesh.n_dofs, mesh.n_edges)
    else:
        c = mesh.tri_dofs[t, cols_loc]
        keep = (r >= 0) & (c >= 0)
        shape = (mesh.n_dofs, mesh.n_dofs)
    A = sp.coo_matrix((vals[keep], (r[keep], c[keep])), shape=shape).tocsr()
    A.sum_duplicates()
    return A


_I9 = np.repeat(np.arange(3), 3)[None, :]
_J9 = np.tile(np.arange(3), 3)[None, :]


def _fe_local(mesh: TriMesh, alpha: CoefficientField, quad: QuadratureRule):
    G = _tri_gradients(mesh)
    X, _, w = _tri_quad_points(mesh, quad)
    a = _sample_alpha(alpha, X, mesh.region_tags)
    int_alpha = np.abs(mesh.areas) * (a @ w)               # int_K alpha
    local = int_alpha[:, None, None] * np.einsum("tik,tjk->tij", G, G)
    return _I9, _J9, local.reshape(-1, 9)


def assemble_fe_matrix(mesh: TriMesh, alpha: CoefficientField,
                       quad: QuadratureRule = DEFAULT_QUAD,
                       boundary_columns: bool = False) -> sp.csr_matrix:
    """CR stiffness matrix ``sum_K int_K alpha grad(phi_j).grad(phi_i)``.

    ``boundary_columns=True`` returns instead the coupling of the dofs to
    the boundary-edge basis functions, shape ``(n_dofs, n_edges)``.
    """
    if mesh.n_dofs == 0:
        return sp.csr_matrix((0, mesh.n_edges if boundary_columns else 0))
    return _scatter(mesh, *_fe_local(mesh, alpha, quad),
                    boundary_columns=boundary_columns)


def _segment_alpha_integrals(dual: DualMesh, alpha: CoefficientField,
                             quad: QuadratureRule) -> np.ndarray:
    """``int_gamma alpha ds`` for every internal dual segment, ``(nt, 3)``."""
    m = dual.mesh
    s, w = quad.segment
    z = dual.interior_points[:, None, None, :]             # (nt,1,1,2)
    v = m.points[m.triangles][:, :, None, :]               # (nt,3,1,2)
    X = z + s[None, None, :, None] * (v - z)               # (nt,3,s,2)
    a = _sample_alpha(alpha, X, m.region_tags)
    return dual.seg_lengths * (a @ w)


_J = np.arange(3)
_FVE_ROWS = np.concatenate([np.repeat((_J + 1) % 3, 3), np.repeat((_J + 2) % 3, 3)])[None, :]
_FVE_COLS = np.tile(np.arange(3), 6)[None, :]


def _fve_local(mesh: TriMesh, dual: DualMesh, alpha: CoefficientField,
               quad: QuadratureRule):
    G = _tri_gradients(mesh)                               # (nt, 3c, 2)
    seg_alpha = _segment_alpha_integrals(dual, alpha, quad)  # (nt, 3j)
    # flux[t, j, c] = grad(phi_c).n_j * int_gamma_j alpha
    flux = np.einsum("tck,tjk->tjc", G, dual.seg_normals) * seg_alpha[..., None]
    vals = np.concatenate([-flux.reshape(-1, 9), flux.reshape(-1, 9)], axis=1)
    return _FVE_ROWS, _FVE_COLS, vals


def assemble_fve_matrix(mesh: TriMesh, dual: DualMesh, alpha: CoefficientField,
                        quad: QuadratureRule = DEFAULT_QUAD,
                        boundary_columns: bool = False) -> sp.csr_matrix:
    """CRFVE matrix, ``A[i, j] = -int_{d b_i} alpha grad(phi_j).n ds``.

    Only the internal segments ``z_K -> v`` of each triangle contribute:
    segment ``j`` bounds the control volumes of local edges ``j+1`` (outward
    normal ``n_j``) and ``j+2`` (outward normal ``-n_j``).
    """
    if dual.mesh is not mesh:
        raise ValueError("dual mesh was built from a different mesh")
    if mesh.n_dofs == 0:
        return sp.csr_matrix((0, mesh.n_edges if boundary_columns else 0))
    return _scatter(mesh, *_fve_local(mesh, dual, alpha, quad),
                    boundary_columns=boundary_columns)


def _check_f(vals):
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("source evaluated to a non-finite value")
    return vals


def assemble_fve_rhs(mesh: TriMesh, dual: DualMesh, f: Callable,
                     quad: QuadratureRule = DEFAULT_QUAD) -> np.ndarray:
    """Load vector ``int_{b_e} f dx`` for every interior edge."""
    bary, w = quad.triangle
    P = mesh.points[mesh.triangles]
    z = dual.interior_points[:, None, :]
    # subtriangle of local edge e is (z, v_{e+1}, v_{e+2})
    S = np.stack([np.broadcast_to(z, P.shape), np.roll(P, -1, axis=1),
                  np.roll(P, -2, axis=1)], axis=2)           # (nt, 3e, 3v, 2)
    X = np.einsum("qi,teik->teqk", bary, S)
    vals = _check_f(f(X[..., 0], X[..., 1]))
    local = dual.sub_areas * (vals @ w)                     # (nt, 3)
    out = np.zeros(mesh.n_dofs)
    dofs = mesh.tri_dofs
    mask = dofs >= 0
    np.add.at(out, dofs[mask], local[mask])
    return out


def assemble_fe_rhs(mesh: TriMesh, f: Callable,
                    quad: QuadratureRule = DEFAULT_QUAD) -> np.ndarray:
    """Load vector ``sum_K int_K f phi_e dx``."""
    X, bary, w = _tri_quad_points(mesh, quad)
    vals = _check_f(f(X[..., 0], X[..., 1]))                # (nt, q)
    phi = 1.0 - 2.0 * bary                                  # (q, 3)
    local = np.abs(mesh.areas)[:, None] * ((vals * w) @ phi)
    out = np.zeros(mesh.n_dofs)
    dofs = mesh.tri_dofs
    mask = dofs >= 0
    np.add.at(out, dofs[mask], local[mask])
    return out


def interpolate_midpoints(u: Callable, mesh: TriMesh) -> np.ndarray:
    """Sample ``u(x, y)`` at the interior-edge midpoints."""
    m = mesh.dof_midpoints
    return np.asarray(u(m[:, 0], m[:, 1]), dtype=float) * np.ones(mesh.n_dofs)


def boundary_values(g: Callable, mesh: TriMesh) -> np.ndarray:
    """Per-edge vector holding ``g`` at outer boundary midpoints, zero elsewhere.

    Multiplying by a ``boundary_columns`` matrix gives the Dirichlet lift.
    """
    out = np.zeros(mesh.n_edges)
    b = mesh.is_boundary_edge
    m = mesh.midpoints[b]
    out[b] = np.asarray(g(m[:, 0], m[:, 1]), dtype=float) * np.ones(len(m))
    return out


def _local_values(u_h: np.ndarray, mesh: TriMesh, boundary=None) -> np.ndarray:
    u_h = np.asarray(u_h, dtype=float)
    if u_h.shape != (mesh.n_dofs,):
        raise ValueError(f"expected {mesh.n_dofs} dof values, got {u_h.shape}")
    dofs = mesh.tri_dofs
    if boundary is None:
        edge_vals = np.zeros(mesh.n_edges)
    elif callable(boundary):
        edge_vals = boundary_values(boundary, mesh)
    else:
        edge_vals = np.asarray(boundary, dtype=float)
    outer = edge_vals[mesh.tri_edges]
    return np.where(dofs >= 0, u_h[np.maximum(dofs, 0)], outer)   # (nt, 3)


def evaluate_cr(u_h: np.ndarray, mesh: TriMesh, triangle: np.ndarray,
                bary: np.ndarray, boundary=None) -> np.ndarray:
    """Value of a CR function at barycentric coordinates within triangles.

    ``boundary`` (per-edge array or callable) supplies nonzero Dirichlet
    midpoint values; by default they are zero.
    """
    loc = _local_values(u_h, mesh, boundary)[np.asarray(triangle)]
    return np.sum(loc * (1.0 - 2.0 * np.asarray(bary)), axis=-1)


def broken_h1_error(u_h: np.ndarray, u_exact: Callable, grad_exact: Callable,
                    mesh: TriMesh, quad: QuadratureRule = ERROR_QUAD,
                    parts: bool = False, boundary=None):
    """Broken H1 norm of ``u_h - u``.

    ``grad_exact(x, y)`` returns ``(ux, uy)``.  With ``parts=True`` the
    squared gradient and L2 contributions are returned as well.
    """
    X, bary, w = _tri_quad_points(mesh, quad)
    loc = _local_values(u_h, mesh, boundary)                # (nt, 3)
    G = _tri_gradients(mesh)
    grad_h = np.einsum("te,tek->tk", loc, G)                # (nt, 2)
    val_h = loc @ (1.0 - 2.0 * bary).T                      # (nt, q)
    ux, uy = grad_exact(X[..., 0], X[..., 1])
    u = u_exact(X[..., 0], X[..., 1])
    area = np.abs(mesh.areas)
    grad_sq = ((grad_h[:, 0:1] - ux) ** 2 + (grad_h[:, 1:2] - uy) ** 2) @ w
    l2_sq = ((val_h - u) ** 2) @ w
    g2 = float(area @ grad_sq)
    l2 = float(area @ l2_sq)
    total = np.sqrt(g2 + l2)
    return (total, g2, l2) if parts else total


def perturbation_norm(mesh: TriMesh, dual: DualMesh, alpha: CoefficientField,
                      quad: QuadratureRule = DEFAULT_QUAD, **kw) -> float:
    """``||A_FE - A_FVE||_2``: the matrix form of the FE/FVE perturbation."""
    from .krylov import spectral_norm

    D = assemble_fe_matrix(mesh, alpha, quad) - assemble_fve_matrix(mesh, dual, alpha, quad)
    return spectral_norm(D, **kw)


def nonsymmetry_measures(A, **kw) -> tuple[float, float]:
    """``(||A - A^T||_2, ||A A^T - A^T A||_2)``."""
    from .krylov import spectral_norm

    A = sp.csr_matrix(A)
    skew = (A - A.T).tocsr()
    comm = (A @ A.T - A.T @ A).tocsr()
    return spectral_norm(skew, **kw), spectral_norm(comm, **kw)


def write_coo(A, path) -> None:
    """Coordinate text format, one ``i j value`` line per stored entry."""
    C = sp.coo_matrix(A)
    with open(path, "w") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]}\n")
        for i, j, v in zip(C.row.tolist(), C.col.tolist(), C.data.tolist()):
            fh.write(f"{i} {j} {v:.17g}\n")


def read_coo(path) -> sp.csr_matrix:
    with open(path) as fh:
        shape = tuple(int(s) for s in fh.readline().lstrip("#").split())
        data = np.loadtxt(fh, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix(shape)
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))),
                         shape=shape)


def write_vector(v, path) -> None:
    Path(path).write_text("".join(f"{x:.17g}\n" for x in np.asarray(v, float)))
