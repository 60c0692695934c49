"""Additive average Schwarz operators ``T_A^(k)``, k = 1, 2, 3.

With ``A`` the CR finite element matrix and ``B`` the CRFVE matrix, every
variant is ``T = M^{-1} S`` where

* ``S = A`` for k = 1 and ``S = B`` for k = 2, 3 (the operator being
  preconditioned), and
* ``M^{-1} = sum_i R_i^T X_i^{-1} R_i + P X_0^{-1} P^T`` with local blocks
  ``X_i = R_i X R_i^T`` on the subdomain interiors, coarse block
  ``X_0 = P^T X P`` on ``V_0 = range(I_A)``, and ``X = A`` for k = 1, 2 or
  ``X = B`` for k = 3.

Interior dofs of different subdomains never share a triangle, so the direct
sum of the local blocks is exactly ``X`` restricted to all interior dofs; it
is factorised once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .decomposition import Partition
from .discretization import (DEFAULT_QUAD, CoefficientField, assemble_fe_matrix,
                             assemble_fve_matrix)
from .mesh import DualMesh, TriMesh
from .quadrature import QuadratureRule

__all__ = ["SchwarzOperator", "build_schwarz", "apply_T", "build_g"]

_PIVOT_TOL = 1e-13


def _factorize(X: sp.spmatrix, what: str):
    if X.shape[0] == 0:
        return None
    try:
        lu = spla.splu(sp.csc_matrix(X))
    except RuntimeError as exc:
        raise ValueError(f"{what} is singular: {exc}") from None
    piv = np.abs(lu.U.diagonal())
    if piv.min() <= _PIVOT_TOL * piv.max():
        raise ValueError(f"{what} is numerically singular "
                         f"(pivot ratio {piv.min() / piv.max():.2e})")
    return lu


@dataclass(frozen=True, eq=False)
class SchwarzOperator:
    k: int
    partition: Partition
    A_fe: sp.csr_matrix
    A_fve: sp.csr_matrix
    interior: np.ndarray          # all subdomain-interior dofs, grouped by subdomain
    local_lu: object
    coarse_matrix: sp.csr_matrix
    coarse_lu: object

    @classmethod
    def from_matrices(cls, k: int, partition: Partition, A_fe, A_fve) -> "SchwarzOperator":
        if k not in (1, 2, 3):
            raise ValueError(f"variant must be 1, 2 or 3, got {k}")
        A_fe, A_fve = sp.csr_matrix(A_fe), sp.csr_matrix(A_fve)
        n = partition.mesh.n_dofs
        if A_fe.shape != (n, n) or A_fve.shape != (n, n):
            raise ValueError("matrices do not match the partition's dof space")
        X = A_fve if k == 3 else A_fe
        interior = np.concatenate(partition.interior_dofs) if partition.n_subdomains \
            else np.zeros(0, dtype=np.int64)
        local_lu = _factorize(X[interior][:, interior], "local subdomain block")
        P = partition.prolongation
        X0 = (P.T @ X @ P).tocsr()
        coarse_lu = _factorize(X0, "coarse matrix")
        return cls(k, partition, A_fe, A_fve, interior, local_lu, X0, coarse_lu)

    @property
    def shape(self) -> tuple[int, int]:
        n = self.partition.mesh.n_dofs
        return (n, n)

    @property
    def source(self) -> sp.csr_matrix:
        """Matrix whose action is preconditioned: ``A`` (k=1) or ``B``."""
        return self.A_fe if self.k == 1 else self.A_fve

    @property
    def local_matrix(self) -> sp.csr_matrix:
        return self.A_fve if self.k == 3 else self.A_fe

    def local_block(self, i: int) -> sp.csr_matrix:
        dofs = self.partition.interior_dofs[i]
        return self.local_matrix[dofs][:, dofs]

    def precondition(self, r: np.ndarray, trans: bool = False) -> np.ndarray:
        """``M^{-1} r`` (or ``M^{-T} r``): local solves plus the coarse solve."""
        tr = "T" if trans else "N"
        out = np.zeros_like(r, dtype=float)
        if self.local_lu is not None:
            out[self.interior] = self.local_lu.solve(r[self.interior], trans=tr)
        if self.coarse_lu is not None:
            P = self.partition.prolongation
            out += P @ self.coarse_lu.solve(P.T @ r, trans=tr)
        return out

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 2 and u.shape[1] == 1:
            return self.apply(u[:, 0])[:, None]
        if u.shape != (self.shape[0],):
            raise ValueError(f"expected a vector of length {self.shape[0]}, got {u.shape}")
        return self.precondition(self.source @ u)

    def apply_transpose(self, v: np.ndarray) -> np.ndarray:
        """Euclidean transpose ``S^T M^{-T}``."""
        v = np.asarray(v, dtype=float)
        if v.ndim == 2 and v.shape[1] == 1:
            return self.apply_transpose(v[:, 0])[:, None]
        return self.source.T @ self.precondition(v, trans=True)

    def rhs(self, f_fve: np.ndarray, f_fe: np.ndarray) -> np.ndarray:
        """Right-hand side of the unpreconditioned system ``S u = F``."""
        return np.asarray(f_fe if self.k == 1 else f_fve, dtype=float)

    def build_g(self, f_fve: np.ndarray, f_fe: np.ndarray) -> np.ndarray:
        return self.precondition(self.rhs(f_fve, f_fe))

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply,
                                   rmatvec=self.apply_transpose, dtype=float)

    @property
    def coarse_dim(self) -> int:
        return self.coarse_matrix.shape[0]


def build_schwarz(k: int, mesh: TriMesh, dual: DualMesh, partition: Partition,
                  alpha: CoefficientField,
                  quad: QuadratureRule = DEFAULT_QUAD) -> SchwarzOperator:
    """Assemble both matrices and factorise the local and coarse blocks."""
    if partition.mesh is not mesh:
        raise ValueError("partition was built on a different mesh")
    A = assemble_fe_matrix(mesh, alpha, quad)
    B = assemble_fve_matrix(mesh, dual, alpha, quad)
    return SchwarzOperator.from_matrices(k, partition, A, B)


def apply_T(op: SchwarzOperator, u: np.ndarray) -> np.ndarray:
    return op.apply(u)


def build_g(op: SchwarzOperator, f_fve: np.ndarray, f_fe: np.ndarray) -> np.ndarray:
    """Preconditioned right-hand side ``g^(k) = T u*`` without knowing ``u*``."""
    return op.build_g(f_fve, f_fe)
