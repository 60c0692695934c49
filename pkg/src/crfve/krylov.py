"""GMRES in a general inner product and Krylov eigenvalue estimators.

The energy inner product is ``<u, v>_a = v^T A u`` with ``A`` the (symmetric
positive definite) CR finite element matrix.  GMRES minimises the residual in
that norm; the stopping test may monitor a different quantity, e.g. the l2
norm of the unpreconditioned residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "InnerProduct",
    "KrylovReport",
    "LanczosResult",
    "gmres",
    "lanczos",
    "estimate_cp",
    "estimate_Cp",
    "spectral_norm",
    "dense_spectrum",
    "as_operator",
    "write_history_csv",
]


class InnerProduct:
    """Euclidean inner product, or ``<x, y> = y^T M x`` for SPD ``M``."""

    def __init__(self, matrix=None, check: bool = True, seed: int = 0):
        self.matrix = None if matrix is None else sp.csr_matrix(matrix)
        self._solver = None
        if self.matrix is not None and check:
            self._check(seed)

    @classmethod
    def euclidean(cls) -> "InnerProduct":
        return cls(None)

    @classmethod
    def energy(cls, A, check: bool = True) -> "InnerProduct":
        return cls(A, check=check)

    @property
    def kind(self) -> str:
        return "euclidean" if self.matrix is None else "energy"

    def _check(self, seed: int) -> None:
        M = self.matrix
        n = M.shape[0]
        if M.shape != (n, n):
            raise ValueError("inner product matrix must be square")
        if n == 0:
            return
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((2, n))
        scale = abs(M).sum() / n + 1e-300
        if abs(y @ (M @ x) - x @ (M @ y)) > 1e-10 * scale * np.linalg.norm(x) * np.linalg.norm(y):
            raise ValueError("inner product matrix is not symmetric")
        for v in rng.standard_normal((3, n)):
            if v @ (M @ v) <= 0:
                raise ValueError("inner product matrix is not positive definite")

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x if self.matrix is None else self.matrix @ x

    def dot(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(y @ self.apply(x))

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(max(self.dot(x, x), 0.0)))

    def solve(self, x: np.ndarray) -> np.ndarray:
        """``M^{-1} x``; needed only to form adjoints in this inner product."""
        if self.matrix is None:
            return x
        if self._solver is None:
            self._solver = spla.splu(sp.csc_matrix(self.matrix))
        return self._solver.solve(x)

    def adjoint(self, op: spla.LinearOperator) -> spla.LinearOperator:
        """``T^a = M^{-1} T^T M``, the adjoint of ``op`` in this inner product."""
        return spla.LinearOperator(
            op.shape, matvec=lambda v: self.solve(op.rmatvec(self.apply(v))),
            dtype=float)


def as_operator(T) -> spla.LinearOperator:
    """Matrices, LinearOperators, or anything with an ``as_linear_operator`` method."""
    if hasattr(T, "as_linear_operator"):
        return T.as_linear_operator()
    return spla.aslinearoperator(T)


class _Basis:
    """Growable row-major store of Krylov vectors and their ``M``-images."""

    def __init__(self, dim: int, with_images: bool, chunk: int = 64):
        self.dim = dim
        self.Q = np.empty((chunk, dim))
        self.MQ = np.empty((chunk, dim)) if with_images else None
        self.k = 0

    def append(self, q, mq=None):
        if self.k == len(self.Q):
            grow = max(len(self.Q), 16)
            self.Q = np.vstack([self.Q, np.empty((grow, self.dim))])
            if self.MQ is not None:
                self.MQ = np.vstack([self.MQ, np.empty((grow, self.dim))])
        self.Q[self.k] = q
        if self.MQ is not None:
            self.MQ[self.k] = mq
        self.k += 1

    @property
    def q(self):
        return self.Q[: self.k]

    @property
    def mq(self):
        return self.Q[: self.k] if self.MQ is None else self.MQ[: self.k]

    def orthogonalize(self, w: np.ndarray, passes: int = 2) -> np.ndarray:
        """Project ``w`` against the basis (classical GS, repeated)."""
        coeffs = np.zeros(self.k)
        for _ in range(passes):
            h = self.mq @ w
            w = w - self.q.T @ h
            coeffs += h
        return w, coeffs


@dataclass
class LanczosResult:
    value: float
    iterations: int
    converged: bool
    residual: float
    ritz_values: np.ndarray = field(repr=False, default=None)


def lanczos(apply: Callable, dim: int, ip: InnerProduct | None = None,
            which: str = "largest", tol: float = 1e-8, maxiter: int = 600,
            v0: np.ndarray | None = None, seed: int = 0) -> LanczosResult:
    """Extreme eigenvalue of an operator self-adjoint in ``ip``.

    Full reorthogonalisation.  Stops when the a-posteriori eigenvalue error
    bound ``min(r, r^2/gap)`` drops below ``tol * |theta|`` where ``r`` is the
    Ritz residual norm.
    """
    if which not in ("largest", "smallest"):
        raise ValueError(f"which must be 'largest' or 'smallest', not {which!r}")
    ip = ip or InnerProduct.euclidean()
    if dim == 0:
        return LanczosResult(np.nan, 0, True, 0.0, np.zeros(0))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) if v0 is None else np.array(v0, dtype=float)
    v /= ip.norm(v)
    basis = _Basis(dim, ip.matrix is not None)
    alphas: list[float] = []
    betas: list[float] = []
    theta, resid, converged = np.nan, np.inf, False
    pick = -1 if which == "largest" else 0
    maxiter = min(maxiter, dim)
    evals = np.zeros(0)
    for j in range(maxiter):
        basis.append(v, ip.apply(v) if ip.matrix is not None else None)
        w = apply(v)
        w, coeffs = basis.orthogonalize(w)
        alphas.append(coeffs[j])
        beta = ip.norm(w)
        evals, evecs = sla.eigh_tridiagonal(np.array(alphas), np.array(betas))
        theta = evals[pick]
        resid = beta * abs(evecs[-1, pick])
        scale = max(abs(evals[0]), abs(evals[-1]), np.finfo(float).tiny)
        bound = resid
        if j:
            gap = abs(evals[pick] - evals[pick - 1 if pick == -1 else 1])
            if gap > 0:
                bound = min(resid, resid ** 2 / gap)
        if bound <= tol * max(abs(theta), 1e-300) or beta <= 1e-14 * scale:
            converged = True
            break
        betas.append(beta)
        v = w / beta
    if not converged and len(alphas) == dim:
        converged = True        # the Krylov space is the whole space
    if not converged:
        warnings.warn(f"Lanczos stopped after {len(alphas)} steps without reaching "
                      f"tol={tol:g} (Ritz residual {resid:.2e})", RuntimeWarning,
                      stacklevel=2)
    return LanczosResult(float(theta), len(alphas), converged, float(resid), evals)


@dataclass
class KrylovReport:
    iterations: int = 0
    converged: bool = False
    reason: str = ""
    residual_history: list[float] = field(default_factory=list)
    preconditioned_residual_history: list[float] = field(default_factory=list)
    ip_residual_history: list[float] = field(default_factory=list)
    cp: float | None = None
    Cp: float | None = None
    basis: np.ndarray | None = field(default=None, repr=False)

    def rows(self):
        """``(iter, true_resid_rel, precond_resid_rel)`` triples."""
        true = self.residual_history or [np.nan] * len(self.preconditioned_residual_history)
        return [(i, t, p) for i, (t, p)
                in enumerate(zip(true, self.preconditioned_residual_history))]


def gmres(apply: Callable, b: np.ndarray, ip: InnerProduct | None = None,
          rtol: float = 1e-6, maxit: int | None = None,
          x0: np.ndarray | None = None, monitor: Callable | None = None,
          keep_basis: bool = False, stagnation_window: int = 50):
    """Full (unrestarted) GMRES minimising the residual in ``ip``.

    ``monitor(x)``, if given, returns the norm of the quantity used for
    stopping (e.g. the unpreconditioned residual); convergence is declared
    when ``monitor(x_m) <= rtol * monitor(x_0)``.  Without a monitor the l2
    norm of ``b - apply(x)`` is used.

    Returns ``(x, KrylovReport)``.
    """
    ip = ip or InnerProduct.euclidean()
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxit = min(n, 1000 if maxit is None else maxit)
    x0 = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    report = KrylovReport()

    r0 = b - apply(x0) if np.any(x0) else b.copy()
    beta = ip.norm(r0)
    pre0 = np.linalg.norm(r0)
    true0 = monitor(x0) if monitor is not None else None
    report.ip_residual_history.append(beta)
    report.preconditioned_residual_history.append(1.0)
    if monitor is not None:
        report.residual_history.append(1.0)
    if beta == 0.0 or (true0 is not None and true0 == 0.0):
        report.converged, report.reason = True, "zero residual"
        return x0, report

    basis = _Basis(n, ip.matrix is not None)
    basis.append(r0 / beta, ip.apply(r0) / beta if ip.matrix is not None else None)
    H = np.zeros((maxit + 1, maxit))
    Rfac = np.zeros((maxit, maxit))
    cs, sn = np.zeros(maxit), np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta
    x = x0
    for j in range(maxit):
        w = apply(basis.q[j])
        w, h = basis.orthogonalize(w)
        hn = ip.norm(w)
        H[: j + 1, j] = h
        H[j + 1, j] = hn
        col = H[: j + 2, j].copy()
        for i in range(j):
            col[i], col[i + 1] = (cs[i] * col[i] + sn[i] * col[i + 1],
                                  -sn[i] * col[i] + cs[i] * col[i + 1])
        rho = np.hypot(col[j], col[j + 1])
        cs[j], sn[j] = (col[j] / rho, col[j + 1] / rho) if rho > 0 else (1.0, 0.0)
        col[j], col[j + 1] = rho, 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        report.ip_residual_history.append(abs(g[j + 1]))
        Rfac[: j + 1, j] = col[: j + 1]
        y = sla.solve_triangular(Rfac[: j + 1, : j + 1], g[: j + 1])
        x = x0 + basis.q[: j + 1].T @ y

        happy = hn <= 1e-14 * max(np.abs(h).max(initial=0.0), hn, 1e-300)
        if not happy:
            basis.append(w / hn, ip.apply(w) / hn if ip.matrix is not None else None)
        # preconditioned residual b - T x = Q_{j+1} (beta e1 - Hbar y)
        c = -H[: j + 2, : j + 1] @ y
        c[0] += beta
        kq = min(j + 2, basis.k)
        pres = np.linalg.norm(basis.q[:kq].T @ c[:kq]) / pre0
        report.preconditioned_residual_history.append(pres)
        if monitor is not None:
            true = monitor(x) / true0
            report.residual_history.append(true)
        else:
            true = pres
        report.iterations = j + 1
        if true <= rtol:
            report.converged, report.reason = True, "rtol"
            break
        if happy:
            report.converged, report.reason = True, "breakdown"
            break
        hist = report.ip_residual_history
        if (len(hist) > stagnation_window
                and hist[-1] >= (1.0 - 1e-12) * hist[-1 - stagnation_window]):
            report.reason = "stagnation"
            break
    else:
        report.reason = "maxit"
    if keep_basis:
        report.basis = basis.q.copy()
    return x, report


def spectral_norm(D, tol: float = 1e-8, maxiter: int = 600, seed: int = 0,
                  return_result: bool = False):
    """``||D||_2`` from the largest eigenvalue of ``D^T D`` (Lanczos).

    With ``return_result`` the :class:`LanczosResult` is returned, its
    ``value`` already square-rooted.
    """
    D = as_operator(D)
    if D.shape[1] == 0:
        res = LanczosResult(0.0, 0, True, 0.0, np.zeros(0))
        return res if return_result else 0.0
    res = lanczos(lambda v: D.rmatvec(D.matvec(v)), D.shape[1], which="largest",
                  tol=tol, maxiter=maxiter, seed=seed)
    res.value = float(np.sqrt(max(res.value, 0.0)))
    return res if return_result else res.value


def estimate_cp(T, ip: InnerProduct | None = None, tol: float = 1e-6,
                maxiter: int = 600, seed: int = 0, return_result: bool = False):
    """Smallest eigenvalue of the ``ip``-symmetric part ``(T + T^a)/2``.

    ``T`` must provide ``rmatvec`` (the Euclidean transpose), e.g. a
    :class:`scipy.sparse.linalg.LinearOperator`.
    """
    ip = ip or InnerProduct.euclidean()
    T = as_operator(T)
    Ta = ip.adjoint(T)
    res = lanczos(lambda v: 0.5 * (T.matvec(v) + Ta.matvec(v)), T.shape[0], ip,
                  which="smallest", tol=tol, maxiter=maxiter, seed=seed)
    return res if return_result else res.value


def estimate_Cp(T, ip: InnerProduct | None = None, tol: float = 1e-6,
                maxiter: int = 600, seed: int = 0, return_result: bool = False):
    """``sup ||T u|| / ||u||`` in ``ip``: square root of the top eigenvalue of ``T^a T``."""
    ip = ip or InnerProduct.euclidean()
    T = as_operator(T)
    Ta = ip.adjoint(T)
    res = lanczos(lambda v: Ta.matvec(T.matvec(v)), T.shape[0], ip,
                  which="largest", tol=tol, maxiter=maxiter, seed=seed)
    res.value = float(np.sqrt(max(res.value, 0.0)))
    return res if return_result else res.value


def dense_matrix(T) -> np.ndarray:
    """Materialise an operator column by column."""
    if sp.issparse(T):
        return T.toarray()
    if isinstance(T, np.ndarray):
        return T
    T = as_operator(T)
    return T.matmat(np.eye(T.shape[1]))


def dense_spectrum(T, cap: int = 3000) -> np.ndarray:
    """All eigenvalues of ``T`` (dense QR algorithm), sorted by real part."""
    n = T.shape[0]
    if n > cap:
        raise ValueError(f"dimension {n} exceeds the dense eigensolver cap {cap}")
    ev = np.linalg.eigvals(dense_matrix(T))
    return ev[np.lexsort((ev.imag, ev.real))]


def write_history_csv(report: KrylovReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("iter,true_resid_rel,precond_resid_rel\n")
        for i, t, p in report.rows():
            fh.write(f"{i},{t:.10e},{p:.10e}\n")
