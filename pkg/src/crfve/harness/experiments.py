"""Experiment drivers.  Every ``run_*`` function returns a list of row dicts
(one CSV line each); the command line layer only writes them out."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..decomposition import Partition, build_block_partition, layer_contrast
from ..discretization import (CoefficientField, assemble_fe_matrix, assemble_fe_rhs,
                              assemble_fve_matrix, assemble_fve_rhs, boundary_values,
                              broken_h1_error, interpolate_midpoints)
from ..krylov import (InnerProduct, KrylovReport, dense_spectrum, estimate_Cp,
                      estimate_cp, gmres, spectral_norm, write_history_csv)
from ..mesh import DualMesh, TriMesh, build_dual_mesh, build_unit_square_mesh, validate_mesh
from ..quadrature import QuadratureRule
from ..schwarz import SchwarzOperator
from .config import CoefficientSpec, ExperimentConfig, SolverConfig

__all__ = [
    "Problem",
    "SolveResult",
    "setup_problem",
    "solve",
    "run_mesh_info",
    "run_iteration_table",
    "run_scaling_table",
    "run_matrix_diagnostics",
    "run_convergence_study",
    "run_spectrum_dump",
    "write_rows",
]


def unit_source(x, y):
    return np.ones_like(x)


@dataclass(eq=False)
class Problem:
    mesh: TriMesh
    dual: DualMesh
    alpha: CoefficientField
    partition: Partition
    quad: QuadratureRule
    A_fe: sp.csr_matrix
    A_fve: sp.csr_matrix
    f_fe: np.ndarray
    f_fve: np.ndarray

    def operator(self, k: int) -> SchwarzOperator:
        return SchwarzOperator.from_matrices(k, self.partition, self.A_fe, self.A_fve)


def setup_problem(n: int, m: int, spec: CoefficientSpec, *, diagonal: str = "ll_ur",
                  average_outer: bool = False, quad: QuadratureRule | None = None,
                  source=unit_source) -> Problem:
    """Mesh, coefficient, ``m x m`` partition, both matrices and both loads."""
    quad = quad or ExperimentConfig().quadrature
    mesh, alpha = spec.build(build_unit_square_mesh(n, diagonal))
    dual = build_dual_mesh(mesh)
    part = build_block_partition(mesh, m, average_outer=average_outer)
    return Problem(mesh, dual, alpha, part, quad,
                   assemble_fe_matrix(mesh, alpha, quad),
                   assemble_fve_matrix(mesh, dual, alpha, quad),
                   assemble_fe_rhs(mesh, source, quad),
                   assemble_fve_rhs(mesh, dual, source, quad))


def problem_from_config(cfg: ExperimentConfig, n: int | None = None, m: int | None = None,
                        spec: CoefficientSpec | None = None) -> Problem:
    return setup_problem(cfg.n if n is None else n, cfg.m if m is None else m,
                         spec or cfg.coefficient, diagonal=cfg.diagonal,
                         average_outer=cfg.average_outer, quad=cfg.quadrature)


@dataclass(eq=False)
class SolveResult:
    x: np.ndarray
    report: KrylovReport
    operator: SchwarzOperator
    rhs: np.ndarray
    direct_error: float | None = None

    @property
    def converged(self) -> bool:
        return self.report.converged


def solve(problem: Problem, solver: SolverConfig = SolverConfig(),
          keep_basis: bool = False) -> SolveResult:
    """GMRES on ``T u = g`` in the energy inner product, ``u0 = 0``.

    Stops on the relative l2 norm of the unpreconditioned residual
    ``F - S u``.  c_p and C_p are estimated when the solver config asks.
    """
    op = problem.operator(solver.k)
    F = op.rhs(problem.f_fve, problem.f_fe)
    S = op.source
    g = op.precondition(F)
    ip = InnerProduct.energy(problem.A_fe, check=False)
    normF = np.linalg.norm(F) or 1.0
    x, rep = gmres(op.apply, g, ip, rtol=solver.rtol, maxit=solver.maxit,
                   monitor=lambda u: np.linalg.norm(F - S @ u) / normF,
                   keep_basis=keep_basis)
    T = op.as_linear_operator()
    if solver.estimate_cp:
        rep.cp = estimate_cp(T, ip)
    if solver.estimate_Cp:
        rep.Cp = estimate_Cp(T, ip)
    err = None
    if solver.verify:
        ref = spla.spsolve(sp.csc_matrix(S), F)
        err = float(np.linalg.norm(x - ref) / max(np.linalg.norm(ref), 1e-300))
    return SolveResult(x, rep, op, F, err)


def _solve_row(res: SolveResult) -> dict:
    rep = res.report
    row = {"iterations": rep.iterations,
           "cp": rep.cp,
           "converged": rep.converged,
           "reason": rep.reason,
           "rel_residual": rep.residual_history[-1] if rep.residual_history else np.nan}
    if rep.Cp is not None:
        row["Cp"] = rep.Cp
    if res.direct_error is not None:
        row["direct_error"] = res.direct_error
    return row


# --------------------------------------------------------------------------
# experiments


def run_mesh_info(cfg: ExperimentConfig) -> list[dict]:
    mesh, alpha = cfg.coefficient.build(build_unit_square_mesh(cfg.n, cfg.diagonal))
    diag = validate_mesh(mesh)
    part = build_block_partition(mesh, cfg.m, average_outer=cfg.average_outer)
    lc = layer_contrast(part, alpha)
    return [{"n": cfg.n, "m": cfg.m,
             "n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles,
             "n_edges": mesh.n_edges, "n_dofs": mesh.n_dofs,
             "h_min": diag.h_min, "h_max": diag.h_max, "shape_ratio": diag.shape_ratio,
             "orientation_errors": len(diag.orientation_errors) + len(diag.degenerate_triangles),
             "conformity_violations": len(diag.conformity_violations),
             "n_subdomains": part.n_subdomains,
             "n_interface": len(part.interface_dofs),
             "inclusion_triangles": int(np.count_nonzero(mesh.region_tags)),
             "layer_ratio": float(lc.ratio.max()),
             "beta1_quadratic": lc.beta1_quadratic,
             "beta1_linear": lc.beta1_linear}]


def run_iteration_table(cfg: ExperimentConfig, alpha1=None, history_dir=None) -> list[dict]:
    """One GMRES solve per ``alpha1`` value (``sweep.alpha1`` by default)."""
    values = alpha1 if alpha1 is not None else cfg.sweep.get("alpha1", [cfg.coefficient.alpha1])
    history_dir = history_dir or cfg.sweep.get("histories")
    rows = []
    for a1 in values:
        spec = cfg.coefficient.with_alpha1(a1)
        prob = problem_from_config(cfg, spec=spec)
        res = solve(prob, cfg.solver)
        row = {"alpha1": float(a1), **_solve_row(res),
               "layer_ratio": float(layer_contrast(prob.partition, prob.alpha).ratio.max())}
        rows.append(row)
        if history_dir:
            Path(history_dir).mkdir(parents=True, exist_ok=True)
            write_history_csv(res.report, Path(history_dir) / f"history_alpha1_{a1:g}.csv")
    return rows


def scaling_grid(ns, ms) -> list[tuple[int, int]]:
    """Lower-triangular ``(n, m)`` grid: ``m`` divides ``n`` with ``n/m >= 2``."""
    return [(n, m) for n in ns for m in ms if n % m == 0 and n // m >= 2]


def run_scaling_table(cfg: ExperimentConfig, k: int | None = None, pairs=None) -> list[dict]:
    """Iterations and c_p over ``(h, H) = (1/n, 1/m)`` pairs."""
    solver = cfg.solver if k is None else replace(cfg.solver, k=k)
    if pairs is None:
        sc = cfg.sweep.get("scaling", {})
        if "pairs" in sc:
            pairs = [tuple(p) for p in sc["pairs"]]
        else:
            pairs = scaling_grid(sc.get("n", [8, 16, 32]), sc.get("m", [4, 8]))
    rows = []
    for n, m in pairs:
        prob = problem_from_config(cfg, n=n, m=m)
        res = solve(prob, solver)
        rows.append({"h": 1.0 / n, "H": 1.0 / m, "n": n, "m": m, "k": solver.k,
                     **_solve_row(res)})
    return rows


def run_matrix_diagnostics(cfg: ExperimentConfig, alpha1=None, ns=None,
                           tol: float | None = None, maxiter: int | None = None) -> list[dict]:
    """Non-symmetry per ``alpha1`` or the FE/FVE difference per ``n``.

    ``sweep.alpha1`` selects the first, ``sweep.n`` the second; with neither
    a single row for the configured problem reports all three norms.
    Lanczos accuracy comes from ``sweep.tol`` (1e-8) and ``sweep.maxiter`` (600).
    """
    tol = tol if tol is not None else float(cfg.sweep.get("tol", 1e-8))
    maxiter = maxiter if maxiter is not None else int(cfg.sweep.get("maxiter", 600))
    alpha1 = alpha1 if alpha1 is not None else cfg.sweep.get("alpha1")
    ns = ns if ns is not None else cfg.sweep.get("n")
    rows = []
    if alpha1 is not None:
        mesh0 = build_unit_square_mesh(cfg.n, cfg.diagonal)
        for a1 in alpha1:
            mesh, alpha = cfg.coefficient.with_alpha1(a1).build(mesh0)
            A = assemble_fve_matrix(mesh, build_dual_mesh(mesh), alpha, cfg.quadrature)
            skew, comm = _nonsymmetry(A, tol, maxiter)
            rows.append({"alpha1": float(a1), "skew_norm": skew.value,
                         "commutator_norm": comm.value,
                         "converged": skew.converged and comm.converged})
        return rows
    for n in (ns if ns is not None else [cfg.n]):
        mesh, alpha = cfg.coefficient.build(build_unit_square_mesh(n, cfg.diagonal))
        dual = build_dual_mesh(mesh)
        A = assemble_fe_matrix(mesh, alpha, cfg.quadrature)
        B = assemble_fve_matrix(mesh, dual, alpha, cfg.quadrature)
        diff = spectral_norm(A - B, tol=tol, maxiter=maxiter, return_result=True)
        row = {"h": 1.0 / n, "n": n, "perturbation_norm": diff.value,
               "converged": diff.converged}
        if ns is None:
            skew, comm = _nonsymmetry(B, tol, maxiter)
            row.update(skew_norm=skew.value, commutator_norm=comm.value,
                       converged=diff.converged and skew.converged and comm.converged)
        rows.append(row)
    return rows


def _nonsymmetry(A, tol, maxiter):
    A = sp.csr_matrix(A)
    skew = spectral_norm((A - A.T).tocsr(), tol=tol, maxiter=maxiter, return_result=True)
    comm = spectral_norm((A @ A.T - A.T @ A).tocsr(), tol=tol, maxiter=maxiter,
                         return_result=True)
    return skew, comm


# manufactured solutions: value, gradient, laplacian
def _sinsin():
    pi = np.pi
    return (lambda x, y: np.sin(pi * x) * np.sin(pi * y),
            lambda x, y: (pi * np.cos(pi * x) * np.sin(pi * y),
                          pi * np.sin(pi * x) * np.cos(pi * y)),
            lambda x, y: -2 * pi ** 2 * np.sin(pi * x) * np.sin(pi * y))


def _linear():
    return (lambda x, y: 0.5 + x - 2.0 * y,
            lambda x, y: (np.ones_like(x), -2.0 * np.ones_like(x)),
            lambda x, y: np.zeros_like(x))


SOLUTIONS = {"sinsin": _sinsin, "linear": _linear}


def manufactured_source(alpha: CoefficientField, grad_u, lap_u):
    """``f = -(grad(alpha).grad(u) + alpha lap(u))`` for a tag-free coefficient."""
    if alpha.gradient is None:
        raise ValueError("manufactured sources need the coefficient gradient")

    def f(x, y):
        tags = np.zeros(np.shape(x), dtype=np.int64)
        ax, ay = alpha.gradient(x, y, tags)
        ux, uy = grad_u(x, y)
        return -(ax * ux + ay * uy + alpha(x, y, tags) * lap_u(x, y))
    return f


def run_convergence_study(cfg: ExperimentConfig, ns=None, solution: str | None = None,
                          method: str = "fve") -> list[dict]:
    """Broken-H1 errors of direct solves against a manufactured solution."""
    if cfg.coefficient.inclusions:
        raise ValueError("the convergence study needs a smooth coefficient (no inclusions)")
    ns = ns if ns is not None else cfg.sweep.get("n", [8, 16, 32])
    solution = solution or cfg.sweep.get("solution", "sinsin")
    method = cfg.sweep.get("method", method)
    if solution not in SOLUTIONS:
        raise ValueError(f"unknown manufactured solution {solution!r}")
    u, grad_u, lap_u = SOLUTIONS[solution]()
    rows = []
    prev = None
    for n in ns:
        mesh, alpha = cfg.coefficient.build(build_unit_square_mesh(n, cfg.diagonal))
        f = manufactured_source(alpha, grad_u, lap_u)
        g = boundary_values(u, mesh)
        q = cfg.quadrature
        if method == "fve":
            dual = build_dual_mesh(mesh)
            S = assemble_fve_matrix(mesh, dual, alpha, q)
            lift = assemble_fve_matrix(mesh, dual, alpha, q, boundary_columns=True) @ g
            F = assemble_fve_rhs(mesh, dual, f, q)
        elif method == "fe":
            S = assemble_fe_matrix(mesh, alpha, q)
            lift = assemble_fe_matrix(mesh, alpha, q, boundary_columns=True) @ g
            F = assemble_fe_rhs(mesh, f, q)
        else:
            raise ValueError(f"method must be 'fve' or 'fe', not {method!r}")
        uh = spla.spsolve(sp.csc_matrix(S), F - lift) if mesh.n_dofs else np.zeros(0)
        err = broken_h1_error(uh, u, grad_u, mesh, boundary=g)
        interp = broken_h1_error(interpolate_midpoints(u, mesh), u, grad_u, mesh, boundary=g)
        order = np.nan if prev is None or err == 0 else np.log(prev[1] / err) / np.log(n / prev[0])
        rows.append({"h": 1.0 / n, "n": n, "error": err, "order": order,
                     "interpolation_error": interp, "converged": True})
        prev = (n, err)
    return rows


def run_spectrum_dump(cfg: ExperimentConfig, cap: int = 3000) -> tuple[np.ndarray, np.ndarray]:
    """Dense eigenvalues of ``A_FVE`` and of the preconditioned operator."""
    prob = problem_from_config(cfg)
    if prob.mesh.n_dofs > cap:
        raise ValueError(f"{prob.mesh.n_dofs} dofs exceed the dense cap of {cap}")
    op = prob.operator(cfg.solver.k)
    return dense_spectrum(prob.A_fve, cap), dense_spectrum(op.as_linear_operator(), cap)


def write_rows(rows: list[dict], path) -> None:
    """CSV with the union of row keys, in first-seen order."""
    cols: list[str] = []
    for r in rows:
        cols += [k for k in r if k not in cols]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, restval="", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "" if v is None else repr(float(v))
    return v


def write_spectrum(eigs: np.ndarray, path) -> None:
    write_rows([{"re": float(z.real), "im": float(z.imag)} for z in eigs], path)
