"""Conjugate-gradient solvers for P1 Laplace problems."""

from __future__ import annotations

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import SolverError
from .mesh import TriMesh

__all__ = ["solve_spd", "solve_pure_neumann", "solve_dirichlet", "RESIDUAL_TOL"]

#: relative residual required from every linear solve
RESIDUAL_TOL = 1e-10


def solve_spd(A: sp.spmatrix, b: np.ndarray, *, rtol: float = 1e-13, maxiter: int = 5000) -> np.ndarray:
    """Solve ``A x = b`` (A symmetric positive semidefinite, b in its range).

    Preconditioned conjugate gradients with a smoothed-aggregation AMG
    V-cycle.  The relative residual is checked against ``RESIDUAL_TOL``.
    """
    A = sp.csr_matrix(A)
    bn = float(np.linalg.norm(b))
    if bn == 0.0:
        return np.zeros_like(b)
    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=200)
    x, info = cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=ml.aspreconditioner(cycle="V"))
    res = float(np.linalg.norm(A @ x - b)) / bn
    if not np.all(np.isfinite(x)) or res > RESIDUAL_TOL:
        raise SolverError(f"conjugate gradients stopped with relative residual {res:.3e} (info={info})")
    return x


def solve_pure_neumann(mesh: TriMesh, rhs: np.ndarray) -> np.ndarray:
    """Zero-mean solution of ``K u = rhs`` for a compatible right-hand side."""
    rhs = np.asarray(rhs, dtype=float)
    rhs = rhs - rhs.sum() * mesh.lumped_mass / mesh.lumped_mass.sum()
    u = solve_spd(mesh.stiffness, rhs)
    return u - mesh.mean(u)


def solve_dirichlet(mesh: TriMesh, fixed: np.ndarray, values: np.ndarray, rhs: np.ndarray | None = None) -> np.ndarray:
    """Solve ``K u = rhs`` with ``u[fixed] = values``."""
    n = mesh.n_nodes
    u = np.zeros(n)
    u[fixed] = values
    free = np.ones(n, dtype=bool)
    free[fixed] = False
    K = mesh.stiffness
    Kff = K[free][:, free]
    b = -(K[free][:, ~free] @ u[~free])
    if rhs is not None:
        b = b + np.asarray(rhs)[free]
    u[free] = solve_spd(Kff, b)
    return u
