"""Jacobi-preconditioned conjugate gradients and a dense SPD oracle."""
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

DEFAULT_TOL = 1e-10
DENSE_LIMIT = 2000


@dataclass
class SolveReport:
    iterations: int
    residual: float  # ||b - A x|| / ||b||, recomputed at exit
    seconds: float
    method: str
    converged: bool = True
    min_eigenvalue: float = None


class SolverError(RuntimeError):
    """Raised on breakdown or non-convergence; carries the best iterate."""

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class NotSPDError(SolverError):
    pass


def _operands(system, b):
    if b is None:
        return system.A, np.asarray(system.b, dtype=float)
    return system, np.asarray(b, dtype=float)


def default_maxit(n):
    return int(20 * np.sqrt(n) + 200)


def solve_cg(system, b=None, tol=DEFAULT_TOL, maxit=None, x0=None, callback=None):
    """Solve A x = b with Jacobi-preconditioned CG.

    ``system`` is a LinearSystem, or a matrix when ``b`` is given. Returns
    (x, SolveReport); raises SolverError when the true relative residual
    does not reach ``tol`` within ``maxit`` iterations.
    """
    A, b = _operands(system, b)
    start = time.perf_counter()
    n = len(b)
    maxit = default_maxit(n) if maxit is None else maxit
    if not np.all(np.isfinite(b)):
        raise SolverError("right-hand side has non-finite entries")
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        x[:] = 0.0
        return x, SolveReport(0, 0.0, time.perf_counter() - start, "pcg-jacobi")

    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        raise SolverError("non-positive diagonal entry; matrix is not SPD")
    inv_diag = 1.0 / diag

    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    it = 0
    while it < maxit:
        if np.linalg.norm(r) <= tol * bnorm:
            # confirm with the true residual, the recurrence drifts
            r = b - A @ x
            if np.linalg.norm(r) <= tol * bnorm:
                break
            z = inv_diag * r
            p = z.copy()
            rz = r @ z
        Ap = A @ p
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0:
            raise SolverError("CG breakdown: p^T A p is not positive", x)
        step = rz / pAp
        x += step * p
        r -= step * Ap
        it += 1
        if callback is not None:
            callback(x)
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new

    res = np.linalg.norm(b - A @ x) / bnorm
    report = SolveReport(it, float(res), time.perf_counter() - start, "pcg-jacobi", res <= tol)
    if not report.converged:
        raise SolverError(f"CG did not converge in {maxit} iterations (residual {res:.3e})", x, report)
    return x, report


def solve_dense(system, b=None):
    """Cholesky solve with an eigenvalue check that the matrix is SPD."""
    A, b = _operands(system, b)
    start = time.perf_counter()
    if A.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_LIMIT} unknowns, got {A.shape[0]}")
    M = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    lam_min = float(la.eigvalsh(M, subset_by_index=[0, 0])[0]) if len(M) else np.inf
    if lam_min <= 0:
        raise NotSPDError(f"matrix is not positive definite (min eigenvalue {lam_min:.3e})")
    x = la.cho_solve(la.cho_factor(M), b) if len(M) else np.zeros(0)
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(b - M @ x) / bnorm if bnorm else 0.0
    return x, SolveReport(1, float(res), time.perf_counter() - start, "cholesky", True, lam_min)
