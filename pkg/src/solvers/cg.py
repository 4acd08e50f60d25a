"""
Conjugate Gradient Module

Diagonally preconditioned conjugate gradients with either a relative
residual target or a fixed iteration budget.
"""

from typing import Callable, Optional, Tuple

import numpy as np
import structlog
from scipy import sparse

from src.models.plans import SolveReport, SolverMode
from src.utils.errors import ConvergenceError, SolverError


logger = structlog.get_logger(__name__)

DIRECT_TOLERANCE = 1e-13


def rowsum_preconditioner(A: sparse.spmatrix) -> np.ndarray:
    """d_i = sum_j |A_ij|; zero rows are rejected."""
    d = np.asarray(abs(A).sum(axis=1)).ravel()
    zero = np.nonzero(d == 0.0)[0]
    if zero.size:
        raise SolverError(f"row {int(zero[0])} of the operator is zero")
    return d


def pcg(
    matvec: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    x0: Optional[np.ndarray],
    diag: np.ndarray,
    *,
    tol: float = DIRECT_TOLERANCE,
    maxiter: Optional[int] = None,
    fixed_iterations: Optional[int] = None,
    rhs_scale: Optional[float] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """Solve A x = b.

    The stopping metric is the 2-norm of the preconditioned residual
    D^-1 r relative to D^-1 b, or to ``rhs_scale`` when given. With
    ``fixed_iterations`` exactly that many iterations run (fewer only on exact
    convergence); otherwise iterate to ``tol`` and raise ConvergenceError
    after ``maxiter`` iterations.
    """
    n = b.shape[0]
    mode = SolverMode.DIRECT if fixed_iterations is None else SolverMode.CG_FIXED
    cap = fixed_iterations if fixed_iterations is not None else (maxiter or 20 * max(n, 1))

    inv_diag = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    reference = rhs_scale if rhs_scale is not None else np.linalg.norm(inv_diag * b)
    if reference == 0.0:
        reference = 1.0

    r = b - matvec(x) if x0 is not None else b.copy()
    z = inv_diag * r
    rel = np.linalg.norm(z) / reference
    history = [float(rel)]
    p = z.copy()
    rz = r @ z

    iterations = 0
    while iterations < cap:
        if fixed_iterations is None and rel <= tol:
            break
        Ap = matvec(p)
        pAp = p @ Ap
        if rz == 0.0 or pAp <= 0.0:
            break
        step = rz / pAp
        x += step * p
        r -= step * Ap
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        rel = np.linalg.norm(z) / reference
        history.append(float(rel))
        iterations += 1

    converged = rel <= tol
    if fixed_iterations is None and not converged:
        raise ConvergenceError(
            f"CG reached {iterations} iterations with relative residual {rel:.3e} > {tol:.1e}",
            residual_history=history,
        )

    logger.debug("cg_finished", n=n, mode=mode.value, iterations=iterations, residual=float(rel))
    return x, SolveReport(
        iterations=iterations,
        final_relative_residual=float(rel),
        mode=mode,
        converged=bool(converged),
        residual_history=history,
    )
