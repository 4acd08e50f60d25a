"""
Wave Operator Solvers Module

Application and inversion of L_h = M^-1 A and the element-wise bound on
its largest eigenvalue.
"""

from typing import Optional, Tuple

import numpy as np
import structlog

from src.models.fields import FieldVector, WaveOperators
from src.models.plans import SigmaBound, SolveReport, SolverMode, default_sigma_bound
from src.solvers.cg import DIRECT_TOLERANCE, pcg, rowsum_preconditioner
from src.utils.errors import SolverError
from src.utils.observability import SolverStats


logger = structlog.get_logger(__name__)

POWER_TOLERANCE = 1e-8
POWER_MAX_ITERATIONS = 10000
# Projected rhs below this fraction of the original counts as zero
PROJECTION_FLOOR = 1e2 * np.finfo(float).eps


def preconditioner(ops: WaveOperators) -> np.ndarray:
    if ops._preconditioner is None:
        ops._preconditioner = rowsum_preconditioner(ops.stiffness)
    return ops._preconditioner


def mass_matvec(ops: WaveOperators, values: np.ndarray) -> np.ndarray:
    if ops.lumped:
        return ops.mass_diagonal * values
    return ops.mass @ values


def mass_inner(ops: WaveOperators, u: np.ndarray, v: np.ndarray) -> float:
    return float(u @ mass_matvec(ops, v))


def remove_mean(ops: WaveOperators, values: np.ndarray) -> np.ndarray:
    """Subtract the M-weighted mean (projection onto {1}^perp)."""
    weights = mass_matvec(ops, np.ones(ops.n_dof))
    return values - (weights @ values) / weights.sum()


def lh_matvec(ops: WaveOperators, values: np.ndarray) -> np.ndarray:
    y = ops.stiffness @ values
    if ops.lumped:
        return y / ops.mass_diagonal
    x, _ = pcg(lambda v: ops.mass @ v, y, None, ops.mass.diagonal())
    return x


def apply_Lh(ops: WaveOperators, u: FieldVector) -> FieldVector:
    """M^-1 (A u)."""
    return u.with_values(lh_matvec(ops, u.values), u.time_stamp)


def lh_inverse(
    ops: WaveOperators,
    y: np.ndarray,
    guess: Optional[np.ndarray] = None,
    mode: SolverMode = SolverMode.DIRECT,
    n_iterations: int = 0,
) -> Tuple[np.ndarray, SolveReport]:
    """x = L_h^-1 y, i.e. A x = M y, by preconditioned CG from ``guess``."""
    if mode is SolverMode.CG_FIXED and n_iterations == 0:
        x = np.zeros(ops.n_dof) if guess is None else np.array(guess, dtype=float)
        return x, SolveReport(iterations=0, final_relative_residual=0.0, mode=mode, converged=False)

    periodic = ops.space.has_constant_kernel
    diag = preconditioner(ops)
    rhs_scale = None
    if periodic:
        rhs_scale = float(np.linalg.norm(mass_matvec(ops, y) / diag))
        y = remove_mean(ops, y)
    b = mass_matvec(ops, y)

    # Constant right-hand sides have the zero-mean solution 0
    if periodic and np.linalg.norm(b / diag) <= PROJECTION_FLOOR * rhs_scale:
        if guess is None:
            x = np.zeros(ops.n_dof)
        else:
            x = remove_mean(ops, np.array(guess, dtype=float))
        return x, SolveReport(iterations=0, final_relative_residual=0.0, mode=mode, converged=True)

    x, report = pcg(
        lambda v: ops.stiffness @ v,
        b,
        guess,
        diag,
        tol=DIRECT_TOLERANCE,
        maxiter=20 * max(ops.n_dof, 1),
        fixed_iterations=n_iterations if mode is SolverMode.CG_FIXED else None,
        rhs_scale=rhs_scale,
    )
    if periodic:
        x = remove_mean(ops, x)
    return x, report


def solve_Lh_inverse(
    ops: WaveOperators,
    rhs: FieldVector,
    guess: Optional[FieldVector] = None,
    mode: SolverMode = SolverMode.DIRECT,
    n_iterations: int = 0,
    stats: Optional[SolverStats] = None,
    ladder: str = "diagnostic",
) -> Tuple[FieldVector, SolveReport]:
    """Solve L_h x = rhs; periodic spaces return the zero-mean solution."""
    x, report = lh_inverse(
        ops,
        rhs.values,
        None if guess is None else guess.values,
        mode,
        n_iterations,
    )
    if stats is not None:
        stats.record_solve(ladder, report.iterations, space=ops.space.label, mode=mode.value)
    return rhs.with_values(x, rhs.time_stamp), report


def estimate_sigma_max(
    ops: WaveOperators,
    bound: Optional[SigmaBound] = None,
    tol: float = POWER_TOLERANCE,
    maxiter: int = POWER_MAX_ITERATIONS,
) -> float:
    """max_e lambda_max(M_e^-1 A_e) by batched power iteration.

    ``bound`` selects the element mass M_e: the consistent one, or the
    nodal-rule diagonal of lumped families. It defaults by mesh dimension.
    """
    bound = bound if bound is not None else default_sigma_bound(ops.space.mesh.dim)
    if ops.element_stiffness is None:
        raise SolverError("operators were assembled without per-element matrices")

    if bound is SigmaBound.LUMPED:
        if ops.element_mass is None:
            raise SolverError("operators carry no lumped element masses")
        scale = 1.0 / np.sqrt(ops.element_mass)
        S = ops.element_stiffness * scale[:, :, None] * scale[:, None, :]
    else:
        if ops.element_consistent_mass is None:
            raise SolverError("operators carry no consistent element masses")
        try:
            chol = np.linalg.cholesky(ops.element_consistent_mass)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"element mass matrix is not positive definite: {exc}") from exc
        inv_chol = np.linalg.inv(chol)
        S = np.einsum("eik,ekl,ejl->eij", inv_chol, ops.element_stiffness, inv_chol)
        S = 0.5 * (S + S.transpose(0, 2, 1))

    n_elements, n_local = S.shape[:2]
    x = np.random.default_rng(0).random((n_elements, n_local)) + 0.5
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    lam = np.zeros(n_elements)

    for iteration in range(1, maxiter + 1):
        y = np.einsum("eij,ej->ei", S, x)
        lam_new = np.einsum("ei,ei->e", x, y)
        norms = np.linalg.norm(y, axis=1, keepdims=True)
        x = y / np.maximum(norms, np.finfo(float).tiny)
        if np.all(np.abs(lam_new - lam) <= tol * np.abs(lam_new)):
            sigma = float(lam_new.max())
            logger.debug("sigma_max_estimated", sigma_max=sigma, bound=bound.value, iterations=iteration)
            return sigma
        lam = lam_new

    raise SolverError(f"power iteration did not settle within {maxiter} iterations")
