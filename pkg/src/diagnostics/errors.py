"""
Error Norms Module

Relative weighted L2 and energy errors against the exact solution, the
adapted negative-order norm and sampled error profiles.
"""

from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import structlog

from src.fem.assembly import evaluate_at_quadrature, interpolate, sample
from src.fem.mesh import element_geometry
from src.fem.quadrature import volume_quadrature
from src.models.fields import FieldVector, WaveOperators
from src.models.plans import SolverMode
from src.problems.catalog import ProblemSpec
from src.solvers.operators import lh_inverse, mass_inner


logger = structlog.get_logger(__name__)


def error_quadrature_degree(p: int) -> int:
    return 4 * p


def _exact_at(problem: ProblemSpec, x: np.ndarray, T: float, hints: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """u(T), du/dt(T) and grad u(T) at flattened points."""
    return (
        problem.u_exact(x, T, 0),
        problem.u_exact(x, T, 1),
        problem.grad_u(x, T, 0, hints),
    )


def error_norms(
    u_star: FieldVector,
    v_star: FieldVector,
    problem: ProblemSpec,
    T: float,
    quadrature_degree: Optional[int] = None,
) -> Tuple[float, float]:
    """(e0, eE) relative to the exact solution at T."""
    space = u_star.space
    mesh = space.mesh
    degree = quadrature_degree or 2 * space.element.degree
    rule = volume_quadrature(space.element.shape, min(degree, 12) if mesh.dim == 2 else degree)
    x, jac, det = element_geometry(mesh, rule.points)
    n_elements, n_q, dim = x.shape

    hints = np.repeat(mesh.centroids()[:, None, :], n_q, axis=1).reshape(-1, dim)
    flat = x.reshape(-1, dim)
    u_ex, v_ex, g_ex = _exact_at(problem, flat, T, hints)
    u_ex = u_ex.reshape(n_elements, n_q)
    v_ex = v_ex.reshape(n_elements, n_q)
    g_ex = g_ex.reshape(n_elements, n_q, dim)

    u_h, g_h = evaluate_at_quadrature(space, u_star.values, rule, jac)
    v_h, _ = evaluate_at_quadrature(space, v_star.values, rule, jac)

    weight = rule.weights[None, :] * det
    rho = sample(mesh, problem.rho, x)
    c = sample(mesh, problem.c, x)

    def weighted(values: np.ndarray, coefficient: np.ndarray) -> float:
        return float(np.sqrt(np.sum(weight * coefficient * values)))

    u_norm = weighted(u_ex ** 2, rho)
    e0 = weighted((u_ex - u_h) ** 2, rho) / u_norm if u_norm > 0.0 else float("nan")

    energy_ref = weighted(v_ex ** 2, rho) + weighted(np.sum(g_ex ** 2, axis=-1), c)
    energy_err = weighted((v_ex - v_h) ** 2, rho) + weighted(np.sum((g_ex - g_h) ** 2, axis=-1), c)
    eE = energy_err / energy_ref if energy_ref > 0.0 else float("nan")

    logger.debug("error_norms", e0=e0, eE=eE, quadrature_degree=rule.exactness_degree)
    return e0, eE


def adapted_negative_norm(
    e: FieldVector,
    m: int,
    ops: WaveOperators,
    mode: SolverMode = SolverMode.DIRECT,
) -> float:
    """||L^-a e||_0 for m = 2a, the H1 norm of L^-a e for m = 2a - 1."""
    if m < 1:
        raise ValueError(f"negative norm order must be >= 1, got {m}")
    x = e.values
    for _ in range((m + 1) // 2):
        x, _ = lh_inverse(ops, x, None, mode)
    mass = mass_inner(ops, x, x)
    if m % 2 == 0:
        return float(np.sqrt(max(mass, 0.0)))
    energy = float(x @ (ops.stiffness @ x))
    return float(np.sqrt(max(mass + energy, 0.0)))


def relative_negative_norm_error(
    u_star: FieldVector,
    problem: ProblemSpec,
    T: float,
    m: int,
    ops: WaveOperators,
    mode: SolverMode = SolverMode.DIRECT,
) -> float:
    """Adapted order-m negative norm of I_h u(T) - u_star, relative to that of I_h u(T)."""
    exact = interpolate(u_star.space, lambda x, hints: problem.u_exact(x, T, 0), T)
    reference = adapted_negative_norm(exact, m, ops, mode)
    if reference == 0.0:
        return float("nan")
    error = exact.with_values(exact.values - u_star.values, T)
    value = adapted_negative_norm(error, m, ops, mode) / reference
    logger.debug("negative_norm_error", m=m, value=value)
    return value


def sample_error_profile(
    problem: ProblemSpec,
    T: float,
    unprocessed: FieldVector,
    processed: FieldVector,
    path: Union[str, Path],
    points_per_element: int = 8,
) -> int:
    """Write x[,y],err_unprocessed,err_processed rows; returns the row count."""
    mesh = processed.space.mesh
    if mesh.dim == 1:
        ref = np.linspace(0.0, 1.0, points_per_element + 1).reshape(-1, 1)
        header = "x,err_unprocessed,err_processed"
    else:
        s = np.linspace(0.0, 1.0, points_per_element + 1)
        ref = np.array([(a, b) for a in s for b in s if a + b <= 1.0 + 1e-12])
        header = "x,y,err_unprocessed,err_processed"

    x, _, _ = element_geometry(mesh, ref)
    n_elements, n_q, dim = x.shape
    flat = x.reshape(-1, dim)
    exact = problem.u_exact(flat, T, 0).reshape(n_elements, n_q)

    columns = [flat]
    for field in (unprocessed, processed):
        phi = field.space.element.basis.values(ref)
        values = np.einsum("qi,ei->eq", phi, field.space.local_values(field.values))
        columns.append((exact - values).reshape(-1, 1))

    rows = np.hstack(columns)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(target, rows, delimiter=",", header=header, comments="", fmt="%.17g")
    logger.info("error_profile_written", path=str(target), rows=rows.shape[0])
    return rows.shape[0]
