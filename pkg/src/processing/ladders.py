"""
Processing Ladders Module

q-step pre-processing of the initial data and post-processing of the final
state. Both walk the recursion d^{k+2}u = -L d^k u + d^k f downwards with
L^-1 solves: pre-processing in the time-stepping space from exact seeds at
t = 0, post-processing in a higher-degree space from prolonged discrete
derivatives at t = T.
"""

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict
from scipy import sparse

from src.fem.assembly import SpatialFunction, interpolate, project_weighted_l2
from src.models.fields import DiscreteSpace, FieldVector, WaveOperators
from src.models.plans import ProcessingPlan, SeedProjection, processing_counts
from src.models.reports import LadderCheckReport
from src.problems.catalog import ProblemId, ProblemSpec
from src.solvers.operators import lh_inverse
from src.timestepping.dablain import SourceTerms, time_derivative_ladder
from src.utils.observability import SolverStats


logger = structlog.get_logger(__name__)

FD_STEP = 1e-3
FD_MARGIN = 1e-2
LADDER_TOLERANCE = 1e-8


class InitialData(BaseModel):
    """Analytic time derivatives d^k u(., t0) used as ladder seeds."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    derivative: Callable[[np.ndarray, float, int], np.ndarray]
    rho: Optional[SpatialFunction] = None
    t0: float = 0.0

    @classmethod
    def from_problem(cls, problem: ProblemSpec, t0: float = 0.0) -> "InitialData":
        return cls(derivative=problem.u_exact, rho=problem.rho, t0=t0)

    def function(self, k: int) -> SpatialFunction:
        """d^k u(., t0) as a spatial function."""
        def evaluate(x: np.ndarray, hint: np.ndarray) -> np.ndarray:
            return self.derivative(x, self.t0, k)
        return evaluate


def _ladder_name(stage: str, k: int) -> str:
    return f"{stage}_{'u' if k % 2 == 0 else 'v'}"


def _seed(data: InitialData, k: int, space: DiscreteSpace, projection: SeedProjection) -> np.ndarray:
    if projection is SeedProjection.CONSISTENT and data.rho is not None:
        return project_weighted_l2(space, data.function(k), data.rho).values
    return interpolate(space, data.function(k)).values


def _descend(
    ops: WaveOperators,
    top: Dict[int, np.ndarray],
    q: int,
    source: SourceTerms,
    t: float,
    guess: Callable[[int], Optional[np.ndarray]],
    plan: ProcessingPlan,
    stats: Optional[SolverStats],
    stage: str,
) -> Dict[int, np.ndarray]:
    """Rungs q-1, ..., 0 from rungs q and q+1, holding two rungs at a time."""
    rungs = dict(top)
    for k in range(q - 1, -1, -1):
        rhs = -rungs.pop(k + 2)
        f = source.values(t, k)
        if f is not None:
            rhs = rhs + f
        x, report = lh_inverse(ops, rhs, guess(k), plan.solver_mode, plan.cg_iterations)
        if stats is not None:
            stats.record_solve(
                _ladder_name(stage, k),
                report.iterations,
                space=ops.space.label,
                mode=plan.solver_mode.value,
            )
        rungs[k] = x
    return rungs


def preprocess_initial(
    data: InitialData,
    plan: ProcessingPlan,
    space: DiscreteSpace,
    ops: WaveOperators,
    source: Optional[SourceTerms] = None,
    stats: Optional[SolverStats] = None,
) -> Tuple[FieldVector, FieldVector]:
    """(u0h, v0h) whose q-th and (q+1)-th discrete derivatives match the exact ones."""
    source = source or SourceTerms(space)
    q = plan.q
    projection = plan.seed_projection
    if q == 0:
        return (
            FieldVector(values=_seed(data, 0, space, projection), space=space, time_stamp=data.t0),
            FieldVector(values=_seed(data, 1, space, projection), space=space, time_stamp=data.t0),
        )

    top = {q: _seed(data, q, space, projection), q + 1: _seed(data, q + 1, space, projection)}
    # guesses use nodal values of the exact derivatives
    rungs = _descend(
        ops,
        top,
        q,
        source,
        data.t0,
        lambda k: interpolate(space, data.function(k)).values,
        plan,
        stats,
        "pre",
    )
    alpha, beta = processing_counts(q)
    logger.debug("preprocessed", q=q, alpha=alpha, beta=beta, n_dof=space.n_dof)
    return (
        FieldVector(values=rungs[0], space=space, time_stamp=data.t0),
        FieldVector(values=rungs[1], space=space, time_stamp=data.t0),
    )


def postprocess_final(
    u_T: FieldVector,
    v_T: FieldVector,
    plan: ProcessingPlan,
    ops_low: WaveOperators,
    ops_high: WaveOperators,
    prolongation: sparse.spmatrix,
    source_low: Optional[SourceTerms] = None,
    source_high: Optional[SourceTerms] = None,
    stats: Optional[SolverStats] = None,
) -> Tuple[FieldVector, FieldVector]:
    """(u*, v*) in the high space from the final low-space state."""
    space_high = ops_high.space
    source_low = source_low or SourceTerms(ops_low.space)
    source_high = source_high or SourceTerms(space_high)
    t = u_T.time_stamp or 0.0
    q = plan.q

    if q == 0:
        return (
            FieldVector(values=prolongation @ u_T.values, space=space_high, time_stamp=t),
            FieldVector(values=prolongation @ v_T.values, space=space_high, time_stamp=t),
        )

    low = time_derivative_ladder(ops_low, u_T, source_low, t, q + 1, v=v_T)
    top = {q: prolongation @ low[q].values, q + 1: prolongation @ low[q + 1].values}
    rungs = _descend(
        ops_high,
        top,
        q,
        source_high,
        t,
        lambda k: prolongation @ low[k].values,
        plan,
        stats,
        "post",
    )
    logger.debug("postprocessed", q=q, n_dof_high=space_high.n_dof, t=t)
    return (
        FieldVector(values=rungs[0], space=space_high, time_stamp=t),
        FieldVector(values=rungs[1], space=space_high, time_stamp=t),
    )


def processing_counts_table(q_max: int = 10) -> List[Tuple[int, int, int]]:
    """Rows (q, alpha, beta) for q = 0..q_max."""
    return [(q, *processing_counts(q)) for q in range(q_max + 1)]


# ============================================================================
# Analytic ladder check
# ============================================================================

def _sample_points(problem: ProblemSpec, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Points at least FD_MARGIN away from boundaries and material interfaces."""
    if problem.id is ProblemId.PERIODIC_1D:
        left = rng.uniform(FD_MARGIN, 1.0 - FD_MARGIN, n_samples // 2)
        right = rng.uniform(1.0 + FD_MARGIN, 5.0 - FD_MARGIN, n_samples - n_samples // 2)
        return np.concatenate([left, right]).reshape(-1, 1)
    if problem.id is ProblemId.SQUARE_2D:
        return rng.uniform(FD_MARGIN, 1.0 - FD_MARGIN, (n_samples, 2))
    r = np.sqrt(rng.uniform(0.0, (1.0 - FD_MARGIN) ** 2, n_samples))
    theta = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _operator_L(problem: ProblemSpec, x: np.ndarray, t: float, k: int, h: float) -> np.ndarray:
    """-rho^-1 div(c grad d^k u) by fourth-order differences of the analytic flux."""
    hint = x
    divergence = np.zeros(x.shape[0])
    weights = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))
    for axis in range(problem.dim):
        for shift, w in weights:
            y = x.copy()
            y[:, axis] += shift * h
            flux = problem.c(y, hint) * problem.grad_u(y, t, k, hint)[:, axis]
            divergence += w * flux / h
    return -divergence / problem.rho(x, hint)


def exact_derivative_ladder_check(
    problem: ProblemSpec,
    q: int,
    n_samples: int = 64,
    seed: int = 0,
    tolerance: float = LADDER_TOLERANCE,
    t: float = 0.3,
) -> LadderCheckReport:
    """Verify the analytic derivative family against the continuous recursion."""
    rng = np.random.default_rng(seed)
    x = _sample_points(problem, n_samples, rng)
    residuals: List[float] = []
    for k in range(q + 1):
        lhs = problem.u_exact(x, t, k + 2)
        rhs = -_operator_L(problem, x, t, k, FD_STEP) + problem.source_derivative(x, t, k)
        scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))), np.finfo(float).tiny)
        residuals.append(float(np.max(np.abs(lhs - rhs)) / scale))

    report = LadderCheckReport(
        problem=problem.id.value,
        max_order=q,
        residuals=residuals,
        tolerance=tolerance,
        n_samples=n_samples,
    )
    if not report.passed:
        logger.warning(
            "ladder_check_failed",
            problem=problem.id.value,
            max_residual=report.max_residual,
        )
    return report
