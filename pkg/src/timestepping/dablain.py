"""
Dablain Time Stepping Module

Order-2p explicit time integration of M u'' + A u = M f with the
stability-bounded step size, the Taylor first step and the order-2p
velocity reconstruction at the final time.
"""

from math import ceil, factorial, sqrt
from typing import List, Optional, Tuple

import numpy as np
import structlog

from src.models.fields import DiscreteSpace, FieldVector, WaveOperators
from src.models.plans import (
    STABILITY_CONSTANTS,
    EnergySample,
    RunResult,
    SigmaBound,
    TimestepPlan,
    WaveState,
    default_sigma_bound,
)
from src.problems.catalog import ProblemSpec
from src.solvers.operators import estimate_sigma_max, lh_matvec, mass_inner
from src.utils.errors import InstabilityError
from src.utils.observability import TIME_STEPS


logger = structlog.get_logger(__name__)

DEFAULT_SAFETY = 0.9
# Amplitude growth (relative to the start) treated as a blow-up
GROWTH_LIMIT = 1e8


# ============================================================================
# Sources
# ============================================================================

class SourceTerms:
    """Nodal values of the source time derivatives in one space."""

    def __init__(self, space: DiscreteSpace, problem: Optional[ProblemSpec] = None):
        self.space = space
        self.problem = problem if problem is not None and problem.has_source else None

    @property
    def active(self) -> bool:
        return self.problem is not None

    def values(self, t: float, k: int) -> Optional[np.ndarray]:
        """d^k f/dt^k at the nodes, or None without a source."""
        if self.problem is None:
            return None
        return np.asarray(self.problem.source_derivative(self.space.node_coords, t, k), dtype=float)

    def field(self, t: float, k: int) -> FieldVector:
        values = self.values(t, k)
        if values is None:
            values = np.zeros(self.space.n_dof)
        return FieldVector(values=values, space=self.space, time_stamp=t)


def no_source(space: DiscreteSpace) -> SourceTerms:
    return SourceTerms(space, None)


# ============================================================================
# Plan
# ============================================================================

def make_plan(
    ops: WaveOperators,
    p: int,
    T: float,
    safety: float = DEFAULT_SAFETY,
    sigma_max: Optional[float] = None,
    bound: Optional[SigmaBound] = None,
) -> TimestepPlan:
    """dt_max = sqrt(c_p / sigma), N_T = ceil(T / (safety dt_max)), dt = T / N_T."""
    bound = bound if bound is not None else default_sigma_bound(ops.space.mesh.dim)
    sigma = sigma_max if sigma_max is not None else estimate_sigma_max(ops, bound)
    dt_max = sqrt(STABILITY_CONSTANTS[p] / sigma)
    if T <= 0.0:
        n_steps, dt = 0, 0.0
    else:
        n_steps = max(1, ceil(T / (safety * dt_max)))
        dt = T / n_steps

    plan = TimestepPlan(
        p=p, T=T, dt=dt, dt_max=dt_max, safety=safety, n_steps=n_steps, sigma_max=sigma, sigma_bound=bound
    )
    logger.info(
        "timestep_plan", p=p, T=T, dt=dt, dt_max=dt_max, n_steps=n_steps, sigma_max=sigma, bound=bound.value
    )
    return plan


# ============================================================================
# Derivative ladder
# ============================================================================

def climb(
    ops: WaveOperators,
    start: Optional[np.ndarray],
    source: SourceTerms,
    t: float,
    k_start: int,
    count: int,
) -> List[np.ndarray]:
    """Rungs k_start + 2, k_start + 4, ... (``count`` of them) from rung k_start."""
    rungs: List[np.ndarray] = []
    rung = start
    k = k_start
    for _ in range(count):
        rung = -lh_matvec(ops, rung)
        f = source.values(t, k)
        if f is not None:
            rung = rung + f
        rungs.append(rung)
        k += 2
    return rungs


def time_derivative_ladder(
    ops: WaveOperators,
    u: FieldVector,
    source: SourceTerms,
    t: float,
    k_max: int,
    v: Optional[FieldVector] = None,
) -> List[Optional[FieldVector]]:
    """Rungs 0..k_max of r_{k+2} = -L_h r_k + d^k f/dt^k.

    Odd rungs are None unless the velocity ``v`` seeds rung 1.
    """
    rungs: List[Optional[FieldVector]] = [None] * (k_max + 1)
    for parity, seed in ((0, u), (1, v)):
        if seed is None or parity > k_max:
            continue
        rungs[parity] = seed
        count = (k_max - parity) // 2
        for i, values in enumerate(climb(ops, seed.values, source, t, parity, count)):
            rungs[parity + 2 * (i + 1)] = seed.with_values(values, t)
    return rungs


# ============================================================================
# Steps
# ============================================================================

def _even_update(ops: WaveOperators, u: np.ndarray, source: SourceTerms, t: float, p: int, dt: float) -> np.ndarray:
    """sum_{a=1}^{p} dt^{2a}/(2a)! r_{2a}."""
    total = np.zeros_like(u)
    for a, rung in enumerate(climb(ops, u, source, t, 0, p), start=1):
        total += dt ** (2 * a) / factorial(2 * a) * rung
    return total


def _step_values(
    ops: WaveOperators,
    u_prev: np.ndarray,
    u_curr: np.ndarray,
    source: SourceTerms,
    t: float,
    p: int,
    dt: float,
) -> np.ndarray:
    return -u_prev + 2.0 * u_curr + 2.0 * _even_update(ops, u_curr, source, t, p, dt)


def _first_values(
    ops: WaveOperators,
    u0: np.ndarray,
    v0: np.ndarray,
    source: SourceTerms,
    p: int,
    dt: float,
) -> np.ndarray:
    u1 = u0 + dt * v0 + _even_update(ops, u0, source, 0.0, p, dt)
    for a, rung in enumerate(climb(ops, v0, source, 0.0, 1, p), start=1):
        u1 += dt ** (2 * a + 1) / factorial(2 * a + 1) * rung
    return u1


def dablain_step(state: WaveState, ops: WaveOperators, source: SourceTerms, plan: TimestepPlan) -> WaveState:
    """u^{n+1} = -u^{n-1} + 2u^n + 2 sum_a dt^{2a}/(2a)! r_{2a}(u^n)."""
    if state.n < 1:
        raise ValueError("dablain_step needs two previous iterates (n >= 1)")
    u_next = _step_values(ops, state.u_prev.values, state.u_curr.values, source, state.t, plan.p, plan.dt)
    if not np.all(np.isfinite(u_next)):
        raise InstabilityError(state.n + 1)
    t_next = (state.n + 1) * plan.dt
    return WaveState(
        u_prev=state.u_curr,
        u_curr=state.u_curr.with_values(u_next, t_next),
        n=state.n + 1,
        t=t_next,
    )


def first_step(
    u0: FieldVector,
    v0: FieldVector,
    ops: WaveOperators,
    source: SourceTerms,
    plan: TimestepPlan,
) -> WaveState:
    """Taylor start to order 2p + 1: even rungs from u0, odd rungs from v0."""
    u1 = _first_values(ops, u0.values, v0.values, source, plan.p, plan.dt)
    if not np.all(np.isfinite(u1)):
        raise InstabilityError(1)
    return WaveState(
        u_prev=u0.with_values(u0.values, 0.0),
        u_curr=u0.with_values(u1, plan.dt),
        n=1,
        t=plan.dt,
    )


# ============================================================================
# Velocity
# ============================================================================

def _velocity_values(
    ops: WaveOperators,
    u_next: np.ndarray,
    u_prev: np.ndarray,
    source: SourceTerms,
    t: float,
    dt: float,
    order: int,
) -> np.ndarray:
    v2 = (u_next - u_prev) / (2.0 * dt)
    if order == 2:
        return v2

    L_v2 = lh_matvec(ops, v2)
    f1 = source.values(t, 1)
    v4 = v2 + dt ** 2 / 6.0 * (L_v2 if f1 is None else L_v2 - f1)
    if order == 4:
        return v4

    LL_v2 = lh_matvec(ops, L_v2)
    correction = 7.0 / 360.0 * LL_v2
    if f1 is not None:
        correction -= 7.0 / 360.0 * lh_matvec(ops, f1) + source.values(t, 3) / 120.0
    return v4 + dt ** 4 * correction


def reconstruct_velocity(
    u_next: FieldVector,
    u_prev: FieldVector,
    ops: WaveOperators,
    source: SourceTerms,
    plan: TimestepPlan,
    order: int,
    t: Optional[float] = None,
) -> FieldVector:
    """Order-2, 4 or 6 velocity at t_n from u^{n+1} and u^{n-1}."""
    if order not in (2, 4, 6):
        raise ValueError(f"velocity order must be 2, 4 or 6, got {order}")
    if order > 2 * plan.p:
        raise ValueError(f"velocity order {order} exceeds the scheme order {2 * plan.p}")
    t = plan.T if t is None else t
    values = _velocity_values(ops, u_next.values, u_prev.values, source, t, plan.dt, order)
    return u_next.with_values(values, t)


# ============================================================================
# Time loop
# ============================================================================

def discrete_energy(ops: WaveOperators, u: np.ndarray, v: np.ndarray) -> float:
    """1/2 v^T M v + 1/2 u^T A u."""
    return 0.5 * mass_inner(ops, v, v) + 0.5 * float(u @ (ops.stiffness @ u))


def run(
    u0: FieldVector,
    v0: FieldVector,
    ops: WaveOperators,
    source: SourceTerms,
    plan: TimestepPlan,
    trace_every: Optional[int] = None,
) -> RunResult:
    """First step, then N_T Dablain steps (one past T for the velocity)."""
    if plan.n_steps == 0:
        return RunResult(u_T=u0, v_T=v0, n_steps=0)

    p, dt, n_steps = plan.p, plan.dt, plan.n_steps
    trace: List[EnergySample] = []
    if trace_every:
        trace.append(EnergySample(step=0, time=0.0, energy=discrete_energy(ops, u0.values, v0.values)))

    u_prev = u0.values
    u_curr = _first_values(ops, u0.values, v0.values, source, p, dt)
    scale = max(float(np.max(np.abs(u_prev), initial=0.0)), float(np.max(np.abs(u_curr), initial=0.0)), 1.0)
    limit = GROWTH_LIMIT * scale
    u_older = u_prev

    for n in range(1, n_steps + 1):
        u_next = _step_values(ops, u_prev, u_curr, source, n * dt, p, dt)
        peak = float(np.max(np.abs(u_next), initial=0.0))
        if not np.isfinite(peak) or peak > limit:
            logger.error("time_loop_unstable", step=n + 1, peak=peak, dt=dt)
            raise InstabilityError(n + 1)
        if trace_every and n % trace_every == 0:
            v = (u_next - u_prev) / (2.0 * dt)
            trace.append(EnergySample(step=n, time=n * dt, energy=discrete_energy(ops, u_curr, v)))
        u_older, u_prev, u_curr = u_prev, u_curr, u_next

    TIME_STEPS.inc(n_steps + 1)
    # u_older, u_prev, u_curr = u^{N_T - 1}, u^{N_T}, u^{N_T + 1}
    T = plan.T
    v_values = _velocity_values(ops, u_curr, u_older, source, T, dt, 2 * p)

    logger.info("time_loop_finished", n_steps=n_steps, dt=dt, T=T, p=p)
    return RunResult(
        u_T=u0.with_values(u_prev, T),
        v_T=v0.with_values(v_values, T),
        n_steps=n_steps,
        trace=trace,
    )


def run_states(
    u0: FieldVector,
    v0: FieldVector,
    ops: WaveOperators,
    source: SourceTerms,
    plan: TimestepPlan,
    n_steps: int,
) -> Tuple[WaveState, ...]:
    """States n = 1..n_steps through the public step API."""
    state = first_step(u0, v0, ops, source, plan)
    states = [state]
    for _ in range(n_steps - 1):
        state = dablain_step(state, ops, source, plan)
        states.append(state)
    return tuple(states)
