"""
Solver Pipeline Module

Staged orchestration of one run (mesh -> assembly -> pre-processing ->
time loop -> post-processing -> errors), convergence sweeps over nested
refinements and the fixed-iteration CG study.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from src.diagnostics.errors import (
    error_norms,
    error_quadrature_degree,
    relative_negative_norm_error,
    sample_error_profile,
)
from src.diagnostics.tables import convergence_table, write_report
from src.fem.assembly import assemble_operators, build_prolongation, build_space
from src.fem.mesh import generate_disk_mesh, generate_interval_mesh, generate_square_mesh
from src.fem.mesh_io import write_mesh
from src.fem.reference_elements import build_reference_element
from src.models.config import RunConfig, SolverChoice
from src.models.element import ElementFamily, ElementShape, ReferenceElement
from src.models.fields import FieldVector, WaveOperators
from src.models.mesh import Mesh
from src.models.plans import ProcessingPlan, RunResult, TimestepPlan
from src.models.reports import ConvergenceTable, ErrorReport
from src.problems.catalog import ProblemId, ProblemSpec, get_problem, with_final_time
from src.processing.ladders import InitialData, postprocess_final, preprocess_initial
from src.timestepping.dablain import SourceTerms, make_plan, run
from src.utils.errors import ConfigError
from src.utils.observability import SolverStats, trace_stage
from src.utils.settings import get_settings


logger = structlog.get_logger(__name__)


class RunStatus(str, Enum):
    """Progress of a pipeline run."""
    PENDING = "pending"
    MESHED = "meshed"
    ASSEMBLED = "assembled"
    PREPROCESSED = "preprocessed"
    STEPPED = "stepped"
    POSTPROCESSED = "postprocessed"
    COMPLETED = "completed"


class PipelineState(BaseModel):
    """Intermediate products shared between stages."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: RunConfig
    problem: ProblemSpec
    status: RunStatus = RunStatus.PENDING
    mesh: Optional[Mesh] = None
    ops_low: Optional[WaveOperators] = None
    ops_high: Optional[WaveOperators] = None
    prolongation: Optional[Any] = None
    timestep: Optional[TimestepPlan] = None
    u0: Optional[FieldVector] = None
    v0: Optional[FieldVector] = None
    result: Optional[RunResult] = None
    u_star: Optional[FieldVector] = None
    v_star: Optional[FieldVector] = None


def low_element(problem: ProblemSpec, p: int) -> ReferenceElement:
    """Degree-p element of the time loop: GLL in 1D, mass-lumped triangle in 2D."""
    if problem.dim == 1:
        return build_reference_element(ElementShape.INTERVAL, ElementFamily.SPECTRAL_GLL, p)
    return build_reference_element(ElementShape.TRIANGLE, ElementFamily.LUMPED_TRIANGLE, p)


def high_element(problem: ProblemSpec, degree: int) -> ReferenceElement:
    """Post-processing element: GLL in 1D, plain lagrange triangle in 2D."""
    if problem.dim == 1:
        return build_reference_element(ElementShape.INTERVAL, ElementFamily.SPECTRAL_GLL, degree)
    return build_reference_element(ElementShape.TRIANGLE, ElementFamily.LAGRANGE, degree)


def build_mesh(config: RunConfig) -> Mesh:
    refinement = config.refinement
    if refinement is None:
        raise ConfigError(f"{config.problem.value} run needs {'N' if config.is_1d else 'level'}")
    if config.problem is ProblemId.PERIODIC_1D:
        return generate_interval_mesh(refinement)
    if config.problem is ProblemId.SQUARE_2D:
        return generate_square_mesh(refinement, seed=config.seed)
    return generate_disk_mesh(refinement, map_degree=max(2, 2 * config.p))


class SolverPipeline:
    """
    Runs the stages of one experiment in order:

    MESH -> ASSEMBLY -> PREPROCESS -> TIMESTEP -> POSTPROCESS -> ERRORS

    Failures inside a stage surface as StageError naming the stage.
    """

    def __init__(self, config: RunConfig, stats: Optional[SolverStats] = None):
        self.config = config
        self.plan: ProcessingPlan = config.processing_plan()
        self.stats = stats or SolverStats(run_name=f"{config.problem.value}-p{config.p}-q{config.q}")
        problem = get_problem(config.problem.value)
        if config.final_time is not None:
            problem = with_final_time(problem, config.final_time)
        self.state = PipelineState(config=config, problem=problem)

    def run(self) -> ErrorReport:
        start = time.perf_counter()
        state = self.state
        self._mesh_stage(state)
        self._assembly_stage(state)
        self._preprocess_stage(state)
        self._timestep_stage(state)
        self._postprocess_stage(state)
        e0, eE, e_neg = self._errors_stage(state)
        state.status = RunStatus.COMPLETED

        report = ErrorReport(
            problem=self.config.problem.value,
            p=self.config.p,
            q=self.config.q,
            level=self.config.level,
            N=self.config.N,
            n_dof=state.ops_low.n_dof,
            n_dof_high=state.ops_high.n_dof,
            n_steps=state.timestep.n_steps,
            dt=state.timestep.dt,
            e0=e0,
            eE=eE,
            e_neg=e_neg,
            negative_norm_order=self.config.negative_norm,
            wall_time=time.perf_counter() - start,
            solver_mode=self.plan.solver_mode.value,
            cg_iterations=self.plan.cg_iterations,
            solver_stats=self.stats.get_stats(),
        )
        logger.info(
            "run_completed",
            problem=report.problem,
            p=report.p,
            q=report.q,
            refinement=report.refinement,
            n_steps=report.n_steps,
            e0=e0,
            eE=eE,
            wall_time=report.wall_time,
        )
        return report

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    @trace_stage("mesh")
    def _mesh_stage(self, state: PipelineState) -> None:
        state.mesh = build_mesh(self.config)
        if self.config.mesh_out is not None:
            write_mesh(state.mesh, self.config.mesh_out)
        state.status = RunStatus.MESHED

    @trace_stage("assembly")
    def _assembly_stage(self, state: PipelineState) -> None:
        problem, p = state.problem, self.config.p
        space_low = build_space(state.mesh, low_element(problem, p), label="low")
        space_high = build_space(state.mesh, high_element(problem, self.plan.post_degree), label="high")
        state.ops_low = assemble_operators(
            space_low, problem.rho, problem.c, coefficients_vary=problem.coefficients_vary
        )
        state.ops_high = assemble_operators(
            space_high, problem.rho, problem.c, coefficients_vary=problem.coefficients_vary
        )
        state.prolongation = build_prolongation(space_low, space_high)
        state.timestep = make_plan(
            state.ops_low, p, problem.T, self.config.safety, bound=self.config.sigma_bound
        )
        state.status = RunStatus.ASSEMBLED

    @trace_stage("preprocess")
    def _preprocess_stage(self, state: PipelineState) -> None:
        space = state.ops_low.space
        state.u0, state.v0 = preprocess_initial(
            InitialData.from_problem(state.problem),
            self.plan,
            space,
            state.ops_low,
            SourceTerms(space, state.problem),
            self.stats,
        )
        state.status = RunStatus.PREPROCESSED

    @trace_stage("timestep")
    def _timestep_stage(self, state: PipelineState) -> None:
        trace_every = self.config.trace_every if self.config.trace else None
        state.result = run(
            state.u0,
            state.v0,
            state.ops_low,
            SourceTerms(state.ops_low.space, state.problem),
            state.timestep,
            trace_every=trace_every,
        )
        if self.config.trace:
            self._write_trace(state.result)
        state.status = RunStatus.STEPPED

    @trace_stage("postprocess")
    def _postprocess_stage(self, state: PipelineState) -> None:
        state.u_star, state.v_star = postprocess_final(
            state.result.u_T,
            state.result.v_T,
            self.plan,
            state.ops_low,
            state.ops_high,
            state.prolongation,
            SourceTerms(state.ops_low.space, state.problem),
            SourceTerms(state.ops_high.space, state.problem),
            self.stats,
        )
        state.status = RunStatus.POSTPROCESSED

    @trace_stage("errors")
    def _errors_stage(self, state: PipelineState) -> tuple:
        T = state.problem.T
        e0, eE = error_norms(
            state.u_star,
            state.v_star,
            state.problem,
            T,
            quadrature_degree=error_quadrature_degree(self.config.p),
        )
        if self.config.profile_out is not None:
            sample_error_profile(
                state.problem,
                T,
                state.result.u_T,
                state.u_star,
                self.config.profile_out,
            )
        e_neg = None
        if self.config.negative_norm is not None:
            e_neg = relative_negative_norm_error(
                state.u_star, state.problem, T, self.config.negative_norm, state.ops_high
            )
        return e0, eE, e_neg

    def _write_trace(self, result: RunResult) -> None:
        target = self.config.trace_out
        if target is None and self.config.out is not None:
            target = Path(self.config.out).with_suffix(".trace.csv")
        if target is None:
            for sample in result.trace:
                logger.info("energy_sample", step=sample.step, time=sample.time, energy=sample.energy)
            return
        target.parent.mkdir(parents=True, exist_ok=True)
        lines = ["step,time,energy"]
        lines += [f"{s.step},{s.time:.17g},{s.energy:.17g}" for s in result.trace]
        target.write_text("\n".join(lines) + "\n")
        logger.info("trace_written", path=str(target), samples=len(result.trace))


# ============================================================================
# Public entry points
# ============================================================================

def run_single(config: RunConfig, stats: Optional[SolverStats] = None) -> ErrorReport:
    """Run the whole pipeline for one refinement."""
    return SolverPipeline(config, stats).run()


def _run_level(config: RunConfig) -> ErrorReport:
    return run_single(config)


def run_sweep(config: RunConfig, levels: Sequence[int], write: bool = True) -> ConvergenceTable:
    """Run each refinement level and tabulate ratio / order."""
    if len(levels) < 2:
        raise ConfigError("a sweep needs at least two refinement levels")
    configs = [config.with_refinement(level) for level in sorted(levels)]
    threads = min(get_settings().threads, len(configs))

    logger.info(
        "sweep_started",
        problem=config.problem.value,
        p=config.p,
        q=config.q,
        levels=list(sorted(levels)),
        threads=threads,
    )
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(_run_level, configs))
    else:
        reports = [_run_level(c) for c in configs]

    table = convergence_table(reports)
    if write and config.out is not None:
        write_report(table, config.format, config.out)
    return table


def run_iteration_study(config: RunConfig, iterations: Sequence[int]) -> List[ErrorReport]:
    """One report per fixed CG budget, followed by the direct-surrogate run."""
    reports = []
    for n_it in iterations:
        cg = config.model_copy(update={"solver": SolverChoice.CG, "cg_iterations": n_it})
        reports.append(run_single(cg))
    direct = config.model_copy(update={"solver": SolverChoice.DIRECT, "cg_iterations": 0})
    reports.append(run_single(direct))
    logger.info(
        "iteration_study_finished",
        iterations=list(iterations),
        errors=[r.eE for r in reports],
    )
    return reports


def target_order(p: int, q: int) -> int:
    """Energy-norm order expected with order-q processing: p + min(p, q)."""
    return p + min(p, q)


def assert_orders(table: ConvergenceTable, tolerance: float = 0.5) -> List[str]:
    """Violations of observed eE order >= target - tolerance on the finest ratio."""
    if not table.rows:
        return []
    report = table.rows[0].report
    target = target_order(report.p, report.q)
    order = table.final_order("eE")
    if order is None or not np.isfinite(order) or order < target - tolerance:
        return [
            f"{report.problem} p={report.p} q={report.q}: observed order "
            f"{order if order is not None else 'n/a'} below target {target} - {tolerance}"
        ]
    return []

