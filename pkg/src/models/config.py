"""
Run Configuration Models

Validated parameters of a single run or sweep template.
"""

from enum import Enum
from pathlib import Path
from typing import Optional

import structlog
from pydantic import BaseModel, Field, field_validator, model_validator

from src.models.plans import ProcessingPlan, SeedProjection, SigmaBound, SolverMode
from src.problems.catalog import ProblemId


logger = structlog.get_logger(__name__)


class SolverChoice(str, Enum):
    DIRECT = "direct"
    CG = "cg"


class RunConfig(BaseModel):
    """One run: problem, degrees, refinement, solver and output options."""
    problem: ProblemId = ProblemId.PERIODIC_1D
    p: int = Field(default=1, ge=1, le=3)
    q: int = Field(default=0, ge=0)
    level: Optional[int] = Field(default=None, ge=1)
    N: Optional[int] = Field(default=None, ge=1)
    solver: SolverChoice = SolverChoice.DIRECT
    cg_iterations: int = Field(default=0, ge=0)
    safety: float = 0.9
    post_degree: Optional[int] = None
    seed_projection: SeedProjection = SeedProjection.NODAL
    sigma_bound: Optional[SigmaBound] = None
    negative_norm: Optional[int] = Field(default=None, ge=1)
    final_time: Optional[float] = Field(default=None, gt=0.0)
    seed: int = 0

    out: Optional[Path] = None
    format: str = "csv"
    trace: bool = False
    trace_every: int = Field(default=100, ge=1)
    trace_out: Optional[Path] = None
    profile_out: Optional[Path] = None
    mesh_out: Optional[Path] = None

    @field_validator("safety")
    @classmethod
    def _check_safety(cls, value: float) -> float:
        if not 0.0 < value <= 1.5:
            raise ValueError(f"safety must lie in (0, 1.5], got {value}")
        return value

    @field_validator("format")
    @classmethod
    def _check_format(cls, value: str) -> str:
        value = value.lower()
        if value not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {value}")
        return value

    @model_validator(mode="after")
    def _check_refinement(self) -> "RunConfig":
        if self.level is not None and self.N is not None:
            raise ValueError("give either level or N, not both")
        if self.is_1d and self.level is not None:
            raise ValueError(f"{self.problem.value} is refined with N, not level")
        if not self.is_1d and self.N is not None:
            raise ValueError(f"{self.problem.value} is refined with level, not N")
        # post_degree bounds live on ProcessingPlan
        self.processing_plan()
        if self.q > 2 * self.p:
            logger.warning("q_exceeds_rate_cap", q=self.q, p=self.p, cap=2 * self.p)
        return self

    @property
    def is_1d(self) -> bool:
        return self.problem is ProblemId.PERIODIC_1D

    @property
    def refinement(self) -> Optional[int]:
        return self.N if self.is_1d else self.level

    @property
    def solver_mode(self) -> SolverMode:
        return SolverMode.CG_FIXED if self.solver is SolverChoice.CG else SolverMode.DIRECT

    def processing_plan(self) -> ProcessingPlan:
        return ProcessingPlan(
            p=self.p,
            q=self.q,
            post_degree=self.post_degree,
            solver_mode=self.solver_mode,
            cg_iterations=self.cg_iterations,
            seed_projection=self.seed_projection,
        )

    def with_refinement(self, value: int) -> "RunConfig":
        """Copy refined to N (1D) or level (2D) = value."""
        key = "N" if self.is_1d else "level"
        return self.model_copy(update={key: value})
