"""
Plan Models

Solver reports, time-stepping plans, wave states and processing plans.
"""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from src.models.fields import FieldVector


# ============================================================================
# Solvers
# ============================================================================

class SolverMode(str, Enum):
    """How L_h^-1 is realised."""
    DIRECT = "direct-surrogate"
    CG_FIXED = "cg-fixed-iters"


class SolveReport(BaseModel):
    """Outcome of one preconditioned CG solve."""
    iterations: int = Field(ge=0)
    final_relative_residual: float = Field(ge=0.0)
    mode: SolverMode
    converged: bool = True
    residual_history: List[float] = Field(default_factory=list)


# ============================================================================
# Time stepping
# ============================================================================

# Stability constants of the order-2p scheme, p = 1, 2, 3
STABILITY_CONSTANTS = {1: 4.0, 2: 12.0, 3: 7.57}


class SigmaBound(str, Enum):
    """Element mass matrix used in the element-wise eigenvalue bound."""
    CONSISTENT = "consistent"
    LUMPED = "lumped"


def default_sigma_bound(dim: int) -> SigmaBound:
    """Consistent element masses on intervals, the lumped ones on triangles."""
    return SigmaBound.CONSISTENT if dim == 1 else SigmaBound.LUMPED


class TimestepPlan(BaseModel):
    """Step size and count with N_T * dt == T."""
    p: int = Field(ge=1, le=3)
    T: float = Field(ge=0.0)
    dt: float = Field(ge=0.0)
    dt_max: float = Field(gt=0.0)
    safety: float = Field(default=0.9, gt=0.0)
    n_steps: int = Field(ge=0)
    sigma_max: float = Field(gt=0.0)
    sigma_bound: SigmaBound = SigmaBound.CONSISTENT

    @computed_field
    @property
    def c_p(self) -> float:
        return STABILITY_CONSTANTS[self.p]


class WaveState(BaseModel):
    """Two consecutive displacement iterates of the explicit scheme."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    u_prev: FieldVector
    u_curr: FieldVector
    n: int = Field(ge=0)
    t: float

    @model_validator(mode="after")
    def _same_space(self) -> "WaveState":
        if self.u_prev.space is not self.u_curr.space:
            raise ValueError("wave state vectors live in different spaces")
        return self


class EnergySample(BaseModel):
    step: int
    time: float
    energy: float


class RunResult(BaseModel):
    """Final displacement and reconstructed velocity of a time loop."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    u_T: FieldVector
    v_T: FieldVector
    n_steps: int
    trace: List[EnergySample] = Field(default_factory=list)


# ============================================================================
# Processing
# ============================================================================

class SeedProjection(str, Enum):
    """How the analytic ladder seeds enter the discrete space."""
    NODAL = "nodal"
    CONSISTENT = "consistent"


def processing_counts(q: int) -> tuple:
    """Number of u- and v-ladder solves: (ceil(q/2), floor(q/2))."""
    if q < 0:
        raise ValueError(f"q must be non-negative, got {q}")
    return (q + 1) // 2, q // 2


class ProcessingPlan(BaseModel):
    """q-step processing parameters for a degree-p run."""
    p: int = Field(ge=1, le=3)
    q: int = Field(ge=0)
    post_degree: Optional[int] = None
    solver_mode: SolverMode = SolverMode.DIRECT
    cg_iterations: int = Field(default=0, ge=0)
    seed_projection: SeedProjection = SeedProjection.NODAL

    @model_validator(mode="after")
    def _resolve_post_degree(self) -> "ProcessingPlan":
        if self.post_degree is None:
            self.post_degree = max(2 * self.p, self.p + self.q)
        if self.q > 0 and self.post_degree < self.p + self.q:
            raise ValueError(
                f"post_degree {self.post_degree} below p + q = {self.p + self.q}"
            )
        if self.post_degree > 6:
            raise ValueError(f"post_degree {self.post_degree} exceeds the supported maximum 6")
        return self

    @computed_field
    @property
    def alpha(self) -> int:
        return processing_counts(self.q)[0]

    @computed_field
    @property
    def beta(self) -> int:
        return processing_counts(self.q)[1]
