"""
Report Models

Error reports, convergence tables and ladder consistency reports.
"""

import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


class ErrorReport(BaseModel):
    """Relative errors of one run at the final time."""
    problem: str
    p: int = Field(ge=1, le=3)
    q: int = Field(ge=0)
    level: Optional[int] = None
    N: Optional[int] = None
    n_dof: int = Field(ge=0)
    n_dof_high: int = Field(ge=0)
    n_steps: int = Field(ge=0)
    dt: float = Field(ge=0.0)
    e0: float
    eE: float
    e_neg: Optional[float] = None
    negative_norm_order: Optional[int] = None
    wall_time: float = Field(default=0.0, ge=0.0)
    solver_mode: str = "direct-surrogate"
    cg_iterations: int = 0
    solver_stats: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("e0", "eE", "e_neg")
    @classmethod
    def _finite_non_negative(cls, value: Optional[float]) -> Optional[float]:
        if value is None:
            return value
        if not math.isfinite(value) or value < 0.0:
            raise ValueError(f"error must be finite and non-negative, got {value}")
        return value

    @property
    def refinement(self) -> int:
        """Level (2D) or elements per wavelength (1D)."""
        return self.level if self.level is not None else (self.N or 0)


class ConvergenceRow(BaseModel):
    report: ErrorReport
    ratio_e0: Optional[float] = None
    order_e0: Optional[float] = None
    ratio_eE: Optional[float] = None
    order_eE: Optional[float] = None
    ratio_e_neg: Optional[float] = None
    order_e_neg: Optional[float] = None


class ConvergenceTable(BaseModel):
    """Rows of one (problem, p, q) block ordered by refinement."""
    rows: List[ConvergenceRow] = Field(default_factory=list)

    @property
    def reports(self) -> List[ErrorReport]:
        return [row.report for row in self.rows]

    def final_order(self, norm: str = "eE") -> Optional[float]:
        """Observed order on the finest ratio."""
        orders = [getattr(row, f"order_{norm}") for row in self.rows]
        orders = [o for o in orders if o is not None]
        return orders[-1] if orders else None


class LadderCheckReport(BaseModel):
    """Scaled residuals of d^{k+2}u = -L d^k u + d^k f at sample points."""
    problem: str
    max_order: int
    residuals: List[float] = Field(default_factory=list)
    tolerance: float
    n_samples: int

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance
