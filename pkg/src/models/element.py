"""
Element Models

Pydantic models for reference cells, nodal bases and quadrature rules.
"""

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.fem.polynomials import PolynomialBasis


# ============================================================================
# Enumerations
# ============================================================================

class ElementShape(str, Enum):
    """Reference cell shape."""
    INTERVAL = "interval"
    TRIANGLE = "triangle"

    @property
    def dim(self) -> int:
        return 1 if self is ElementShape.INTERVAL else 2

    @property
    def measure(self) -> float:
        return 1.0 if self is ElementShape.INTERVAL else 0.5


class ElementFamily(str, Enum):
    """Supported element families."""
    SPECTRAL_GLL = "spectral-GLL"
    LUMPED_TRIANGLE = "lumped-triangle"
    LAGRANGE = "lagrange"

    @property
    def lumped(self) -> bool:
        return self is not ElementFamily.LAGRANGE


# ============================================================================
# Quadrature and Elements
# ============================================================================

class QuadratureRule(BaseModel):
    """Points and positive weights on a reference cell."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int = Field(ge=0)

    @property
    def size(self) -> int:
        return self.weights.shape[0]


class ReferenceElement(BaseModel):
    """Nodal element on the reference interval [0,1] or unit triangle.

    ``nodes`` are reference coordinates; ``barycentric`` holds the same nodes
    in barycentric form (lambda_0 = 1 - x - y, lambda_1 = x, lambda_2 = y).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    shape: ElementShape
    family: ElementFamily
    degree: int = Field(ge=1)
    nodes: np.ndarray
    barycentric: np.ndarray
    basis: PolynomialBasis
    lump_weights: np.ndarray = Field(default_factory=lambda: np.zeros(0))
    lump_exactness: int = 0

    @property
    def basis_dim(self) -> int:
        return len(self.basis)

    @property
    def dim(self) -> int:
        return self.shape.dim

    @property
    def label(self) -> str:
        return f"{self.shape.value}/{self.family.value}/{self.degree}"
