"""
Mesh Models

Pydantic models for meshes, boundary facets and element geometric maps.
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.fem.polynomials import PolynomialBasis


class MapKind(str, Enum):
    """Element geometric map kind."""
    AFFINE = "affine"
    CURVED = "curved"


class BoundaryFacet(BaseModel):
    """A boundary facet (vertex in 1D, edge in 2D) with its tag.

    Tags are ``dirichlet`` or ``periodic:<id>``; facets sharing a periodic id
    are identified.
    """
    model_config = ConfigDict(frozen=True)

    vertices: Tuple[int, ...]
    tag: str = "dirichlet"

    @property
    def is_dirichlet(self) -> bool:
        return self.tag == "dirichlet"

    @property
    def periodic_id(self) -> Optional[str]:
        if self.tag.startswith("periodic:"):
            return self.tag.split(":", 1)[1]
        return None


class GeometricMap(BaseModel):
    """Polynomial map phi_e(x_hat) = sum_j coefficients[j] * basis_j(x_hat).

    For affine maps the basis is the barycentric coordinates and the
    coefficients are the vertices; curved maps interpolate ``control_points``.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    element: int
    kind: MapKind
    degree: int = Field(ge=1)
    control_points: np.ndarray
    basis: PolynomialBasis
    coefficients: np.ndarray


class Mesh(BaseModel):
    """Simplicial mesh of an interval or planar domain."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    dim: int = Field(ge=1, le=2)
    vertices: np.ndarray
    elements: np.ndarray
    boundary: List[BoundaryFacet] = Field(default_factory=list)
    curved_maps: Dict[int, GeometricMap] = Field(default_factory=dict)
    name: str = "mesh"

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def is_curved(self) -> bool:
        return bool(self.curved_maps)

    def element_vertices(self, e: int) -> np.ndarray:
        return self.vertices[self.elements[e]]

    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)
