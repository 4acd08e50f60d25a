"""
Field Models

Discrete spaces, assembled wave operators and nodal field vectors.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator
from scipy import sparse

from src.models.element import ReferenceElement
from src.models.mesh import Mesh


class DiscreteSpace(BaseModel):
    """Mesh + reference element + global degree-of-freedom map.

    ``element_dofs[e, i]`` is the global index of local node i of element e,
    or -1 for an eliminated (Dirichlet) node.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mesh: Mesh
    element: ReferenceElement
    n_dof: int = Field(ge=0)
    element_dofs: np.ndarray
    node_coords: np.ndarray
    owner_element: np.ndarray
    owner_local: np.ndarray
    periodic: bool = False
    label: str = "low"

    @property
    def has_constant_kernel(self) -> bool:
        return self.periodic

    def padded(self, values: np.ndarray) -> np.ndarray:
        """Append a zero so that element_dofs == -1 picks it up."""
        return np.concatenate([values, np.zeros(1)])

    def local_values(self, values: np.ndarray) -> np.ndarray:
        """Per-element coefficient arrays (E, n_local); eliminated nodes read 0."""
        return self.padded(values)[self.element_dofs]


class WaveOperators(BaseModel):
    """Mass and stiffness of one space; L_h = M^-1 A."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    space: DiscreteSpace
    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    mass_diagonal: Optional[np.ndarray] = None
    element_mass: Optional[np.ndarray] = None
    element_stiffness: Optional[np.ndarray] = None
    element_consistent_mass: Optional[np.ndarray] = None

    _preconditioner: Optional[np.ndarray] = PrivateAttr(default=None)

    @property
    def lumped(self) -> bool:
        return self.mass_diagonal is not None

    @property
    def n_dof(self) -> int:
        return self.space.n_dof


class FieldVector(BaseModel):
    """Nodal coefficients of one field at one time instant."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    space: DiscreteSpace
    time_stamp: Optional[float] = None

    @model_validator(mode="after")
    def _check_length(self) -> "FieldVector":
        if self.values.shape != (self.space.n_dof,):
            raise ValueError(
                f"field has shape {self.values.shape}, space has {self.space.n_dof} dofs"
            )
        return self

    def with_values(self, values: np.ndarray, time_stamp: Optional[float] = None) -> "FieldVector":
        return FieldVector(values=values, space=self.space, time_stamp=time_stamp)
