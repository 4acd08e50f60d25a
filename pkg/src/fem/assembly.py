"""
Assembly Module

Discrete spaces (global dof numbering with Dirichlet elimination and
periodic identification), mass and stiffness assembly, nodal
interpolation, weighted L2 projection and prolongation between spaces.

Spatial functions share the signature ``f(x, hint) -> values`` where ``x``
is an (n, dim) array of physical points and ``hint`` holds the centroid of
the element each point was sampled in; discontinuous coefficients use the
hint to pick a side.
"""

from typing import Callable, Dict, Hashable, List, Optional, Set, Tuple

import numpy as np
import structlog
from scipy import sparse

from src.fem.mesh import element_geometry, facet_key
from src.fem.quadrature import volume_quadrature
from src.models.element import ElementFamily, QuadratureRule, ReferenceElement
from src.models.fields import DiscreteSpace, FieldVector, WaveOperators
from src.models.mesh import Mesh
from src.solvers.cg import pcg
from src.utils.errors import SpaceError


logger = structlog.get_logger(__name__)

SpatialFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

SUPPORT_TOLERANCE = 1e-12
EDGE_KEY_DIGITS = 9
PROJECTION_TOLERANCE = 1e-13


# ============================================================================
# Degrees of freedom
# ============================================================================

def _periodic_master(mesh: Mesh) -> np.ndarray:
    """Map every vertex to its periodic representative."""
    master = np.arange(mesh.n_vertices)
    groups: Dict[str, List[Tuple[int, ...]]] = {}
    for facet in mesh.boundary:
        if facet.periodic_id is not None:
            groups.setdefault(facet.periodic_id, []).append(facet.vertices)

    for pid, facets in groups.items():
        if mesh.dim != 1:
            raise SpaceError("periodic identification is only supported on interval meshes")
        if len(facets) != 2 or len(facets[0]) != len(facets[1]):
            raise SpaceError(f"periodic tag '{pid}' must pair exactly two matching facets")
        for a, b in zip(facets[0], facets[1]):
            master[b] = master[a]
    return master


def _node_key(
    e: int, i: int, verts: np.ndarray, bary: np.ndarray, dim: int, master: np.ndarray
) -> Tuple[Hashable, Tuple[int, ...]]:
    """Shared-node key and the mesh entity (vertex tuple) the node lies on."""
    support = np.nonzero(bary > SUPPORT_TOLERANCE)[0]
    if support.size == 1:
        v = int(master[verts[support[0]]])
        return ("v", v), (v,)
    if dim == 2 and support.size == 2:
        a, b = int(verts[support[0]]), int(verts[support[1]])
        lam = bary[support[0]] if a < b else bary[support[1]]
        lo, hi = min(a, b), max(a, b)
        return ("e", lo, hi, round(float(lam) * 10 ** EDGE_KEY_DIGITS)), (lo, hi)
    return ("i", e, i), ()


def build_space(mesh: Mesh, element: ReferenceElement, label: str = "low") -> DiscreteSpace:
    """Number the nodes element by element, skipping Dirichlet nodes."""
    if element.dim != mesh.dim:
        raise SpaceError(f"{element.label} does not match a {mesh.dim}D mesh")

    master = _periodic_master(mesh)
    periodic = bool(np.any(master != np.arange(mesh.n_vertices)))
    dirichlet_facets: Set[Tuple[int, ...]] = {
        facet_key(f.vertices) for f in mesh.boundary if f.is_dirichlet
    }
    dirichlet_vertices = {v for f in dirichlet_facets for v in f}

    n_local = element.basis_dim
    element_dofs = np.full((mesh.n_elements, n_local), -1, dtype=np.int64)
    index: Dict[Hashable, int] = {}
    owners: List[Tuple[int, int]] = []

    for e in range(mesh.n_elements):
        verts = mesh.elements[e]
        for i in range(n_local):
            key, entity = _node_key(e, i, verts, element.barycentric[i], mesh.dim, master)
            on_boundary = (
                len(entity) == 1 and entity[0] in dirichlet_vertices
            ) or (len(entity) == 2 and entity in dirichlet_facets)
            if on_boundary:
                continue
            dof = index.get(key)
            if dof is None:
                dof = index[key] = len(owners)
                owners.append((e, i))
            element_dofs[e, i] = dof

    owner_element = np.array([o[0] for o in owners], dtype=np.int64)
    owner_local = np.array([o[1] for o in owners], dtype=np.int64)
    x, _, _ = element_geometry(mesh, element.nodes)
    node_coords = x[owner_element, owner_local] if owners else np.zeros((0, mesh.dim))

    space = DiscreteSpace(
        mesh=mesh,
        element=element,
        n_dof=len(owners),
        element_dofs=element_dofs,
        node_coords=node_coords,
        owner_element=owner_element,
        owner_local=owner_local,
        periodic=periodic,
        label=label,
    )
    logger.debug("space_built", element=element.label, n_dof=space.n_dof, periodic=periodic, label=label)
    return space


# ============================================================================
# Quadrature helpers
# ============================================================================

def rich_quadrature_degree(element: ReferenceElement) -> int:
    """Degree-4p rule for lumped spaces, 2k for degree-k lagrange spaces (k = 2p)."""
    if element.family is ElementFamily.LAGRANGE:
        return 2 * element.degree
    return 4 * element.degree


def stiffness_quadrature_degree(space: DiscreteSpace, coefficients_vary: bool) -> int:
    element = space.element
    if element.family is ElementFamily.LAGRANGE:
        return 2 * element.degree
    if space.mesh.is_curved or coefficients_vary:
        return 4 * element.degree
    return 2 * element.degree


def sample(
    mesh: Mesh, func: SpatialFunction, x: np.ndarray
) -> np.ndarray:
    """Evaluate ``func`` at per-element points x (E, nq, dim) with centroid hints."""
    n_elements, n_q, dim = x.shape
    hints = np.repeat(mesh.centroids()[:, None, :], n_q, axis=1)
    values = func(x.reshape(-1, dim), hints.reshape(-1, dim))
    return np.broadcast_to(np.asarray(values, dtype=float), (n_elements * n_q,)).reshape(n_elements, n_q)


def physical_gradients(element: ReferenceElement, rule: QuadratureRule, jac: np.ndarray) -> np.ndarray:
    """Basis gradients (E, nq, n_local, dim) mapped with J^-T."""
    ref = element.basis.gradients(rule.points)
    inv = np.linalg.inv(jac)
    return np.einsum("eqba,qib->eqia", inv, ref)


def _scatter_matrix(space: DiscreteSpace, local: np.ndarray) -> sparse.csr_matrix:
    dofs = space.element_dofs
    rows = np.broadcast_to(dofs[:, :, None], local.shape)
    cols = np.broadcast_to(dofs[:, None, :], local.shape)
    keep = (rows >= 0) & (cols >= 0)
    matrix = sparse.coo_matrix(
        (local[keep], (rows[keep], cols[keep])), shape=(space.n_dof, space.n_dof)
    ).tocsr()
    matrix.sum_duplicates()
    return matrix


def _scatter_vector(space: DiscreteSpace, local: np.ndarray) -> np.ndarray:
    dofs = space.element_dofs
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=local[keep], minlength=space.n_dof)


# ============================================================================
# Operators
# ============================================================================

def element_stiffness_matrices(
    space: DiscreteSpace, c_field: SpatialFunction, degree: int
) -> np.ndarray:
    shape = space.element.shape
    rule = volume_quadrature(shape, degree)
    x, jac, det = element_geometry(space.mesh, rule.points)
    weight = rule.weights[None, :] * det * sample(space.mesh, c_field, x)
    grads = physical_gradients(space.element, rule, jac)
    local = np.einsum("eq,eqia,eqja->eij", weight, grads, grads)
    return 0.5 * (local + local.transpose(0, 2, 1))


def element_consistent_mass(space: DiscreteSpace, rho_field: SpatialFunction, degree: int) -> np.ndarray:
    rule = volume_quadrature(space.element.shape, degree)
    x, _, det = element_geometry(space.mesh, rule.points)
    weight = rule.weights[None, :] * det * sample(space.mesh, rho_field, x)
    phi = space.element.basis.values(rule.points)
    local = np.einsum("eq,qi,qj->eij", weight, phi, phi)
    return 0.5 * (local + local.transpose(0, 2, 1))


def element_lumped_mass(space: DiscreteSpace, rho_field: SpatialFunction) -> np.ndarray:
    element = space.element
    x, _, det = element_geometry(space.mesh, element.nodes)
    local = element.lump_weights[None, :] * det * sample(space.mesh, rho_field, x)
    bad = np.argwhere(local <= 0.0)
    if bad.size:
        e = int(bad[0, 0])
        raise SpaceError(f"non-positive lumped mass in element {e}")
    return local


def assemble_consistent_mass(
    space: DiscreteSpace, rho_field: SpatialFunction, degree: Optional[int] = None
) -> sparse.csr_matrix:
    degree = degree if degree is not None else rich_quadrature_degree(space.element)
    return _scatter_matrix(space, element_consistent_mass(space, rho_field, degree))


def assemble_operators(
    space: DiscreteSpace,
    rho_field: SpatialFunction,
    c_field: SpatialFunction,
    *,
    coefficients_vary: bool = True,
    stiffness_degree: Optional[int] = None,
) -> WaveOperators:
    """Stiffness A and mass M; lumped families get a diagonal M from the nodal rule."""
    degree = stiffness_degree or stiffness_quadrature_degree(space, coefficients_vary)
    local_stiffness = element_stiffness_matrices(space, c_field, degree)
    stiffness = _scatter_matrix(space, local_stiffness)
    stiffness = ((stiffness + stiffness.T) * 0.5).tocsr()
    local_consistent = element_consistent_mass(space, rho_field, rich_quadrature_degree(space.element))

    if space.element.family.lumped:
        local_mass = element_lumped_mass(space, rho_field)
        diagonal = _scatter_vector(space, local_mass)
        if np.any(diagonal <= 0.0):
            raise SpaceError("assembled lumped mass has a non-positive entry")
        ops = WaveOperators(
            space=space,
            stiffness=stiffness,
            mass=sparse.diags(diagonal).tocsr(),
            mass_diagonal=diagonal,
            element_mass=local_mass,
            element_stiffness=local_stiffness,
            element_consistent_mass=local_consistent,
        )
    else:
        mass = _scatter_matrix(space, local_consistent)
        ops = WaveOperators(
            space=space,
            stiffness=stiffness,
            mass=((mass + mass.T) * 0.5).tocsr(),
            element_stiffness=local_stiffness,
            element_consistent_mass=local_consistent,
        )

    logger.info(
        "operators_assembled",
        element=space.element.label,
        label=space.label,
        n_dof=space.n_dof,
        nnz=int(stiffness.nnz),
        stiffness_degree=degree,
        lumped=ops.lumped,
    )
    return ops


# ============================================================================
# Fields
# ============================================================================

def interpolate(space: DiscreteSpace, func: SpatialFunction, time_stamp: Optional[float] = None) -> FieldVector:
    """Nodal interpolation f(x_i); Dirichlet nodes are absent."""
    hints = space.mesh.centroids()[space.owner_element]
    values = np.asarray(func(space.node_coords, hints), dtype=float)
    values = np.broadcast_to(values, (space.n_dof,)).copy()
    return FieldVector(values=values, space=space, time_stamp=time_stamp)


def project_weighted_l2(
    space: DiscreteSpace,
    func: SpatialFunction,
    rho_field: SpatialFunction,
    time_stamp: Optional[float] = None,
) -> FieldVector:
    """rho-weighted L2 projection through the consistent mass matrix."""
    degree = rich_quadrature_degree(space.element)
    mass = assemble_consistent_mass(space, rho_field, degree)

    rule = volume_quadrature(space.element.shape, degree)
    x, _, det = element_geometry(space.mesh, rule.points)
    weight = rule.weights[None, :] * det * sample(space.mesh, rho_field, x) * sample(space.mesh, func, x)
    phi = space.element.basis.values(rule.points)
    rhs = _scatter_vector(space, np.einsum("eq,qi->ei", weight, phi))

    guess = interpolate(space, func).values
    values, _ = pcg(
        lambda v: mass @ v,
        rhs,
        guess,
        mass.diagonal(),
        tol=PROJECTION_TOLERANCE,
        maxiter=10 * max(space.n_dof, 1),
    )
    return FieldVector(values=values, space=space, time_stamp=time_stamp)


def build_prolongation(space_low: DiscreteSpace, space_high: DiscreteSpace) -> sparse.csr_matrix:
    """P_ij = w_j(x_i*) evaluated inside the element owning high node i."""
    if space_low.mesh is not space_high.mesh:
        raise SpaceError("prolongation requires both spaces on the same mesh")

    low_at_high = space_low.element.basis.values(space_high.element.nodes)
    rows = np.repeat(np.arange(space_high.n_dof), space_low.element.basis_dim)
    cols = space_low.element_dofs[space_high.owner_element].ravel()
    data = low_at_high[space_high.owner_local].ravel()
    keep = (cols >= 0) & (data != 0.0)

    P = sparse.coo_matrix(
        (data[keep], (rows[keep], cols[keep])), shape=(space_high.n_dof, space_low.n_dof)
    ).tocsr()
    logger.debug("prolongation_built", shape=P.shape, nnz=int(P.nnz))
    return P


def evaluate_at_quadrature(
    space: DiscreteSpace, values: np.ndarray, rule: QuadratureRule, jac: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Field values (E, nq) and physical gradients (E, nq, dim) at the rule points."""
    coefficients = space.local_values(values)
    phi = space.element.basis.values(rule.points)
    grads = physical_gradients(space.element, rule, jac)
    return (
        np.einsum("qi,ei->eq", phi, coefficients),
        np.einsum("eqia,ei->eqa", grads, coefficients),
    )
