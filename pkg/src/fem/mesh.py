"""
Mesh Module

Mesh generators for the benchmark geometries, element geometric maps
(affine and curved hyperparametric), conformity checks and the shape
regularity estimate.
"""

from functools import lru_cache
from itertools import combinations
from typing import Dict, Iterable, List, Tuple

import numpy as np
import structlog

from src.fem.polynomials import PolynomialBasis, barycentric_polynomials, poly_add, poly_mul, poly_pow, poly_scale
from src.fem.quadrature import volume_quadrature
from src.models.element import ElementShape
from src.models.mesh import BoundaryFacet, GeometricMap, MapKind, Mesh
from src.utils.errors import InvertedElementError, MeshError


logger = structlog.get_logger(__name__)

# Local edges of a triangle, matching the curved-map node ordering
TRIANGLE_EDGES: Tuple[Tuple[int, int], ...] = ((0, 1), (1, 2), (2, 0))
REFERENCE_VERTICES = {
    1: np.array([[0.0], [1.0]]),
    2: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
}

SQUARE_BASE_CELLS = 4
SQUARE_JITTER = 0.15
DISK_BASE_RINGS = 4


# ============================================================================
# Geometric maps
# ============================================================================

@lru_cache(maxsize=None)
def affine_map_basis(dim: int) -> PolynomialBasis:
    return PolynomialBasis.from_polynomials(barycentric_polynomials(dim), dim)


@lru_cache(maxsize=None)
def curved_map_basis(map_degree: int) -> PolynomialBasis:
    """Barycentric coordinates plus lambda_i lambda_j (lambda_i - lambda_j)^k, i < j, k <= m-2."""
    lam = barycentric_polynomials(2)
    polys = list(lam)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        diff = poly_add(lam[i], poly_scale(lam[j], -1.0))
        for k in range(map_degree - 1):
            polys.append(poly_mul(lam[i], lam[j], poly_pow(diff, k)))
    return PolynomialBasis.from_polynomials(polys, dim=2)


def curved_map_nodes(corners: np.ndarray, map_degree: int) -> np.ndarray:
    """Corners followed by m-1 equispaced nodes on each edge (0,1), (1,2), (2,0)."""
    nodes = [corners[0], corners[1], corners[2]]
    for a, b in TRIANGLE_EDGES:
        for s in range(1, map_degree):
            t = s / map_degree
            nodes.append((1.0 - t) * corners[a] + t * corners[b])
    return np.array(nodes)


def affine_map(mesh: Mesh, e: int) -> GeometricMap:
    corners = mesh.element_vertices(e)
    return GeometricMap(
        element=e,
        kind=MapKind.AFFINE,
        degree=1,
        control_points=corners,
        basis=affine_map_basis(mesh.dim),
        coefficients=corners,
    )


def element_map(mesh: Mesh, e: int) -> GeometricMap:
    curved = mesh.curved_maps.get(e)
    return curved if curved is not None else affine_map(mesh, e)


def curved_map_from_control_points(e: int, map_degree: int, control_points: np.ndarray) -> GeometricMap:
    basis = curved_map_basis(map_degree)
    reference = curved_map_nodes(REFERENCE_VERTICES[2], map_degree)
    try:
        coefficients = np.linalg.solve(basis.values(reference), control_points)
    except np.linalg.LinAlgError as e_:
        raise MeshError(f"singular curved-map interpolation for element {e}") from e_
    return GeometricMap(
        element=e,
        kind=MapKind.CURVED,
        degree=map_degree,
        control_points=np.array(control_points, dtype=float),
        basis=basis,
        coefficients=coefficients,
    )


def place_curved_map(
    e: int,
    corners: np.ndarray,
    boundary_edges: Iterable[int],
    map_degree: int,
    radius: float = 1.0,
) -> GeometricMap:
    """Degree-m map whose boundary-edge nodes are pushed radially onto the circle.

    ``boundary_edges`` are local edge indices into TRIANGLE_EDGES.
    """
    if map_degree < 1:
        raise MeshError(f"map degree must be >= 1, got {map_degree}")
    points = curved_map_nodes(np.asarray(corners, dtype=float), map_degree)
    for edge in boundary_edges:
        for a in TRIANGLE_EDGES[edge]:
            points[a] *= radius / np.linalg.norm(points[a])
        start = 3 + edge * (map_degree - 1)
        for idx in range(start, start + map_degree - 1):
            points[idx] *= radius / np.linalg.norm(points[idx])

    gmap = curved_map_from_control_points(e, map_degree, points)
    samples = volume_quadrature(ElementShape.TRIANGLE, min(2 * map_degree, 12)).points
    _, _, det = map_geometry(gmap, np.vstack([REFERENCE_VERTICES[2], samples]))
    if np.any(det <= 0.0):
        raise MeshError(f"curved map of element {e} is degenerate (min det {det.min():.3e})")
    return gmap


def map_geometry(gmap: GeometricMap, ref_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Physical points, Jacobians J[a, b] = d x_a / d x_hat_b and determinants."""
    dim = gmap.coefficients.shape[1]
    pts = np.asarray(ref_points, dtype=float).reshape(-1, dim)
    values = gmap.basis.values(pts)
    grads = gmap.basis.gradients(pts)
    x = values @ gmap.coefficients
    jac = np.einsum("ja,qjb->qab", gmap.coefficients, grads)
    return x, jac, np.linalg.det(jac)


def eval_map(gmap: GeometricMap, ref_point: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """Map one reference point; raises InvertedElementError when det <= 0."""
    x, jac, det = map_geometry(gmap, ref_point)
    if det[0] <= 0.0:
        raise InvertedElementError(gmap.element, float(det[0]))
    return x[0], jac[0], float(det[0])


def element_geometry(mesh: Mesh, ref_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Geometry of every element at shared reference points.

    Returns points (E, nq, dim), Jacobians (E, nq, dim, dim) and
    determinants (E, nq).
    """
    dim = mesh.dim
    pts = np.asarray(ref_points, dtype=float).reshape(-1, dim)
    n_q = pts.shape[0]

    basis = affine_map_basis(dim)
    lam = basis.values(pts)
    dlam = basis.gradients(pts)[0]
    corners = mesh.vertices[mesh.elements]
    x = np.einsum("qj,ejd->eqd", lam, corners)
    jac = np.broadcast_to(
        np.einsum("eja,jb->eab", corners, dlam)[:, None, :, :],
        (mesh.n_elements, n_q, dim, dim),
    ).copy()

    by_degree: Dict[int, List[int]] = {}
    for e, gmap in mesh.curved_maps.items():
        by_degree.setdefault(gmap.degree, []).append(e)
    for degree, idx in by_degree.items():
        curved = curved_map_basis(degree)
        coefficients = np.stack([mesh.curved_maps[e].coefficients for e in idx])
        x[idx] = np.einsum("qj,ejd->eqd", curved.values(pts), coefficients)
        jac[idx] = np.einsum("eja,qjb->eqab", coefficients, curved.gradients(pts))

    det = np.linalg.det(jac)
    bad = np.nonzero(np.min(det, axis=1) <= 0.0)[0]
    if bad.size:
        e = int(bad[0])
        raise InvertedElementError(e, float(det[e].min()))
    return x, jac, det


def element_measures(mesh: Mesh, degree: int = 2) -> np.ndarray:
    shape = ElementShape.INTERVAL if mesh.dim == 1 else ElementShape.TRIANGLE
    rule = volume_quadrature(shape, degree)
    _, _, det = element_geometry(mesh, rule.points)
    return det @ rule.weights


def element_diameters(mesh: Mesh) -> np.ndarray:
    diam = np.zeros(mesh.n_elements)
    corners = mesh.vertices[mesh.elements]
    for a, b in combinations(range(mesh.dim + 1), 2):
        diam = np.maximum(diam, np.linalg.norm(corners[:, a] - corners[:, b], axis=1))
    for e, gmap in mesh.curved_maps.items():
        pts = gmap.control_points
        diam[e] = max(np.linalg.norm(pts[i] - pts[j]) for i, j in combinations(range(len(pts)), 2))
    return diam


# ============================================================================
# Validation
# ============================================================================

def facet_key(vertices: Iterable[int]) -> Tuple[int, ...]:
    return tuple(sorted(int(v) for v in vertices))


def element_facets(mesh: Mesh) -> Dict[Tuple[int, ...], List[int]]:
    """Facet (sorted vertex tuple) -> adjacent elements."""
    facets: Dict[Tuple[int, ...], List[int]] = {}
    if mesh.dim == 1:
        local = ((0,), (1,))
    else:
        local = TRIANGLE_EDGES
    for e, element in enumerate(mesh.elements):
        for f in local:
            facets.setdefault(facet_key(element[list(f)]), []).append(e)
    return facets


def boundary_facets_of(mesh: Mesh) -> List[Tuple[int, ...]]:
    return [f for f, owners in element_facets(mesh).items() if len(owners) == 1]


def validate_mesh(mesh: Mesh) -> None:
    """Raise on empty, non-conforming or inverted meshes."""
    if mesh.n_elements == 0:
        raise MeshError("mesh has no elements")
    if mesh.elements.min() < 0 or mesh.elements.max() >= mesh.n_vertices:
        raise MeshError("element references a missing vertex")

    tagged = {facet_key(f.vertices) for f in mesh.boundary}
    for f, owners in element_facets(mesh).items():
        if len(owners) > 2:
            raise MeshError(f"facet {f} shared by {len(owners)} elements")
        if len(owners) == 1 and f not in tagged:
            raise MeshError(f"boundary facet {f} has no tag")

    shape = ElementShape.INTERVAL if mesh.dim == 1 else ElementShape.TRIANGLE
    samples = np.vstack([REFERENCE_VERTICES[mesh.dim], volume_quadrature(shape, 4).points])
    element_geometry(mesh, samples)


# ============================================================================
# Generators
# ============================================================================

def generate_interval_mesh(N: int) -> Mesh:
    """Periodic mesh of (0, 5): N cells on (0, 1) and N cells on (1, 5)."""
    if N < 1:
        raise MeshError(f"need at least one element per wavelength, got N={N}")
    left = np.linspace(0.0, 1.0, N + 1)
    right = np.linspace(1.0, 5.0, N + 1)[1:]
    vertices = np.concatenate([left, right]).reshape(-1, 1)
    n_cells = 2 * N
    elements = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    boundary = [
        BoundaryFacet(vertices=(0,), tag="periodic:0"),
        BoundaryFacet(vertices=(n_cells,), tag="periodic:0"),
    ]
    mesh = Mesh(dim=1, vertices=vertices, elements=elements, boundary=boundary, name=f"interval-N{N}")
    validate_mesh(mesh)
    logger.debug("interval_mesh_generated", N=N, n_elements=n_cells)
    return mesh


def _min_angle(points: np.ndarray) -> float:
    angles = []
    for i in range(3):
        a = points[(i + 1) % 3] - points[i]
        b = points[(i + 2) % 3] - points[i]
        cos = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
        angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
    return min(angles)


def refine_uniform(vertices: np.ndarray, elements: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split every triangle into four through its edge midpoints."""
    points = [tuple(v) for v in vertices]
    midpoints: Dict[Tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key not in midpoints:
            midpoints[key] = len(points)
            points.append(tuple(0.5 * (vertices[a] + vertices[b])))
        return midpoints[key]

    children = []
    for a, b, c in elements:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        children.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return np.array(points), np.array(children, dtype=np.int64)


def _dirichlet_boundary(elements: np.ndarray) -> List[BoundaryFacet]:
    counts: Dict[Tuple[int, int], int] = {}
    for element in elements:
        for a, b in TRIANGLE_EDGES:
            key = facet_key((element[a], element[b]))
            counts[key] = counts.get(key, 0) + 1
    return [BoundaryFacet(vertices=f, tag="dirichlet") for f, n in sorted(counts.items()) if n == 1]


def generate_square_mesh(level: int, seed: int = 0) -> Mesh:
    """Jittered triangulation of the unit square, refined level-1 times.

    The base mesh is a 4x4 grid whose interior vertices are displaced by at
    most 0.15 h; every cell is split along the diagonal maximising the
    minimum angle. Each level halves all element diameters.
    """
    if level < 1:
        raise MeshError(f"level must be >= 1, got {level}")
    n = SQUARE_BASE_CELLS
    h = 1.0 / n
    rng = np.random.default_rng(seed)

    grid = np.linspace(0.0, 1.0, n + 1)
    vertices = np.array([(x, y) for y in grid for x in grid])
    for j in range(1, n):
        for i in range(1, n):
            radius = SQUARE_JITTER * h * rng.random()
            angle = 2.0 * np.pi * rng.random()
            vertices[j * (n + 1) + i] += radius * np.array([np.cos(angle), np.sin(angle)])

    elements = []
    for j in range(n):
        for i in range(n):
            v00 = j * (n + 1) + i
            v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
            split_a = [(v00, v10, v11), (v00, v11, v01)]
            split_b = [(v00, v10, v01), (v10, v11, v01)]
            quality_a = min(_min_angle(vertices[list(t)]) for t in split_a)
            quality_b = min(_min_angle(vertices[list(t)]) for t in split_b)
            elements.extend(split_a if quality_a >= quality_b else split_b)
    elements = np.array(elements, dtype=np.int64)

    for _ in range(level - 1):
        vertices, elements = refine_uniform(vertices, elements)

    mesh = Mesh(
        dim=2,
        vertices=vertices,
        elements=elements,
        boundary=_dirichlet_boundary(elements),
        name=f"square-L{level}",
    )
    validate_mesh(mesh)
    logger.debug("square_mesh_generated", level=level, seed=seed, n_elements=mesh.n_elements)
    return mesh


def _ring_points(n_rings: int) -> Tuple[np.ndarray, List[np.ndarray]]:
    points = [np.zeros(2)]
    rings = [np.array([0])]
    for i in range(1, n_rings + 1):
        count = 6 * i
        theta = 2.0 * np.pi * np.arange(count) / count
        radius = i / n_rings
        start = len(points)
        for t in theta:
            points.append(np.array([radius * np.cos(t), radius * np.sin(t)]))
        rings.append(np.arange(start, start + count))
    return np.array(points), rings


def _zip_rings(inner: np.ndarray, outer: np.ndarray) -> List[Tuple[int, int, int]]:
    """Counter-clockwise triangles filling the annulus between two rings."""
    n_in, n_out = len(inner), len(outer)
    if n_in == 1:
        return [(inner[0], outer[j], outer[(j + 1) % n_out]) for j in range(n_out)]

    triangles = []
    i = j = 0
    while i < n_in or j < n_out:
        next_inner = (i + 1) / n_in
        next_outer = (j + 1) / n_out
        if j < n_out and (i == n_in or next_outer <= next_inner):
            triangles.append((inner[i % n_in], outer[j], outer[(j + 1) % n_out]))
            j += 1
        else:
            triangles.append((inner[i], outer[j % n_out], inner[(i + 1) % n_in]))
            i += 1
    return triangles


def generate_disk_mesh(level: int, map_degree: int) -> Mesh:
    """Concentric-ring triangulation of the unit disk with curved boundary elements.

    Ring i of R = 4 * 2^(level-1) rings carries 6i vertices; elements with an
    edge on the circle get degree-``map_degree`` curved maps.
    """
    if level < 1:
        raise MeshError(f"level must be >= 1, got {level}")
    n_rings = DISK_BASE_RINGS * 2 ** (level - 1)
    vertices, rings = _ring_points(n_rings)

    elements = []
    for inner, outer in zip(rings[:-1], rings[1:]):
        elements.extend(_zip_rings(inner, outer))
    elements = np.array(elements, dtype=np.int64)

    outer = rings[-1]
    boundary = [
        BoundaryFacet(vertices=facet_key((outer[j], outer[(j + 1) % len(outer)])), tag="dirichlet")
        for j in range(len(outer))
    ]
    boundary_keys = {f.vertices for f in boundary}

    curved_maps: Dict[int, GeometricMap] = {}
    for e, element in enumerate(elements):
        edges = [k for k, (a, b) in enumerate(TRIANGLE_EDGES) if facet_key((element[a], element[b])) in boundary_keys]
        if edges:
            curved_maps[e] = place_curved_map(e, vertices[element], edges, map_degree)

    mesh = Mesh(
        dim=2,
        vertices=vertices,
        elements=elements,
        boundary=boundary,
        curved_maps=curved_maps,
        name=f"disk-L{level}-m{map_degree}",
    )
    validate_mesh(mesh)
    logger.debug(
        "disk_mesh_generated",
        level=level,
        map_degree=map_degree,
        n_elements=mesh.n_elements,
        n_curved=len(curved_maps),
    )
    return mesh


# ============================================================================
# Shape regularity
# ============================================================================

def _derivative_multi_indices(order: int) -> List[Tuple[int, int]]:
    return [(order - k, k) for k in range(order + 1)]


def shape_regularity(mesh: Mesh, p: int) -> float:
    """Sampled gamma = max_e [h_e sup |J^-1| + sum_{2<=|a|<=p+1} sup h_e^-|a| |D^a phi_e|]."""
    shape = ElementShape.INTERVAL if mesh.dim == 1 else ElementShape.TRIANGLE
    samples = volume_quadrature(shape, min(4 * p, 12) if mesh.dim == 2 else 4 * p).points
    _, jac, _ = element_geometry(mesh, samples)
    inv_norm = np.linalg.norm(np.linalg.inv(jac), ord=2, axis=(-2, -1)).max(axis=1)
    h = element_diameters(mesh)
    gamma = h * inv_norm

    for e, gmap in mesh.curved_maps.items():
        curvature = 0.0
        for order in range(2, p + 2):
            for ax, ay in _derivative_multi_indices(order):
                derivative = gmap.basis.derivative(ax, ay).values(samples) @ gmap.coefficients
                curvature += np.linalg.norm(derivative, axis=1).max() * h[e] ** (-order)
        gamma[e] += curvature

    return float(gamma.max())
