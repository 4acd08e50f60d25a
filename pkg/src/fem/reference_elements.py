"""
Reference Elements Module

Nodal bases on the reference interval and unit triangle for the three
supported families:

- spectral-GLL (interval, p = 1..6): Lagrange basis on Gauss-Lobatto nodes,
  lumped by the GLL rule itself.
- lumped-triangle (p = 1..3): P_p enriched with bubble functions so that a
  positive quadrature rule with nodes at the basis nodes exists.
- lagrange (triangle, p = 1..6): equispaced barycentric nodes, used for the
  higher-degree post-processing spaces.
"""

from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np
import structlog

from src.fem.polynomials import (
    PolynomialBasis,
    barycentric_polynomials,
    constant,
    monomial,
    poly_add,
    poly_mul,
    poly_scale,
)
from src.fem.quadrature import gauss_lobatto, monomial_integral
from src.models.element import (
    ElementFamily,
    ElementShape,
    QuadratureRule,
    ReferenceElement,
)
from src.utils.errors import UnsupportedElementError


logger = structlog.get_logger(__name__)


# Node parameters of the cubic mass-lumped triangle
LUMPED_P3_EDGE_ALPHA = 0.2934695559090402
LUMPED_P3_INTERIOR_BETA = 0.2073451756635909

SUPPORTED: Dict[Tuple[ElementShape, ElementFamily], Sequence[int]] = {
    (ElementShape.INTERVAL, ElementFamily.SPECTRAL_GLL): range(1, 7),
    (ElementShape.TRIANGLE, ElementFamily.LUMPED_TRIANGLE): range(1, 4),
    (ElementShape.TRIANGLE, ElementFamily.LAGRANGE): range(1, 7),
}

# Degree of the monomials integrated exactly by the lumped triangle rules
LUMPED_TRIANGLE_EXACTNESS = {1: 1, 2: 3, 3: 4}

INSIDE_TOLERANCE = 1e-10
MOMENT_TOLERANCE = 1e-12


# ============================================================================
# Node sets
# ============================================================================

def _triangle_barycentric_to_reference(bary: np.ndarray) -> np.ndarray:
    return bary[:, 1:3].copy()


def _edge_nodes(params: Sequence[float]) -> List[Tuple[float, float, float]]:
    """Nodes along edges (0,1), (1,2), (2,0) at the given fractions from the first vertex."""
    nodes = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        for t in params:
            lam = [0.0, 0.0, 0.0]
            lam[a] = 1.0 - t
            lam[b] = t
            nodes.append(tuple(lam))
    return nodes


_VERTICES = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]


def _lagrange_triangle_lattice(p: int) -> List[Tuple[int, int, int]]:
    """Integer barycentric lattice: vertices, edge nodes, then interior nodes."""
    lattice = [(p, 0, 0), (0, p, 0), (0, 0, p)]
    for a, b in ((0, 1), (1, 2), (2, 0)):
        for t in range(1, p):
            lam = [0, 0, 0]
            lam[a] = p - t
            lam[b] = t
            lattice.append(tuple(lam))
    for j in range(1, p):
        for k in range(1, p - j):
            lattice.append((p - j - k, j, k))
    return lattice


# ============================================================================
# Basis construction
# ============================================================================

def _interval_lagrange_basis(nodes: np.ndarray) -> PolynomialBasis:
    x = monomial(1)
    polys = []
    for i, xi in enumerate(nodes):
        phi = constant(1.0)
        for m, xm in enumerate(nodes):
            if m != i:
                phi = poly_mul(phi, poly_scale(poly_add(x, constant(-xm)), 1.0 / (xi - xm)))
        polys.append(phi)
    return PolynomialBasis.from_polynomials(polys, dim=1)


def _triangle_lagrange_basis(lattice: Sequence[Tuple[int, int, int]], p: int) -> PolynomialBasis:
    """Product-form equispaced Lagrange basis; exact nodal by construction."""
    lam = barycentric_polynomials(2)
    polys = []
    for node in lattice:
        phi = constant(1.0)
        for coord, count in enumerate(node):
            for a in range(count):
                factor = poly_add(poly_scale(lam[coord], float(p)), constant(-a))
                phi = poly_mul(phi, poly_scale(factor, 1.0 / (count - a)))
        polys.append(phi)
    return PolynomialBasis.from_polynomials(polys, dim=2)


def _lumped_triangle_span(p: int) -> List[np.ndarray]:
    """P_p plus the bubble enrichment of the mass-lumped elements."""
    span = [monomial(a, b) for a in range(p + 1) for b in range(p + 1 - a)]
    bubble = poly_mul(*barycentric_polynomials(2))
    if p == 2:
        span.append(bubble)
    elif p == 3:
        span.extend([poly_mul(bubble, monomial(1, 0)), poly_mul(bubble, monomial(0, 1))])
    return span


def _nodal_basis(span: Sequence[np.ndarray], nodes: np.ndarray) -> PolynomialBasis:
    spanning = PolynomialBasis.from_polynomials(span, dim=nodes.shape[1])
    vandermonde = spanning.values(nodes)
    coefficients = np.linalg.solve(vandermonde, np.eye(len(span)))
    return spanning.combine(coefficients)


def _moment_matched_weights(
    nodes: np.ndarray, classes: Sequence[Sequence[int]], degree: int
) -> np.ndarray:
    """Class-wise weights integrating every monomial x^a y^b, a + b <= degree."""
    exponents = [(a, b) for a in range(degree + 1) for b in range(degree + 1 - a)]
    system = np.array([
        [np.sum(nodes[cls, 0] ** a * nodes[cls, 1] ** b) for cls in classes]
        for a, b in exponents
    ])
    moments = np.array([monomial_integral(ElementShape.TRIANGLE, a, b) for a, b in exponents])
    class_weights, *_ = np.linalg.lstsq(system, moments, rcond=None)
    residual = np.max(np.abs(system @ class_weights - moments))
    if residual > MOMENT_TOLERANCE or np.any(class_weights <= 0.0):
        raise UnsupportedElementError(
            f"no positive lumping rule of degree {degree} for these nodes "
            f"(moment residual {residual:.2e})"
        )
    weights = np.empty(nodes.shape[0])
    for cls, w in zip(classes, class_weights):
        weights[list(cls)] = w
    return weights


def _build_gll(degree: int) -> ReferenceElement:
    x, w = gauss_lobatto(degree)
    nodes = x.reshape(-1, 1)
    return ReferenceElement(
        shape=ElementShape.INTERVAL,
        family=ElementFamily.SPECTRAL_GLL,
        degree=degree,
        nodes=nodes,
        barycentric=np.column_stack([1.0 - x, x]),
        basis=_interval_lagrange_basis(x),
        lump_weights=np.array(w),
        lump_exactness=2 * degree - 1,
    )


def _build_lumped_triangle(degree: int) -> ReferenceElement:
    bary = list(_VERTICES)
    classes = [range(0, 3)]
    if degree == 2:
        bary += _edge_nodes([0.5])
        bary.append((1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0))
        classes += [range(3, 6), range(6, 7)]
    elif degree == 3:
        alpha, beta = LUMPED_P3_EDGE_ALPHA, LUMPED_P3_INTERIOR_BETA
        bary += _edge_nodes([alpha, 1.0 - alpha])
        bary += [(1.0 - 2.0 * beta, beta, beta), (beta, 1.0 - 2.0 * beta, beta), (beta, beta, 1.0 - 2.0 * beta)]
        classes += [range(3, 9), range(9, 12)]

    bary = np.array(bary)
    nodes = _triangle_barycentric_to_reference(bary)
    exactness = LUMPED_TRIANGLE_EXACTNESS[degree]
    return ReferenceElement(
        shape=ElementShape.TRIANGLE,
        family=ElementFamily.LUMPED_TRIANGLE,
        degree=degree,
        nodes=nodes,
        barycentric=bary,
        basis=_nodal_basis(_lumped_triangle_span(degree), nodes),
        lump_weights=_moment_matched_weights(nodes, classes, exactness),
        lump_exactness=exactness,
    )


def _build_lagrange_triangle(degree: int) -> ReferenceElement:
    lattice = _lagrange_triangle_lattice(degree)
    bary = np.array(lattice, dtype=float) / degree
    return ReferenceElement(
        shape=ElementShape.TRIANGLE,
        family=ElementFamily.LAGRANGE,
        degree=degree,
        nodes=_triangle_barycentric_to_reference(bary),
        barycentric=bary,
        basis=_triangle_lagrange_basis(lattice, degree),
    )


# ============================================================================
# Public API
# ============================================================================

@lru_cache(maxsize=None)
def build_reference_element(shape: ElementShape, family: ElementFamily, degree: int) -> ReferenceElement:
    """Build (and cache) the reference element for a supported combination."""
    try:
        shape, family = ElementShape(shape), ElementFamily(family)
    except ValueError as e:
        raise UnsupportedElementError(str(e)) from e

    degrees = SUPPORTED.get((shape, family))
    if degrees is None or degree not in degrees:
        raise UnsupportedElementError(
            f"unsupported element {shape.value}/{family.value} of degree {degree}"
        )

    if family is ElementFamily.SPECTRAL_GLL:
        element = _build_gll(degree)
    elif family is ElementFamily.LUMPED_TRIANGLE:
        element = _build_lumped_triangle(degree)
    else:
        element = _build_lagrange_triangle(degree)

    logger.debug("reference_element_built", element=element.label, basis_dim=element.basis_dim)
    return element


def lumped_quadrature(elem: ReferenceElement) -> QuadratureRule:
    """Quadrature collocated with the basis nodes, giving a diagonal mass matrix."""
    if not elem.family.lumped:
        raise UnsupportedElementError(f"{elem.label} has no lumped quadrature")
    return QuadratureRule(
        points=elem.nodes,
        weights=elem.lump_weights,
        exactness_degree=elem.lump_exactness,
    )


def check_inside(elem: ReferenceElement, points: np.ndarray) -> None:
    tol = INSIDE_TOLERANCE
    if elem.shape is ElementShape.INTERVAL:
        inside = (points[:, 0] >= -tol) & (points[:, 0] <= 1.0 + tol)
    else:
        inside = (
            (points[:, 0] >= -tol)
            & (points[:, 1] >= -tol)
            & (points[:, 0] + points[:, 1] <= 1.0 + tol)
        )
    if not np.all(inside):
        raise ValueError(f"point outside the reference {elem.shape.value}")


def eval_basis(elem: ReferenceElement, point: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Basis values and reference gradients at one point or a batch of points.

    A single point gives shapes (basis_dim,) and (basis_dim, dim); a batch of
    n points gives (n, basis_dim) and (n, basis_dim, dim).
    """
    raw = np.asarray(point, dtype=float)
    single = raw.ndim == 0 or (raw.ndim == 1 and raw.size == elem.dim)
    points = raw.reshape(-1, elem.dim)
    check_inside(elem, points)

    values = elem.basis.values(points)
    gradients = elem.basis.gradients(points)
    if single:
        return values[0], gradients[0]
    return values, gradients
