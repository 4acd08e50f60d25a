"""
Quadrature Module

Gauss-Legendre and Gauss-Lobatto-Legendre rules on [0, 1], and symmetric
positive-weight triangle rules on the unit triangle (0,0), (1,0), (0,1).
"""

from functools import lru_cache
from math import factorial
from typing import Tuple

import modepy
import numpy as np
import structlog
from numpy.polynomial import legendre

from src.models.element import ElementShape, QuadratureRule
from src.utils.errors import UnsupportedElementError


logger = structlog.get_logger(__name__)

MAX_TRIANGLE_DEGREE = 12


def _frozen(*arrays: np.ndarray) -> Tuple[np.ndarray, ...]:
    for a in arrays:
        a.setflags(write=False)
    return arrays


@lru_cache(maxsize=None)
def gauss_legendre(n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule mapped to [0, 1]."""
    x, w = legendre.leggauss(n_points)
    return _frozen(0.5 * (x + 1.0), 0.5 * w)


@lru_cache(maxsize=None)
def gauss_lobatto(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """(degree+1)-point Gauss-Lobatto-Legendre rule mapped to [0, 1].

    Interior nodes are the roots of P_degree'; weights 2/(n(n+1) P_n(x)^2)
    on [-1, 1].
    """
    if degree < 1:
        raise UnsupportedElementError(f"GLL rule needs degree >= 1, got {degree}")
    p_n = legendre.Legendre.basis(degree)
    interior = np.sort(p_n.deriv().roots().real) if degree > 1 else np.zeros(0)
    x = np.concatenate([[-1.0], interior, [1.0]])
    w = 2.0 / (degree * (degree + 1) * p_n(x) ** 2)
    return _frozen(0.5 * (x + 1.0), 0.5 * w)


def _triangle_rule(degree: int) -> Tuple[np.ndarray, np.ndarray, int]:
    if degree <= 1:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5]), 1
    if degree == 2:
        points = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        return points, np.full(3, 1.0 / 6.0), 2
    rule = modepy.XiaoGimbutasSimplexQuadrature(degree, 2)
    # biunit triangle (-1,-1), (1,-1), (-1,1) -> unit triangle
    points = 0.5 * (np.asarray(rule.nodes).T + 1.0)
    weights = 0.25 * np.asarray(rule.weights)
    return points, weights, degree


@lru_cache(maxsize=None)
def volume_quadrature(shape: ElementShape, exactness_degree: int) -> QuadratureRule:
    """Positive-weight rule integrating polynomials up to ``exactness_degree``."""
    shape = ElementShape(shape)
    if exactness_degree < 0:
        raise UnsupportedElementError(f"negative quadrature degree {exactness_degree}")

    if shape is ElementShape.INTERVAL:
        n_points = exactness_degree // 2 + 1
        x, w = gauss_legendre(n_points)
        return QuadratureRule(
            points=x.reshape(-1, 1),
            weights=w,
            exactness_degree=2 * n_points - 1,
        )

    if exactness_degree > MAX_TRIANGLE_DEGREE:
        raise UnsupportedElementError(
            f"triangle quadrature of degree {exactness_degree} exceeds "
            f"the tabulated maximum {MAX_TRIANGLE_DEGREE}"
        )
    points, weights, exact = _triangle_rule(exactness_degree)
    points, weights = _frozen(points, weights)
    return QuadratureRule(points=points, weights=weights, exactness_degree=exact)


def monomial_integral(shape: ElementShape, a: int, b: int = 0) -> float:
    """Exact integral of x^a y^b over the reference cell."""
    if ElementShape(shape) is ElementShape.INTERVAL:
        return 1.0 / (a + 1)
    return factorial(a) * factorial(b) / factorial(a + b + 2)
