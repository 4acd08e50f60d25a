"""
Polynomials Module

Monomial-coefficient polynomials on the reference interval and triangle.

A polynomial is a 2D array ``c`` with ``c[a, b]`` the coefficient of
``x**a * y**b``; interval polynomials simply have a single ``b`` column.
Products use ``scipy.signal.convolve2d``, derivatives use
``numpy.polynomial.polynomial.polyder``.
"""

from typing import List, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.signal import convolve2d


def monomial(a: int, b: int = 0) -> np.ndarray:
    c = np.zeros((a + 1, b + 1))
    c[a, b] = 1.0
    return c


def constant(value: float) -> np.ndarray:
    return np.array([[float(value)]])


def poly_add(*polys: np.ndarray) -> np.ndarray:
    rows = max(p.shape[0] for p in polys)
    cols = max(p.shape[1] for p in polys)
    out = np.zeros((rows, cols))
    for p in polys:
        out[: p.shape[0], : p.shape[1]] += p
    return out


def poly_scale(p: np.ndarray, factor: float) -> np.ndarray:
    return p * factor


def poly_mul(*polys: np.ndarray) -> np.ndarray:
    out = constant(1.0)
    for p in polys:
        out = convolve2d(out, p)
    return out


def poly_pow(p: np.ndarray, k: int) -> np.ndarray:
    out = constant(1.0)
    for _ in range(k):
        out = convolve2d(out, p)
    return out


def barycentric_polynomials(dim: int) -> List[np.ndarray]:
    """Barycentric coordinates (lambda_0, ..., lambda_dim) as polynomials.

    lambda_0 = 1 - x (- y), lambda_1 = x, lambda_2 = y.
    """
    if dim == 1:
        return [np.array([[1.0], [-1.0]]), monomial(1)]
    lam0 = np.array([[1.0, -1.0], [-1.0, 0.0]])
    return [lam0, monomial(1, 0), monomial(0, 1)]


def as_points(points: np.ndarray, dim: int) -> np.ndarray:
    """Coerce a single point or a point list to shape (n, dim)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, dim)
    if pts.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts


class PolynomialBasis:
    """An ordered stack of polynomials sharing one coefficient tensor."""

    def __init__(self, coefficients: np.ndarray, dim: int):
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.dim = dim

    @classmethod
    def from_polynomials(cls, polys: Sequence[np.ndarray], dim: int) -> "PolynomialBasis":
        rows = max(p.shape[0] for p in polys)
        cols = max(p.shape[1] for p in polys)
        stack = np.zeros((len(polys), rows, cols))
        for i, p in enumerate(polys):
            stack[i, : p.shape[0], : p.shape[1]] = p
        return cls(stack, dim)

    def __len__(self) -> int:
        return self.coefficients.shape[0]

    def combine(self, matrix: np.ndarray) -> "PolynomialBasis":
        """New basis with member k = sum_j matrix[j, k] * self[j]."""
        return PolynomialBasis(
            np.einsum("jk,jab->kab", matrix, self.coefficients), self.dim
        )

    def derivative(self, ax: int, ay: int = 0) -> "PolynomialBasis":
        c = self.coefficients
        if ax:
            c = npoly.polyder(c, m=ax, axis=1)
        if ay:
            c = npoly.polyder(c, m=ay, axis=2)
        return PolynomialBasis(c, self.dim)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Evaluate all members; returns shape (n_points, len(self))."""
        pts = as_points(points, self.dim)
        _, rows, cols = self.coefficients.shape
        vx = np.vander(pts[:, 0], rows, increasing=True)
        if self.dim == 1:
            vy = np.vander(np.zeros(pts.shape[0]), cols, increasing=True)
        else:
            vy = np.vander(pts[:, 1], cols, increasing=True)
        return np.einsum("pa,pb,nab->pn", vx, vy, self.coefficients)

    def gradients(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients; returns shape (n_points, len(self), dim)."""
        parts = [self.derivative(1, 0).values(points)]
        if self.dim == 2:
            parts.append(self.derivative(0, 1).values(points))
        return np.stack(parts, axis=-1)
