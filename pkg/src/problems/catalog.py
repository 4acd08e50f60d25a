"""
Problem Catalog Module

The three benchmark problems: a periodic 1D medium with a sharp contrast,
a Dirichlet square with smooth variable coefficients and a source, and
the unit disk eigenmode. Every problem supplies closed-form k-th time
derivatives of its exact solution and source.
"""

from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field
from scipy import special

from src.utils.errors import ProblemError


logger = structlog.get_logger(__name__)

# First positive root of J_2
DISK_WAVENUMBER = 5.135622301840683
DEFAULT_PHASE = 0.5
SQUARE_AMPLITUDE = 0.1
SMALL_RADIUS = 1e-8

# (x, hint) -> values; hint is the centroid of the element x was sampled in
SpatialFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
# (x, t, k) -> k-th time derivative at x
TimeFamily = Callable[[np.ndarray, float, int], np.ndarray]
# (x, t, k, hint) -> spatial gradient of the k-th time derivative, (n, dim)
GradientFamily = Callable[[np.ndarray, float, int, np.ndarray], np.ndarray]


class BoundaryKind(str, Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"


class ProblemId(str, Enum):
    PERIODIC_1D = "periodic1d"
    SQUARE_2D = "square2d"
    CIRCLE_2D = "circle2d"


class ProblemSpec(BaseModel):
    """Coefficients, exact solution family and source family of a benchmark."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: ProblemId
    dim: int = Field(ge=1, le=2)
    domain: str
    T: float = Field(gt=0.0)
    phase: float = 0.0
    boundary: BoundaryKind
    rho: SpatialFunction
    c: SpatialFunction
    u_exact: TimeFamily
    grad_u: GradientFamily
    source: Optional[TimeFamily] = None
    source_max_order: Optional[int] = None
    coefficients_vary: bool = True
    wave_speed_range: Tuple[float, float]

    @property
    def has_source(self) -> bool:
        return self.source is not None

    def source_derivative(self, x: np.ndarray, t: float, k: int) -> np.ndarray:
        """k-th time derivative of f; zero for source-free problems."""
        if self.source is None:
            return np.zeros(x.shape[0])
        if self.source_max_order is not None and k > self.source_max_order:
            raise ProblemError(
                f"{self.id.value} has no source derivative of order {k} "
                f"(available up to {self.source_max_order})"
            )
        return self.source(x, t, k)

    def wave_speed(self, x: np.ndarray, hint: np.ndarray) -> np.ndarray:
        return np.sqrt(self.c(x, hint) / self.rho(x, hint))


def _harmonic(omega: float, phase: float, t: float, k: int) -> float:
    """d^k/dt^k cos(omega t + phase)."""
    return omega ** k * np.cos(omega * t + phase + k * np.pi / 2.0)


# ============================================================================
# periodic1d
# ============================================================================

PERIODIC_INTERFACE = 1.0


def _slow_side(hint: np.ndarray) -> np.ndarray:
    """True where the sample belongs to the (1, 5) part of the medium."""
    return hint[:, 0] > PERIODIC_INTERFACE


def _periodic_rho(x: np.ndarray, hint: np.ndarray) -> np.ndarray:
    return np.where(_slow_side(hint), 0.25, 1.0)


def _periodic_c(x: np.ndarray, hint: np.ndarray) -> np.ndarray:
    return np.where(_slow_side(hint), 4.0, 1.0)


def travel_coordinate(x: np.ndarray) -> np.ndarray:
    """X(x) = x on (0, 1), x/4 + 3/4 on (1, 5); continuous at the interface."""
    s = x[:, 0]
    return np.where(s <= PERIODIC_INTERFACE, s, 0.25 * s + 0.75)


def _periodic_u(x: np.ndarray, t: float, k: int) -> np.ndarray:
    omega = 2.0 * np.pi
    phase = omega * (travel_coordinate(x) - t)
    return omega ** k * np.sin(phase - k * np.pi / 2.0)


def _periodic_grad(x: np.ndarray, t: float, k: int, hint: np.ndarray) -> np.ndarray:
    omega = 2.0 * np.pi
    slope = np.where(_slow_side(hint), 0.25, 1.0)
    phase = omega * (travel_coordinate(x) - t)
    return (slope * omega ** (k + 1) * np.cos(phase - k * np.pi / 2.0))[:, None]


def _periodic_problem() -> ProblemSpec:
    return ProblemSpec(
        id=ProblemId.PERIODIC_1D,
        dim=1,
        domain="periodic interval (0, 5), interface at x = 1",
        T=10.0,
        phase=0.0,
        boundary=BoundaryKind.PERIODIC,
        rho=_periodic_rho,
        c=_periodic_c,
        u_exact=_periodic_u,
        grad_u=_periodic_grad,
        coefficients_vary=False,
        wave_speed_range=(1.0, 4.0),
    )


# ============================================================================
# square2d
# ============================================================================

def _warp(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """X(s) = s + sin(pi s)/10 and its derivative."""
    return (
        s + SQUARE_AMPLITUDE * np.sin(np.pi * s),
        1.0 + SQUARE_AMPLITUDE * np.pi * np.cos(np.pi * s),
    )


def _square_rho(x: np.ndarray, hint: np.ndarray) -> np.ndarray:
    _, dX = _warp(x[:, 0])
    _, dY = _warp(x[:, 1])
    return (dX ** 2 + dY ** 2) / (2.0 * dX * dY)


def _square_c(x: np.ndarray, hint: np.ndarray) -> np.ndarray:
    _, dX = _warp(x[:, 0])
    _, dY = _warp(x[:, 1])
    return 1.0 / (dX * dY)


def _square_shape(x: np.ndarray) -> np.ndarray:
    X, _ = _warp(x[:, 0])
    Y, _ = _warp(x[:, 1])
    return np.sin(2.0 * np.pi * X) * np.sin(2.0 * np.pi * Y)


def _square_shape_grad(x: np.ndarray) -> np.ndarray:
    X, dX = _warp(x[:, 0])
    Y, dY = _warp(x[:, 1])
    two_pi = 2.0 * np.pi
    return np.column_stack([
        two_pi * dX * np.cos(two_pi * X) * np.sin(two_pi * Y),
        two_pi * dY * np.sin(two_pi * X) * np.cos(two_pi * Y),
    ])


def _square_problem(phase: float) -> ProblemSpec:
    omega = 2.0 * np.pi
    bound = SQUARE_AMPLITUDE * np.pi

    def u_exact(x: np.ndarray, t: float, k: int) -> np.ndarray:
        return _square_shape(x) * _harmonic(omega, phase, t, k)

    def grad_u(x: np.ndarray, t: float, k: int, hint: np.ndarray) -> np.ndarray:
        return _square_shape_grad(x) * _harmonic(omega, phase, t, k)

    def source(x: np.ndarray, t: float, k: int) -> np.ndarray:
        return 4.0 * np.pi ** 2 * _square_shape(x) * _harmonic(omega, phase, t, k)

    return ProblemSpec(
        id=ProblemId.SQUARE_2D,
        dim=2,
        domain="unit square (0, 1)^2, zero Dirichlet",
        T=50.0,
        phase=phase,
        boundary=BoundaryKind.DIRICHLET,
        rho=_square_rho,
        c=_square_c,
        u_exact=u_exact,
        grad_u=grad_u,
        source=source,
        wave_speed_range=(1.0 / (1.0 + bound), 1.0 / (1.0 - bound)),
    )


# ============================================================================
# circle2d
# ============================================================================

def bessel_j2(x: np.ndarray) -> np.ndarray:
    """Bessel function of the first kind of order 2."""
    return special.jv(2, x)


def _radial_profile(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """G(r) = J2(kappa r)/r^2 and G'(r)/r, both regular at r = 0."""
    kappa = DISK_WAVENUMBER
    small = r < SMALL_RADIUS
    safe = np.where(small, 1.0, r)
    G = special.jv(2, kappa * safe) / safe ** 2
    dG = kappa * special.jvp(2, kappa * safe) / safe ** 2 - 2.0 * special.jv(2, kappa * safe) / safe ** 3
    G = np.where(small, kappa ** 2 / 8.0, G)
    dG_over_r = np.where(small, -(kappa ** 4) / 48.0, dG / safe)
    return G, dG_over_r


def _disk_shape(x: np.ndarray) -> np.ndarray:
    r = np.hypot(x[:, 0], x[:, 1])
    G, _ = _radial_profile(r)
    # J2(kappa r) cos(2 theta) = G(r) (x^2 - y^2)
    return G * (x[:, 0] ** 2 - x[:, 1] ** 2)


def _disk_shape_grad(x: np.ndarray) -> np.ndarray:
    r = np.hypot(x[:, 0], x[:, 1])
    G, dG_over_r = _radial_profile(r)
    q = x[:, 0] ** 2 - x[:, 1] ** 2
    return np.column_stack([
        dG_over_r * q * x[:, 0] + 2.0 * G * x[:, 0],
        dG_over_r * q * x[:, 1] - 2.0 * G * x[:, 1],
    ])


def _unit(x: np.ndarray, hint: np.ndarray) -> np.ndarray:
    return np.ones(x.shape[0])


def _circle_problem(phase: float) -> ProblemSpec:
    kappa = DISK_WAVENUMBER

    def u_exact(x: np.ndarray, t: float, k: int) -> np.ndarray:
        return _disk_shape(x) * _harmonic(kappa, phase, t, k)

    def grad_u(x: np.ndarray, t: float, k: int, hint: np.ndarray) -> np.ndarray:
        return _disk_shape_grad(x) * _harmonic(kappa, phase, t, k)

    return ProblemSpec(
        id=ProblemId.CIRCLE_2D,
        dim=2,
        domain="unit disk, zero Dirichlet, curved boundary elements",
        T=50.0,
        phase=phase,
        boundary=BoundaryKind.DIRICHLET,
        rho=_unit,
        c=_unit,
        u_exact=u_exact,
        grad_u=grad_u,
        coefficients_vary=False,
        wave_speed_range=(1.0, 1.0),
    )


# ============================================================================
# Public API
# ============================================================================

_BUILDERS: Dict[ProblemId, Callable[[float], ProblemSpec]] = {
    ProblemId.PERIODIC_1D: lambda phase: _periodic_problem(),
    ProblemId.SQUARE_2D: _square_problem,
    ProblemId.CIRCLE_2D: _circle_problem,
}


def get_problem(problem_id: str, phase: float = DEFAULT_PHASE) -> ProblemSpec:
    """Look up a benchmark by id."""
    try:
        key = ProblemId(problem_id)
    except ValueError:
        valid = ", ".join(p.value for p in ProblemId)
        raise ProblemError(f"unknown problem '{problem_id}' (expected one of {valid})") from None
    return _BUILDERS[key](phase)


def with_final_time(problem: ProblemSpec, T: float) -> ProblemSpec:
    """Copy of ``problem`` integrated to a different final time."""
    if T <= 0.0:
        raise ProblemError(f"final time must be positive, got {T}")
    return problem.model_copy(update={"T": T})
