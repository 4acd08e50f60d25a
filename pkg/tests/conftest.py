"""
Shared pytest configuration and fixtures.
"""

import pytest

from src.fem.assembly import assemble_operators, build_space
from src.fem.mesh import generate_interval_mesh, generate_square_mesh
from src.fem.reference_elements import build_reference_element
from src.models.element import ElementFamily, ElementShape
from src.problems.catalog import get_problem


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run 2D convergence sweeps")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running convergence sweep")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def periodic_problem():
    """The layered periodic benchmark."""
    return get_problem("periodic1d")


@pytest.fixture
def square_problem():
    """The warped-square benchmark with its source term."""
    return get_problem("square2d")


@pytest.fixture
def interval_ops(periodic_problem):
    """Degree-2 GLL operators on the N=5 periodic mesh."""
    mesh = generate_interval_mesh(5)
    element = build_reference_element(ElementShape.INTERVAL, ElementFamily.SPECTRAL_GLL, 2)
    space = build_space(mesh, element)
    return assemble_operators(
        space, periodic_problem.rho, periodic_problem.c, coefficients_vary=False
    )


@pytest.fixture
def square_ops(square_problem):
    """Degree-1 mass-lumped operators on the coarsest square mesh."""
    mesh = generate_square_mesh(1)
    element = build_reference_element(ElementShape.TRIANGLE, ElementFamily.LUMPED_TRIANGLE, 1)
    space = build_space(mesh, element)
    return assemble_operators(space, square_problem.rho, square_problem.c)
