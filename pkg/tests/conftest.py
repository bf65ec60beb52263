"""Shared builders for the test suite.

The 1d benchmark (q = x, alpha = 0.5, kappa = 1, p = 3 on the unit
interval) is the workhorse: it is cheap, has non-constant coupling, and its
converged numbers are frozen in several regression tests.  Expensive solves
are session-scoped so the suite pays for each of them once.
"""

import numpy as np
import pytest

from sbpbox import (
    BoundaryData,
    CouplingSpec,
    Grid,
    LinearSolveOptions,
    build_problem,
)
from sbpbox.manifold import feasible_init, retract
from sbpbox.optimize import OptimizerOptions, minimize_on_M, polish_positive

TIGHT = LinearSolveOptions(rel_tolerance=1e-12)


def line_problem(n, alpha=0.5, kappa=1.0, p=3.0, coupling=None,
                 solver=LinearSolveOptions()):
    """Unit-interval problem with flux-generated alpha on the right face."""
    g = Grid(lengths=(1.0,), n=(n,))
    h1 = BoundaryData.zero(g)
    h2 = BoundaryData.constant(g, {"x1": alpha})
    if coupling is None:
        coupling = CouplingSpec("affine", {"a": 0.0, "b": 1.0})
    return build_problem(grid=g, coupling=coupling, h1=h1, h2=h2,
                         kappa=kappa, p=p, solver=solver)


def square_problem(n, alpha=0.0, kappa=1.0, p=3.0,
                   solver=LinearSolveOptions()):
    """Unit-square problem with affine coupling q = 1 + 0.5 x."""
    g = Grid(lengths=(1.0, 1.0), n=(n, n))
    h1 = BoundaryData.zero(g)
    if alpha:
        h2 = BoundaryData.constant(g, {"x1": alpha})
    else:
        h2 = BoundaryData.zero(g)
    return build_problem(grid=g,
                         coupling=CouplingSpec("affine", {"a": 1.0, "b": 0.5}),
                         h1=h1, h2=h2, kappa=kappa, p=p, solver=solver)


def oscillating_problem(n, alpha=0.35, kappa=20.0):
    """Multi-well coupling whose troughs sit below alpha: traps distinct
    single-lump states in separate wells."""
    g = Grid(lengths=(1.0,), n=(n,))
    h1 = BoundaryData.zero(g)
    h2 = BoundaryData.constant(g, {"x1": alpha})
    spec = CouplingSpec("oscillating", {"base": 1.0, "amplitude": 0.9,
                                        "cycles": 3, "tilt": 0.1})
    return build_problem(grid=g, coupling=spec, h1=h1, h2=h2,
                         kappa=kappa, p=3.0)


def random_m_point(problem, rng, scale=1.0):
    """A random point on the constraint manifold: noise bump -> retract."""
    g = problem.grid
    v = rng.standard_normal(g.shape) * scale
    window = np.ones(g.shape)
    for c, length in zip(g.coords, g.lengths):
        window *= np.sin(np.pi * c / length)
    v = v * window + 2.0 * window
    return retract(problem, v)


@pytest.fixture(scope="session")
def bench65():
    return line_problem(65)


@pytest.fixture(scope="session")
def bench129():
    return line_problem(129)


@pytest.fixture(scope="session")
def bench65_state(bench65):
    res = minimize_on_M(bench65, feasible_init(bench65),
                        OptimizerOptions(seed=0))
    return polish_positive(bench65, res)


@pytest.fixture(scope="session")
def bench129_state(bench129):
    res = minimize_on_M(bench129, feasible_init(bench129),
                        OptimizerOptions(seed=0))
    return polish_positive(bench129, res)
