"""Problem assembly: coupling families, the auxiliary potential, alpha."""

import math

import numpy as np
import pytest

from sbpbox import (
    BoundaryData,
    ConsistencyViolation,
    CouplingSpec,
    Grid,
    boundary_integrate,
    build_problem,
    classify_alpha,
    compute_alpha,
    fourth_order_chi_residual,
    integrate,
    mean,
    solve_chi,
    write_field,
)
from conftest import TIGHT, line_problem, square_problem


def test_compute_alpha_flux_gap():
    g = Grid(lengths=(1.0,), n=(17,))
    h1 = BoundaryData.constant(g, {"x0": 0.25})
    h2 = BoundaryData.constant(g, {"x1": 0.5, "x0": 0.125})
    # 1d faces are points: surface integrals are plain sums of face values.
    assert compute_alpha(g, h1, h2) == pytest.approx(0.5 + 0.125 - 0.25)
    g2 = Grid(lengths=(2.0, 1.0), n=(9, 9))
    h1 = BoundaryData.zero(g2)
    h2 = BoundaryData.constant(g2, {"y1": 0.5})  # edge of length 2
    assert compute_alpha(g2, h1, h2) == pytest.approx(1.0)


def test_coupling_affine_and_oscillating():
    g = Grid(lengths=(2.0,), n=(33,))
    x = g.coords[0]
    q = CouplingSpec("affine", {"a": 1.0, "b": 0.25}).evaluate(g)
    assert np.allclose(q, 1.0 + 0.25 * x, atol=1e-14)
    q = CouplingSpec("oscillating",
                     {"base": 1.0, "amplitude": 0.5, "cycles": 2,
                      "tilt": 0.1}).evaluate(g)
    expect = 1.0 + 0.5 * np.sin(2.0 * math.pi * 2 * x / 2.0) + 0.1 * x / 2.0
    assert np.allclose(q, expect, atol=1e-12)


def test_coupling_radial_bump_support():
    g = Grid(lengths=(1.0, 1.0), n=(33, 33))
    spec = CouplingSpec("radial_bump", {"base": 0.5, "height": 2.0,
                                        "center": (0.5, 0.5), "radius": 0.25})
    q = spec.evaluate(g)
    x, y = g.coords
    outside = (x - 0.5) ** 2 + (y - 0.5) ** 2 > 0.25 ** 2
    assert np.allclose(q[outside], 0.5)
    assert q.max() == pytest.approx(2.5)


def test_coupling_tabulated_roundtrip(tmp_path):
    g = Grid(lengths=(1.0,), n=(17,))
    values = 1.0 + np.linspace(0.0, 1.0, 17) ** 2
    path = tmp_path / "q.csv"
    write_field(path, g, values)
    q = CouplingSpec("tabulated", {"path": str(path)}).evaluate(g)
    assert np.array_equal(q, values)
    other = Grid(lengths=(1.0,), n=(33,))
    with pytest.raises(ValueError):
        CouplingSpec("tabulated", {"path": str(path)}).evaluate(other)


def test_coupling_unknown_kind():
    g = Grid(lengths=(1.0,), n=(9,))
    with pytest.raises(ValueError):
        CouplingSpec("quadratic", {}).evaluate(g)


def test_build_problem_validation():
    g = Grid(lengths=(1.0,), n=(17,))
    zero = BoundaryData.zero(g)
    spec = CouplingSpec("affine", {"a": 1.0, "b": 1.0})
    with pytest.raises(ValueError):
        build_problem(grid=g, coupling=spec, h1=zero, h2=zero,
                      kappa=1.0, p=2.0)  # exponent at the window edge
    with pytest.raises(ValueError):
        build_problem(grid=g, coupling=spec, h1=zero, h2=zero,
                      kappa=1.0, p=10.0 / 3.0)
    with pytest.raises(ValueError):
        build_problem(grid=g, coupling=spec, h1=zero, h2=zero,
                      kappa=-1.0, p=3.0)
    q = np.full(g.shape, np.nan)
    with pytest.raises(ValueError):
        build_problem(grid=g, coupling=q, h1=zero, h2=zero, kappa=1.0, p=3.0)


def test_problem_records_alpha_and_q_range():
    prob = line_problem(33, alpha=0.5)
    assert prob.alpha == pytest.approx(0.5, abs=1e-12)
    assert prob.q_range == (0.0, 1.0)
    assert np.array_equal(prob.q_chi, prob.q * prob.chi)


def manufactured_chi(alpha):
    """chi* = 2 cosh(x) + beta x^2 on (0,1) solves the fourth-order problem
    with alpha = -2 beta: both homogeneous-solution pieces have matching
    first and third derivative fluxes, the quadratic supplies the gap."""
    beta = -alpha / 2.0

    def chi_exact(x):
        return 2.0 * np.cosh(x) + beta * x * x

    def mk(n):
        g = Grid(lengths=(1.0,), n=(n,))
        h1 = BoundaryData.constant(
            g, {"x0": 0.0, "x1": 2.0 * math.sinh(1.0) + 2.0 * beta})
        h2 = BoundaryData.constant(g, {"x0": 0.0, "x1": 2.0 * math.sinh(1.0)})
        return g, h1, h2

    return chi_exact, mk


def test_chi_manufactured_second_order():
    chi_exact, mk = manufactured_chi(0.7)
    errs = []
    for n in (33, 65, 129, 257):
        g, h1, h2 = mk(n)
        chi, theta, alpha = solve_chi(g, h1, h2, opts=TIGHT)
        assert alpha == pytest.approx(0.7, abs=1e-12)
        assert abs(mean(g, chi)) <= 1e-12
        target = chi_exact(g.coords[0])
        target -= mean(g, target)
        errs.append(np.abs(chi - target).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.1)


def test_chi_theta_mean_identity():
    """integrate(theta) equals the surface integral of h1 on every run; the
    identity is structural, it holds for arbitrary (not just manufactured)
    boundary data."""
    g = Grid(lengths=(1.0, 1.0), n=(17, 17))
    h1 = BoundaryData.constant(g, {"x0": 0.2, "y1": -0.1})
    h2 = BoundaryData.constant(g, {"x1": 0.4})
    chi, theta, alpha = solve_chi(g, h1, h2, opts=TIGHT)
    surf = boundary_integrate(g, h1)
    scale = 1.0 + abs(alpha)
    assert abs(integrate(g, theta) - surf) <= 5e-8 * scale
    assert abs(mean(g, chi)) <= 1e-12


def test_chi_consistency_violation_detected():
    """A doctored check tolerance turns the benign solver residual into an
    error; guards that the identity really is being measured."""
    g = Grid(lengths=(1.0,), n=(33,))
    h1 = BoundaryData.constant(g, {"x1": 0.3})
    h2 = BoundaryData.constant(g, {"x1": 0.5})
    with pytest.raises(ConsistencyViolation):
        solve_chi(g, h1, h2, check_tolerance=1e-18)


def test_chi_native_residual_small():
    prob = line_problem(65, alpha=0.5)
    res = fourth_order_chi_residual(prob.grid, prob.chi, prob.h1, prob.h2,
                                    prob.alpha)
    # The native stencil reproduces the discrete equation chi solves, so the
    # residual sits at solver tolerance, not at discretization error.
    assert res <= 1e-6


def test_classify_alpha_regimes():
    assert classify_alpha(line_problem(33, alpha=0.5)).classification == "interior"
    assert classify_alpha(line_problem(33, alpha=1.5)).classification == "infeasible"
    assert classify_alpha(line_problem(33, alpha=-0.2)).classification == "infeasible"
    rep = classify_alpha(line_problem(33, alpha=1.0 - 1e-12))
    assert rep.classification == "boundary_degenerate"
    assert rep.feasible is (rep.classification == "interior")


def test_classify_alpha_constant_coupling():
    g = Grid(lengths=(1.0,), n=(33,))
    h1 = BoundaryData.zero(g)
    h2 = BoundaryData.constant(g, {"x1": 2.0})
    prob = build_problem(grid=g, coupling=np.full(g.shape, 2.0),
                         h1=h1, h2=h2, kappa=1.0, p=3.0)
    rep = classify_alpha(prob)
    # alpha == q everywhere: degenerate edge with a full level set.
    assert rep.classification == "boundary_degenerate"
    assert rep.level_set_fraction == pytest.approx(1.0)


def test_classify_level_set_fraction_scales():
    """For affine q the measure of {|q - alpha| <= eps} grows linearly in
    eps, so the reported fraction roughly doubles when level_rel doubles."""
    prob = line_problem(257, alpha=0.5)
    f1 = classify_alpha(prob, level_rel=1e-2).level_set_fraction
    f2 = classify_alpha(prob, level_rel=2e-2).level_set_fraction
    assert 0.0 < f1 < f2 <= 1.0
    assert f2 == pytest.approx(2.0 * f1, rel=0.35)


def test_square_problem_assembles():
    prob = square_problem(17)
    assert prob.grid.dim == 2
    assert prob.alpha == pytest.approx(0.0, abs=1e-12)
    assert classify_alpha(prob).classification == "infeasible"
