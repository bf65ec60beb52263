"""The source-to-potential map: split solve, linearity, energy identity."""

import numpy as np
import pytest

from sbpbox import (
    BoundaryData,
    Grid,
    IncompatibleData,
    LinearSolveOptions,
    PotentialPair,
    biharmonic_form,
    inner,
    integrate,
    interaction_energy,
    mean,
    norm_l2,
    phi_map,
    solve_fourth_order_split,
)
from sbpbox.dense import solve_fourth_order_dense
from conftest import TIGHT, line_problem, random_m_point, square_problem


def test_split_solution_properties():
    g = Grid(lengths=(1.0, 1.0), n=(17, 17))
    rng = np.random.default_rng(0)
    f = rng.standard_normal(g.shape)
    pair = solve_fourth_order_split(g, f, None, None, TIGHT)
    # Both components carry the zero-mean gauge when the fluxes vanish.
    assert abs(mean(g, pair.phi)) <= 1e-11
    assert abs(mean(g, pair.psi)) <= 1e-11


def test_split_matches_dense_oracle():
    for dim, n in ((1, 17), (2, 9)):
        g = Grid(lengths=(1.0,) * dim, n=(n,) * dim)
        rng = np.random.default_rng(1)
        f = rng.standard_normal(g.shape)
        pair = solve_fourth_order_split(g, f, None, None, TIGHT)
        phi_d, psi_d = solve_fourth_order_dense(g, f)
        scale = 1.0 + np.abs(phi_d).max()
        assert np.abs(pair.phi - phi_d).max() <= 1e-8 * scale
        assert np.abs(pair.psi - psi_d).max() <= 1e-8 * scale


def test_split_linearity():
    g = Grid(lengths=(1.0,), n=(65,))
    rng = np.random.default_rng(2)
    f1 = rng.standard_normal(g.shape)
    f2 = rng.standard_normal(g.shape)
    a, b = 2.5, -1.25
    p1 = solve_fourth_order_split(g, f1, None, None, TIGHT)
    p2 = solve_fourth_order_split(g, f2, None, None, TIGHT)
    p12 = solve_fourth_order_split(g, a * f1 + b * f2, None, None, TIGHT)
    scale = 1.0 + np.abs(p12.phi).max()
    assert np.abs(p12.phi - (a * p1.phi + b * p2.phi)).max() <= 1e-8 * scale
    assert np.abs(p12.psi - (a * p1.psi + b * p2.psi)).max() <= 1e-8 * scale


def test_split_eigenfunction_second_order():
    """cos(pi x) is an eigenfunction of the map: zero mean, zero fluxes,
    image cos(pi x) / (pi^4 + pi^2).  Observed order must be 2.0 +- 0.1."""
    lam = 1.0 / (np.pi ** 4 + np.pi ** 2)
    errs = []
    for n in (33, 65, 129, 257):
        g = Grid(lengths=(1.0,), n=(n,))
        f = np.cos(np.pi * g.coords[0])
        pair = solve_fourth_order_split(g, f, None, None, TIGHT)
        errs.append(np.abs(pair.phi - lam * f).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) <= 0.1)


def test_split_flux_compatibility_enforced():
    g = Grid(lengths=(1.0,), n=(33,))
    f = np.zeros(g.shape)
    g1 = BoundaryData.constant(g, {"x1": 0.5})
    g2 = BoundaryData.constant(g, {"x1": 0.25})  # surface integrals differ
    with pytest.raises(IncompatibleData):
        solve_fourth_order_split(g, f, g1, g2, TIGHT)


def test_split_warm_start_agrees():
    g = Grid(lengths=(1.0,), n=(65,))
    rng = np.random.default_rng(3)
    f = rng.standard_normal(g.shape)
    cold = solve_fourth_order_split(g, f, None, None, TIGHT)
    warm = solve_fourth_order_split(g, 1.001 * f, None, None, TIGHT,
                                    warm=cold)
    again = solve_fourth_order_split(g, 1.001 * f, None, None, TIGHT)
    assert np.abs(warm.phi - again.phi).max() <= 1e-9


def test_phi_map_even_bitwise(bench129):
    rng = np.random.default_rng(4)
    u = random_m_point(bench129, rng)
    a = phi_map(bench129, u)
    b = phi_map(bench129, -u)
    assert np.array_equal(a.phi, b.phi)
    assert np.array_equal(a.psi, b.psi)


@pytest.mark.parametrize("make,n_samples", [
    (lambda: line_problem(129), 8),
    (lambda: square_problem(17), 5),
])
def test_interaction_energy_identity(make, n_samples):
    """The energy of the generated potential equals its source pairing:
    b(phi_u, phi_u) == integrate(q u^2 phi_u) by the discrete Green
    identities, up to solver tolerance only."""
    prob = make()
    rng = np.random.default_rng(5)
    for _ in range(n_samples):
        u = rng.standard_normal(prob.grid.shape)
        pair = phi_map(prob, u)
        lhs = biharmonic_form(prob.grid, pair)
        rhs = interaction_energy(prob, u, pair)
        assert abs(lhs - rhs) <= 1e-7 * abs(rhs)


def test_biharmonic_form_symmetric_bilinear():
    prob = line_problem(65)
    rng = np.random.default_rng(6)
    u = rng.standard_normal(prob.grid.shape)
    v = rng.standard_normal(prob.grid.shape)
    pu, pv = phi_map(prob, u), phi_map(prob, v)
    ab = biharmonic_form(prob.grid, pu, pv)
    ba = biharmonic_form(prob.grid, pv, pu)
    assert ab == pytest.approx(ba, rel=1e-12)
    aa = biharmonic_form(prob.grid, pu)
    assert aa == pytest.approx(biharmonic_form(prob.grid, pu, pu), rel=1e-12)
    assert aa >= 0.0


def test_from_phi_matches_solver_psi():
    g = Grid(lengths=(1.0,), n=(65,))
    rng = np.random.default_rng(7)
    f = rng.standard_normal(g.shape)
    pair = solve_fourth_order_split(g, f, None, None, TIGHT)
    rebuilt = PotentialPair.from_phi(g, pair.phi)
    # psi is the stencil Laplacian of phi up to the solve tolerance.
    assert norm_l2(g, rebuilt.psi - pair.psi) <= 1e-7 * (1.0 + norm_l2(g, pair.psi))


def test_phi_map_source_mean_projection(bench65):
    """The generated potential only sees the zero-mean part of q u^2, so
    adding a constant to the source through u cannot leak in: the potential
    of u and of the explicitly projected source agree."""
    rng = np.random.default_rng(8)
    u = rng.standard_normal(bench65.grid.shape)
    pair = phi_map(bench65, u)
    src = bench65.q * u * u
    direct = solve_fourth_order_split(bench65.grid, src - mean(bench65.grid, src),
                                      None, None, bench65.solver)
    assert np.abs(pair.phi - direct.phi).max() <= 1e-10
