"""A-posteriori checks against the original strong-form system.

A converged reduced state (u, omega, mu) is certified by reconstructing the
full potential phi = phi_u + chi + mu and measuring, with discretizations
that are independent of the ones used during optimization where possible:

  * the single-particle equation through a wide fourth-order Laplacian
    stencil on the deep interior (independent of the optimizer's three-point
    stencil, so agreement is evidence rather than tautology);
  * the fourth-order potential equation through the native factored stencils
    (this one certifies the splitting plumbing and the solver tolerance);
  * both flux conditions through one-sided second-order boundary derivatives;
  * the two constraint integrals.

``refinement_study`` repeats a solve over a sequence of grids and reports
observed convergence orders; ``dense_oracle_compare`` cross-checks every
iterative solver against LU factorizations of explicitly assembled matrices;
``dense_kkt_polish`` runs a dense Newton iteration on the full stationarity
system, giving an optimizer-independent value for (u, omega, mu, J).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .dense import (
    check_size,
    dirichlet_laplacian_matrix,
    fourth_order_matrix_dense,
    neumann_laplacian_matrix,
    solve_fourth_order_dense,
    solve_helmholtz_dense,
    solve_poisson_dirichlet_dense,
    solve_poisson_neumann_dense,
    weight_vector,
)
from .errors import NewtonDivergence
from .functional import eval_J
from .grid import (
    BoundaryData,
    Grid,
    inner,
    laplacian_dirichlet,
    laplacian_neumann,
    mean,
    norm_l2,
)
from .manifold import feasible_init
from .optimize import OptimizerOptions, SolveResult, minimize_on_M, polish_positive
from .problem import Problem
from .reduction import PotentialPair, phi_map, solve_fourth_order_split
from .solvers import LinearSolveOptions, solve_helmholtz_neumann, solve_poisson_dirichlet, solve_poisson_neumann_zeromean

__all__ = [
    "ResidualReport",
    "SUMMARY_COLUMNS",
    "reconstruct_phi",
    "residual_original_system",
    "write_summary",
    "RefinementStudy",
    "refinement_study",
    "DenseOracleReport",
    "dense_oracle_compare",
    "dense_kkt_polish",
]

SUMMARY_COLUMNS = ("n", "h", "J", "omega", "mu", "eq1_res", "eq2_res",
                   "bc_res", "norm_res", "compat_res", "iters")


def reconstruct_phi(problem: Problem, pair: PotentialPair, mu: float) -> np.ndarray:
    """Full potential: state-dependent part plus boundary lift plus gauge."""
    return pair.phi + problem.chi + mu


def _laplacian4(grid: Grid, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order five-point-per-axis Laplacian on the deep interior.

    Returns (field, mask); the field is zero outside the mask, which holds
    the nodes at least two cells from every face.
    """
    lap = np.zeros_like(f)
    mask = np.ones(grid.shape, dtype=bool)
    for a in range(grid.dim):
        h2 = grid.h[a] ** 2
        sl = [slice(None)] * grid.dim

        def at(k: int) -> np.ndarray:
            s = list(sl)
            s[a] = slice(2 + k, f.shape[a] - 2 + k if k != 2 else None)
            return f[tuple(s)]

        core = (-at(-2) + 16.0 * at(-1) - 30.0 * at(0)
                + 16.0 * at(1) - at(2)) / (12.0 * h2)
        dest = list(sl)
        dest[a] = slice(2, -2)
        lap[tuple(dest)] += core
        edge = list(sl)
        for cut in (slice(0, 2), slice(-2, None)):
            edge[a] = cut
            mask[tuple(edge)] = False
    lap[~mask] = 0.0
    return lap, mask


def _one_sided_normal_derivative(grid: Grid, f: np.ndarray,
                                 axis: int, side: int) -> np.ndarray:
    """Outward normal derivative on a face, one-sided second order."""
    h = grid.h[axis]

    def layer(k: int) -> np.ndarray:
        sl = [slice(None)] * grid.dim
        sl[axis] = (-1 - k) if side == 1 else k
        return f[tuple(sl)]

    # (3 f0 - 4 f1 + f2) / (2 h) along the outward direction.
    return (3.0 * layer(0) - 4.0 * layer(1) + layer(2)) / (2.0 * h)


@dataclass(frozen=True)
class ResidualReport:
    """Residuals of one state against the original system."""

    n: tuple[int, ...]
    h: float
    j: float
    omega: float
    mu: float
    eq1_res: float
    eq1_res_native: float
    eq2_res: float
    bc_res: float
    bc_res_second: float
    norm_res: float
    compat_res: float
    iters: int

    def row(self) -> dict[str, object]:
        return {
            "n": "x".join(str(m) for m in self.n),
            "h": repr(self.h),
            "J": repr(self.j),
            "omega": repr(self.omega),
            "mu": repr(self.mu),
            "eq1_res": repr(self.eq1_res),
            "eq2_res": repr(self.eq2_res),
            "bc_res": repr(self.bc_res),
            "norm_res": repr(self.norm_res),
            "compat_res": repr(self.compat_res),
            "iters": str(self.iters),
        }


def residual_original_system(problem: Problem,
                             u: np.ndarray,
                             pair: PotentialPair,
                             omega: float,
                             mu: float,
                             j: float | None = None,
                             iterations: int = 0) -> ResidualReport:
    """Measure (u, omega, mu) against the strong equations and side conditions.

    eq1_res uses the wide fourth-order stencil over the deep interior (its
    own truncation error decays like h^2 times the solution regularity, so
    refinement should show second order); eq1_res_native uses the optimizer's
    stencil and should sit at the solver tolerance.  eq2_res applies the two
    factored native stencils to the reconstructed potential.  bc_res is the
    worst absolute flux mismatch over all faces for the potential itself,
    bc_res_second the same for its Laplacian field.
    """
    grid = problem.grid
    q = problem.q
    phi_full = reconstruct_phi(problem, pair, mu)
    nonlin = problem.kappa * np.abs(u) ** (problem.p - 2.0) * u

    lap4, mask = _laplacian4(grid, u)
    eq1_field = -lap4 + (q * phi_full - omega) * u - nonlin
    eq1_field[~mask] = 0.0
    eq1 = norm_l2(grid, eq1_field)

    lap_u = laplacian_dirichlet(grid, u)
    native_field = -lap_u + (q * phi_full - omega) * u - nonlin
    native_field[~grid.interior_mask] = 0.0
    eq1_native = norm_l2(grid, native_field)

    z = laplacian_neumann(grid, phi_full, problem.h1)
    eq2_field = laplacian_neumann(grid, z, problem.h2) - z - q * u * u
    eq2 = norm_l2(grid, eq2_field)

    bc1 = 0.0
    bc2 = 0.0
    for axis, side in grid.faces():
        d_phi = _one_sided_normal_derivative(grid, phi_full, axis, side)
        d_z = _one_sided_normal_derivative(grid, z, axis, side)
        bc1 = max(bc1, float(np.max(np.abs(d_phi - problem.h1.face(axis, side)))))
        bc2 = max(bc2, float(np.max(np.abs(d_z - problem.h2.face(axis, side)))))

    norm_res = abs(inner(grid, u, u) - 1.0)
    compat_res = abs(inner(grid, q * u, u) - problem.alpha)
    if j is None:
        j = eval_J(problem, u, pair)[0]
    return ResidualReport(
        n=grid.n, h=float(max(grid.h)), j=float(j), omega=float(omega),
        mu=float(mu), eq1_res=float(eq1), eq1_res_native=float(eq1_native),
        eq2_res=float(eq2), bc_res=float(bc1), bc_res_second=float(bc2),
        norm_res=float(norm_res), compat_res=float(compat_res),
        iters=int(iterations),
    )


def write_summary(path, reports: Sequence[ResidualReport]) -> None:
    """Summary table, one row per state/grid, fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for rep in reports:
            writer.writerow(rep.row())


def _orders(values: Sequence[float], floor: float = 1e-12) -> list[float]:
    """log2 ratios of consecutive entries; nan when below the noise floor."""
    out = []
    for a, b in zip(values, values[1:]):
        if a <= floor or b <= floor:
            out.append(float("nan"))
        else:
            out.append(float(np.log2(a / b)))
    return out


@dataclass(frozen=True)
class RefinementStudy:
    reports: tuple[ResidualReport, ...]
    results: tuple[SolveResult, ...]
    j_values: tuple[float, ...]
    j_diffs: tuple[float, ...]
    j_orders: tuple[float, ...]
    eq1_orders: tuple[float, ...]
    bc_orders: tuple[float, ...]


def refinement_study(problem_factory: Callable[[int], Problem],
                     node_counts: Sequence[int],
                     opts: OptimizerOptions | None = None,
                     positive: bool = True) -> RefinementStudy:
    """Solve the same continuum problem over successively refined grids.

    ``problem_factory`` maps a per-axis node count to a Problem; counts are
    expected to (roughly) double the resolution each step, since observed
    orders are reported as plain log2 ratios.  Energies are compared through
    consecutive differences (no exact value is available), the residuals
    directly.
    """
    opts = opts or OptimizerOptions()
    reports: list[ResidualReport] = []
    results: list[SolveResult] = []
    for n in node_counts:
        prob = problem_factory(int(n))
        res = minimize_on_M(prob, feasible_init(prob), opts)
        if positive:
            res = polish_positive(prob, res, opts)
        reports.append(residual_original_system(
            prob, res.u, res.pair, res.omega, res.mu,
            j=res.j, iterations=res.iterations))
        results.append(res)
    j_values = [rep.j for rep in reports]
    j_diffs = [abs(a - b) for a, b in zip(j_values, j_values[1:])]
    return RefinementStudy(
        reports=tuple(reports),
        results=tuple(results),
        j_values=tuple(j_values),
        j_diffs=tuple(j_diffs),
        j_orders=tuple(_orders(j_diffs)),
        eq1_orders=tuple(_orders([rep.eq1_res for rep in reports])),
        bc_orders=tuple(_orders([rep.bc_res for rep in reports])),
    )


# ---------------------------------------------------------------------------
# Dense oracles.


@dataclass(frozen=True)
class DenseOracleReport:
    """Worst relative discrepancies between iterative and dense solves."""

    helmholtz: float
    poisson_neumann: float
    poisson_dirichlet: float
    split_phi: float
    split_psi: float
    state_potential: float
    nullspace_sigma: float
    nullspace_gap: float

    def max_discrepancy(self) -> float:
        return max(self.helmholtz, self.poisson_neumann, self.poisson_dirichlet,
                   self.split_phi, self.split_psi, self.state_potential)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / (1.0 + np.max(np.abs(b))))


def dense_oracle_compare(problem: Problem, seed: int = 0) -> DenseOracleReport:
    """Cross-check every iterative solve against assembled-matrix LU solves.

    Random smooth-ish data; the iterative tolerance is tightened to 1e-12 so
    the comparison measures correctness, not stopping noise.  Also reports
    the two smallest singular values of the symmetrized Neumann Laplacian:
    the first certifies the constant nullspace, the second (the spectral gap)
    certifies that projection onto mean-zero fields removes it.
    """
    grid = problem.grid
    check_size(grid)
    rng = np.random.default_rng(seed)
    tight = LinearSolveOptions(rel_tolerance=1e-12)

    f = rng.standard_normal(grid.shape)
    zero = BoundaryData.zero(grid)

    v_it = solve_helmholtz_neumann(grid, f, zero, tight)
    v_ds = solve_helmholtz_dense(grid, -f)
    helm = _rel(v_it, v_ds)

    f0 = f - mean(grid, f)
    w_it = solve_poisson_neumann_zeromean(grid, f0, zero, tight)
    w_ds = solve_poisson_neumann_dense(grid, f0)
    pois_n = _rel(w_it, w_ds)

    fd = rng.standard_normal(grid.shape)
    fd[~grid.interior_mask] = 0.0
    d_it = solve_poisson_dirichlet(grid, fd, tight)
    d_ds = solve_poisson_dirichlet_dense(grid, fd)
    pois_d = _rel(d_it, d_ds)

    fs = rng.standard_normal(grid.shape)
    pair_it = solve_fourth_order_split(grid, fs, zero, zero, tight)
    phi_ds, psi_ds = solve_fourth_order_dense(grid, fs)
    split_phi = _rel(pair_it.phi, phi_ds)
    split_psi = _rel(pair_it.psi, psi_ds)

    u = rng.standard_normal(grid.shape)
    u[~grid.interior_mask] = 0.0
    u /= norm_l2(grid, u)
    tight_problem = _with_solver(problem, tight)
    pair_u = phi_map(tight_problem, u)
    phi_u_ds, _ = solve_fourth_order_dense(grid, problem.q * u * u)
    state_pot = _rel(pair_u.phi, phi_u_ds)

    a_neu = neumann_laplacian_matrix(grid)
    w_vec = weight_vector(grid)
    sym = np.sqrt(w_vec)[:, None] * a_neu / np.sqrt(w_vec)[None, :]
    sym = 0.5 * (sym + sym.T)
    eigs = np.sort(np.abs(np.linalg.eigvalsh(sym)))
    return DenseOracleReport(
        helmholtz=helm, poisson_neumann=pois_n, poisson_dirichlet=pois_d,
        split_phi=split_phi, split_psi=split_psi, state_potential=state_pot,
        nullspace_sigma=float(eigs[0] / max(eigs[-1], 1.0)),
        nullspace_gap=float(eigs[1]),
    )


def _with_solver(problem: Problem, solver: LinearSolveOptions) -> Problem:
    return replace(problem, solver=solver)


def _potential_operator_matrix(grid: Grid) -> np.ndarray:
    """Dense matrix of source -> potential for the factored fourth-order solve.

    Column j is the potential generated by the (mean-projected) nodal source
    e_j with homogeneous fluxes.  Assembled from the bordered block system in
    one multi-RHS solve; only for oracle-sized grids.
    """
    check_size(grid)
    m = grid.node_count
    w_vec = weight_vector(grid)
    big = fourth_order_matrix_dense(grid)
    rhs = np.zeros((2 * m + 1, m))
    rhs[:m, :] = np.eye(m) - np.outer(np.ones(m), w_vec) / grid.volume
    sol = np.linalg.solve(big, rhs)
    return sol[m:2 * m, :]


def dense_kkt_polish(problem: Problem,
                     u0: np.ndarray,
                     omega0: float,
                     mu0: float,
                     max_newton: int = 40,
                     tol: float = 1e-12) -> tuple[np.ndarray, float, float, float]:
    """Newton on the full dense stationarity system from a converged state.

    Unknowns are the interior nodal values of u plus (omega, mu); the
    equations are the strong single-particle equation with the exact dense
    source-to-potential map (whose u-derivative enters the Jacobian as a
    dense block) and the two constraints.  Returns (u, omega, mu, J) with J
    evaluated through the dense potential, fully independent of the
    iterative pipeline.  Raises ``NewtonDivergence`` if the residual fails
    to reach ``tol`` times the initial scale.
    """
    grid = problem.grid
    check_size(grid)
    q = problem.q.ravel()
    chi = problem.chi.ravel()
    w_vec = weight_vector(grid)
    a_dir = -dirichlet_laplacian_matrix(grid)
    lmat = _potential_operator_matrix(grid)
    interior = grid.interior_mask.ravel()
    idx = np.flatnonzero(interior)
    ni = idx.size
    kappa, p, alpha = problem.kappa, problem.p, problem.alpha

    u = np.asarray(u0, dtype=float).ravel().copy()
    u[~interior] = 0.0
    omega, mu = float(omega0), float(mu0)

    def phi_of(uv: np.ndarray) -> np.ndarray:
        return lmat @ (q * uv * uv)

    def residual(uv, om, mv):
        phi = phi_of(uv)
        grad = (a_dir @ uv + q * (phi + chi) * uv
                - kappa * np.abs(uv) ** (p - 2.0) * uv - om * uv + mv * q * uv)
        r = np.empty(ni + 2)
        r[:ni] = grad[idx]
        r[ni] = w_vec @ (uv * uv) - 1.0
        r[ni + 1] = w_vec @ (q * uv * uv) - alpha
        return r, phi

    r, phi = residual(u, omega, mu)
    scale = 1.0 + float(np.max(np.abs(r)))
    for _ in range(max_newton):
        if float(np.max(np.abs(r))) <= tol * scale:
            break
        dphi = lmat * (2.0 * q * u)[None, :]
        jac_u = (a_dir
                 + np.diag(q * (phi + chi) - omega + mu * q
                           - kappa * (p - 1.0) * np.abs(u) ** (p - 2.0))
                 + (q * u)[:, None] * dphi)
        jac = np.zeros((ni + 2, ni + 2))
        jac[:ni, :ni] = jac_u[np.ix_(idx, idx)]
        jac[:ni, ni] = -u[idx]
        jac[:ni, ni + 1] = (q * u)[idx]
        jac[ni, :ni] = 2.0 * (w_vec * u)[idx]
        jac[ni + 1, :ni] = 2.0 * (w_vec * q * u)[idx]
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergence("singular dense stationarity Jacobian") from exc
        u[idx] += delta[:ni]
        omega += float(delta[ni])
        mu += float(delta[ni + 1])
        r, phi = residual(u, omega, mu)
    else:
        raise NewtonDivergence(
            f"dense stationarity Newton stalled at residual {np.max(np.abs(r)):.3e}"
        )

    u_grid = u.reshape(grid.shape)
    phi_grid = phi.reshape(grid.shape)
    psi_grid = laplacian_neumann(grid, phi_grid, BoundaryData.zero(grid))
    j_dense = eval_J(problem, u_grid, PotentialPair(phi=phi_grid, psi=psi_grid))[0]
    return u_grid, omega, mu, float(j_dense)
