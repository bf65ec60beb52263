"""Problem assembly: coupling fields, boundary data, and the auxiliary potential.

A ``Problem`` bundles everything that stays fixed during a state computation:
the grid, the nodal coupling field q, the two Neumann data sets (h1, h2), the
flux gap ``alpha = surface(h2) - surface(h1)``, the nonlinearity (kappa, p),
and the auxiliary potential chi obtained from the two-step solve

    theta:  lap(theta) - theta = alpha / |box|,   d(theta)/dn = h2
    chi:    lap(chi) = theta,                     d(chi)/dn = h1,  mean(chi) = 0.

Integrating the theta equation gives ``integrate(theta) == surface(h1)``
identically, which is both the compatibility condition for the chi solve and
a free end-to-end check on the construction; it is verified on every build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConsistencyViolation
from .grid import (
    BoundaryData,
    Grid,
    boundary_integrate,
    inner,
    integrate,
    laplacian_neumann,
    norm_l2,
    read_field,
)
from .solvers import (
    LinearSolveOptions,
    solve_helmholtz_neumann,
    solve_poisson_neumann_zeromean,
)

__all__ = [
    "CouplingSpec",
    "Problem",
    "FeasibilityReport",
    "build_problem",
    "compute_alpha",
    "solve_chi",
    "classify_alpha",
]

P_LOWER = 2.0
P_UPPER = 10.0 / 3.0


@dataclass(frozen=True)
class CouplingSpec:
    """Declarative description of the coupling field q.

    kind is one of:

    * ``"affine"``: q = a + b * x1, params (a, b)
    * ``"radial_bump"``: q = base + height * max(0, 1 - |x - center|^2 / radius^2)^2,
      params (base, height, center, radius)
    * ``"oscillating"``: q = base + amplitude * sin(2 pi cycles x1 / L1) + tilt * x1 / L1,
      params (base, amplitude, cycles, tilt); each of ``cycles`` equal slabs
      along the first axis sees a full period, so any interior level is
      bracketed inside every slab
    * ``"tabulated"``: nodal values from a field file (see ``grid.read_field``),
      params (path,)
    """

    kind: str
    params: dict = field(default_factory=dict)

    def evaluate(self, grid: Grid) -> np.ndarray:
        p = self.params
        if self.kind == "affine":
            q = float(p.get("a", 0.0)) + float(p.get("b", 0.0)) * grid.coords[0]
        elif self.kind == "radial_bump":
            center = np.atleast_1d(np.asarray(p.get("center", [L / 2 for L in grid.lengths]), dtype=float))
            radius = float(p["radius"])
            r2 = sum((c - ci) ** 2 for c, ci in zip(grid.coords, center))
            q = float(p.get("base", 0.0)) + float(p.get("height", 1.0)) * np.clip(
                1.0 - r2 / radius**2, 0.0, None
            ) ** 2
        elif self.kind == "oscillating":
            x = grid.coords[0] / grid.lengths[0]
            q = (float(p.get("base", 0.0))
                 + float(p.get("amplitude", 1.0))
                 * np.sin(2.0 * math.pi * float(p.get("cycles", 3)) * x)
                 + float(p.get("tilt", 0.0)) * x)
        elif self.kind == "tabulated":
            tab_grid, values = read_field(p["path"])
            if tab_grid != grid:
                raise ValueError(
                    f"tabulated coupling grid {tab_grid} does not match {grid}"
                )
            q = values
        else:
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        q = np.asarray(q, dtype=float) + np.zeros(grid.shape)
        if not np.all(np.isfinite(q)):
            raise ValueError("coupling field has non-finite values")
        return q


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of the necessary-condition check on alpha.

    classification is "interior" (strictly inside the range of q, up to
    gap_eps), "boundary_degenerate" (within gap_eps of an endpoint), or
    "infeasible".  level_set_fraction is the fraction of nodes with
    ``|q - alpha| <= level_eps``; a large fraction flags a flat coupling whose
    level set {q = alpha} carries volume, which degrades the constraint
    geometry even when alpha is interior.
    """

    alpha: float
    q_min: float
    q_max: float
    classification: str
    level_set_fraction: float
    gap_eps: float
    level_eps: float

    @property
    def feasible(self) -> bool:
        return self.classification == "interior"

    def describe(self) -> str:
        return (
            f"alpha={self.alpha:.6g} against q range [{self.q_min:.6g}, "
            f"{self.q_max:.6g}]: {self.classification} "
            f"(level_set_fraction={self.level_set_fraction:.3g})"
        )


@dataclass(frozen=True)
class Problem:
    """Fixed data for one state computation; see the module docstring."""

    grid: Grid
    q: np.ndarray
    h1: BoundaryData
    h2: BoundaryData
    alpha: float
    kappa: float
    p: float
    chi: np.ndarray
    theta: np.ndarray
    solver: LinearSolveOptions = LinearSolveOptions()

    @cached_property
    def q_chi(self) -> np.ndarray:
        return self.q * self.chi

    @cached_property
    def q_range(self) -> tuple[float, float]:
        return float(np.min(self.q)), float(np.max(self.q))


def compute_alpha(grid: Grid, h1: BoundaryData, h2: BoundaryData) -> float:
    """Flux gap: surface integral of h2 minus surface integral of h1."""
    return boundary_integrate(grid, h2) - boundary_integrate(grid, h1)


def solve_chi(grid: Grid,
              h1: BoundaryData,
              h2: BoundaryData,
              opts: LinearSolveOptions = LinearSolveOptions(),
              check_tolerance: float = 5e-8) -> tuple[np.ndarray, np.ndarray, float]:
    """Two-step construction of the auxiliary potential.

    Returns (chi, theta, alpha).  Raises ``ConsistencyViolation`` when the
    mean identity ``integrate(theta) == surface(h1)`` fails beyond
    ``check_tolerance`` times the data scale, which would indicate a broken
    solver rather than bad data (the identity holds by construction).
    """
    alpha = compute_alpha(grid, h1, h2)
    source = np.full(grid.shape, alpha / grid.volume)
    theta = solve_helmholtz_neumann(grid, source, h2, opts)
    surf_h1 = boundary_integrate(grid, h1)
    scale = 1.0 + abs(alpha) + norm_l2(grid, theta)
    defect = integrate(grid, theta) - surf_h1
    if abs(defect) > check_tolerance * scale:
        raise ConsistencyViolation(
            f"mean of theta differs from surface integral of h1 by {defect:.3e} "
            f"(tolerance {check_tolerance * scale:.3e})"
        )
    chi = solve_poisson_neumann_zeromean(grid, theta, h1, opts)
    return chi, theta, alpha


def fourth_order_chi_residual(grid: Grid,
                              chi: np.ndarray,
                              h1: BoundaryData,
                              h2: BoundaryData,
                              alpha: float) -> float:
    """L2 norm of lap(lap(chi)) - lap(chi) - alpha/|box| with native stencils."""
    z = laplacian_neumann(grid, chi, h1)
    res = laplacian_neumann(grid, z, h2) - z - alpha / grid.volume
    return norm_l2(grid, res)


def build_problem(grid: Grid,
                  coupling: CouplingSpec | np.ndarray,
                  h1: BoundaryData,
                  h2: BoundaryData,
                  kappa: float,
                  p: float,
                  solver: LinearSolveOptions = LinearSolveOptions()) -> Problem:
    """Assemble a ``Problem``: evaluate q, solve for chi, record alpha.

    Feasibility of alpha is *not* enforced here; call ``classify_alpha`` (the
    solve entry points do) so that infeasible setups can still be inspected.
    """
    if not P_LOWER < p < P_UPPER:
        raise ValueError(f"exponent p must lie in ({P_LOWER}, {P_UPPER:.6g}), got {p}")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    q = coupling.evaluate(grid) if isinstance(coupling, CouplingSpec) else \
        np.asarray(coupling, dtype=float).reshape(grid.shape)
    if not np.all(np.isfinite(q)):
        raise ValueError("coupling field has non-finite values")
    chi, theta, alpha = solve_chi(grid, h1, h2, opts=solver)
    return Problem(grid=grid, q=q, h1=h1, h2=h2, alpha=alpha, kappa=float(kappa),
                   p=float(p), chi=chi, theta=theta, solver=solver)


def classify_alpha(problem: Problem,
                   gap_rel: float = 1e-9,
                   level_rel: float = 1e-3) -> FeasibilityReport:
    """Check the necessary condition q_min < alpha < q_max on nodal values.

    gap_eps = gap_rel * (q_max - q_min) separates "interior" from
    "boundary_degenerate"; level_eps = level_rel * (q_max - q_min) drives the
    level-set fraction (for constant q both collapse to 0 and the comparison
    is by equality).
    """
    q_min, q_max = problem.q_range
    alpha = problem.alpha
    spread = q_max - q_min
    gap_eps = gap_rel * spread
    level_eps = level_rel * spread
    if min(abs(alpha - q_min), abs(alpha - q_max)) <= gap_eps:
        classification = "boundary_degenerate"
    elif q_min < alpha < q_max:
        classification = "interior"
    else:
        classification = "infeasible"
    fraction = float(np.mean(np.abs(problem.q - alpha) <= level_eps))
    return FeasibilityReport(alpha=alpha, q_min=q_min, q_max=q_max,
                             classification=classification,
                             level_set_fraction=fraction,
                             gap_eps=gap_eps, level_eps=level_eps)
