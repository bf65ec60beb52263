"""The constraint manifold: unit mass plus prescribed coupling mass.

States live on M = S intersect N with

    S = { u : integrate(u^2) = 1 },    N = { u : integrate(q u^2) = alpha }.

Both constraints are even in u, so M is symmetric under sign flip.  The
retraction uses the two-parameter ansatz u = (a + b q) v: its two unknowns
are determined by a 2x2 Newton iteration on the constraint residuals, whose
Jacobian at (1, 0) is twice the Gram matrix of {v, q v}.  The same Gram
matrix controls the tangent projection, which removes the span of the
constraint differentials' metric representers from a gradient.

Feasible starting points are built from pairs of compactly supported bumps
centered where q is small and where q is large; with disjoint supports the
mixing angle that matches both constraints exists in closed form, so the
seeds satisfy the constraints to rounding before any retraction.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import (
    DegenerateConstraints,
    DegenerateDirection,
    InfeasibleRegion,
    NewtonDivergence,
    SlabInfeasible,
    ZeroField,
)
from .grid import Grid, dirichlet_inner, inner, norm_l2
from .problem import Problem
from .solvers import solve_poisson_dirichlet

__all__ = [
    "constraint_values",
    "retract",
    "constraint_representers",
    "tangent_project",
    "feasible_init",
    "genus_seeds",
    "sphere_samples",
]

_GRAM_COND_LIMIT = 1e12
_NEWTON_TOL = 1e-13
_NEWTON_MAX = 60


def constraint_values(problem: Problem, u: np.ndarray) -> tuple[float, float]:
    """Residuals (integrate(u^2) - 1, integrate(q u^2) - alpha)."""
    g = problem.grid
    u = np.asarray(u, dtype=float)
    return (inner(g, u, u) - 1.0,
            inner(g, problem.q * u, u) - problem.alpha)


def _moments(problem: Problem, v: np.ndarray) -> np.ndarray:
    """Quadrature moments m_k = integrate(q^k v^2) for k = 0..3."""
    g = problem.grid
    v2 = v * v
    q = problem.q
    return np.array([
        inner(g, v2, np.ones_like(v2)),
        inner(g, v2, q),
        inner(g, v2, q * q),
        inner(g, v2, q * q * q),
    ])


def retract(problem: Problem, v: np.ndarray) -> np.ndarray:
    """Map a nearby field onto M via u = (a + b q) v.

    Newton on (a, b) from (1, 0); the four moments integrate(q^k v^2) make
    both the residuals and the Jacobian closed-form, so no linear solves are
    involved.  A field already on M is returned unchanged (the initial
    residual check fires before any step).

    Raises ``ZeroField`` for vanishing input, ``DegenerateDirection`` when
    {v, q v} is numerically dependent, ``NewtonDivergence`` when the
    iteration leaves its basin.
    """
    v = np.asarray(v, dtype=float)
    m = _moments(problem, v)
    if not np.all(np.isfinite(m)) or m[0] <= 0.0:
        raise ZeroField(f"retraction input has squared mass {m[0]!r}")
    gram = np.array([[m[0], m[1]], [m[1], m[2]]])
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= 0.0 or ev[1] / ev[0] > _GRAM_COND_LIMIT:
        raise DegenerateDirection(
            f"Gram matrix of (v, q v) has eigenvalues {ev}; the ansatz cannot "
            "move the two constraints independently"
        )
    alpha = problem.alpha
    tol1 = _NEWTON_TOL
    tol2 = _NEWTON_TOL * (1.0 + abs(alpha))
    a, b = 1.0, 0.0
    for _ in range(_NEWTON_MAX):
        g1 = a * a * m[0] + 2 * a * b * m[1] + b * b * m[2] - 1.0
        g2 = a * a * m[1] + 2 * a * b * m[2] + b * b * m[3] - alpha
        if abs(g1) <= tol1 and abs(g2) <= tol2:
            if a == 1.0 and b == 0.0:
                return v
            return (a + b * problem.q) * v
        jac = 2.0 * np.array([
            [a * m[0] + b * m[1], a * m[1] + b * m[2]],
            [a * m[1] + b * m[2], a * m[2] + b * m[3]],
        ])
        try:
            da, db = np.linalg.solve(jac, [-g1, -g2])
        except np.linalg.LinAlgError as exc:
            raise NewtonDivergence(f"singular retraction Jacobian at ({a}, {b})") from exc
        a += da
        b += db
        if not (np.isfinite(a) and np.isfinite(b)) or abs(a) + abs(b) > 1e8:
            raise NewtonDivergence(f"retraction iterates diverged to ({a}, {b})")
    raise NewtonDivergence(
        f"retraction did not meet tolerance in {_NEWTON_MAX} steps "
        f"(residuals {g1:.3e}, {g2:.3e})"
    )


def constraint_representers(problem: Problem, u: np.ndarray,
                            metric: str = "l2",
                            x0: tuple | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Metric representers of the constraint differentials (up to factor 2).

    In L2 these are (u, q u); in the Sobolev metric their Dirichlet solves,
    so that the metric inner product against a tangent candidate reproduces
    the L2 pairing with (u, q u).  ``x0`` optionally warm-starts the two
    Sobolev solves with the representers from a nearby state.
    """
    u = np.asarray(u, dtype=float)
    d1 = u
    d2 = problem.q * u
    if metric == "h10":
        w1, w2 = x0 if x0 is not None else (None, None)
        d1 = solve_poisson_dirichlet(problem.grid, d1, problem.solver, x0=w1)
        d2 = solve_poisson_dirichlet(problem.grid, d2, problem.solver, x0=w2)
    elif metric != "l2":
        raise ValueError(f"unknown metric {metric!r}")
    return d1, d2


def _metric_inner(grid: Grid, metric: str, a: np.ndarray, b: np.ndarray) -> float:
    if metric == "l2":
        return inner(grid, a, b)
    return dirichlet_inner(grid, a, b)


def tangent_project(problem: Problem,
                    u: np.ndarray,
                    g: np.ndarray,
                    metric: str = "l2",
                    reps: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Remove the constraint-normal component of ``g`` at ``u``.

    Solves the 2x2 Gram system of the representers in the chosen metric.  For
    either metric, the result is L2-orthogonal to u and to q u (that is what
    tangency to both constraints means); in the Sobolev metric this follows
    from the representer construction.  Raises ``DegenerateConstraints`` when
    the representers are numerically dependent (constant q, or u = 0).
    """
    grid = problem.grid
    g = np.asarray(g, dtype=float)
    if reps is None:
        reps = constraint_representers(problem, u, metric)
    d1, d2 = reps
    g11 = _metric_inner(grid, metric, d1, d1)
    g12 = _metric_inner(grid, metric, d1, d2)
    g22 = _metric_inner(grid, metric, d2, d2)
    gram = np.array([[g11, g12], [g12, g22]])
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= 0.0 or ev[1] / ev[0] > _GRAM_COND_LIMIT:
        raise DegenerateConstraints(
            f"constraint representers are dependent (Gram eigenvalues {ev}); "
            "is q constant on the support of u?"
        )
    rhs = np.array([_metric_inner(grid, metric, g, d1),
                    _metric_inner(grid, metric, g, d2)])
    lam, beta = np.linalg.solve(gram, rhs)
    return g - lam * d1 - beta * d2


# ---------------------------------------------------------------------------
# Feasible seeds.

_MIN_RADIUS_CELLS = 2.05
_EDGE_MARGIN_CELLS = 1.5


def _region_box(grid: Grid, region) -> list[tuple[float, float]]:
    if region is None:
        return [(0.0, L) for L in grid.lengths]
    box = [(float(lo), float(hi)) for lo, hi in region]
    if len(box) != grid.dim:
        raise ValueError(f"region must give (lo, hi) per axis, got {region}")
    return box


def _bump(grid: Grid, center: np.ndarray, radius: float) -> np.ndarray:
    """C^1 compact bump max(0, 1 - r^2/R^2)^2, clipped to zero on the boundary."""
    r2 = sum((c - ci) ** 2 for c, ci in zip(grid.coords, center))
    w = np.clip(1.0 - r2 / radius**2, 0.0, None) ** 2
    w[~grid.interior_mask] = 0.0
    return w


def _normalized_bump(problem: Problem, center: np.ndarray,
                     radius: float) -> tuple[np.ndarray, float] | None:
    """Unit-mass bump and its coupling average, or None when degenerate."""
    grid = problem.grid
    w = _bump(grid, center, radius)
    nrm = norm_l2(grid, w)
    if nrm == 0.0:
        return None
    w = w / nrm
    return w, inner(grid, problem.q * w, w)


def feasible_init(problem: Problem, region=None) -> np.ndarray:
    """A point of M supported by two disjoint bumps inside ``region``.

    The radius is chosen first, sweeping from the fattest bump the region can
    hold downward: for each trial radius the admissible centers are the nodes
    whose distance to every region face leaves a one-node inset around the
    support, the candidate centers are the argmin/argmax of q over them, and
    the pair is accepted once the two coupling averages strictly bracket
    alpha with disjoint supports.  Preferring fat bumps keeps the gradient
    energy of the seed moderate, which matters downstream: the optimizer
    starts near the right energy scale instead of at a spike.

    The mixing weights against the two averages then satisfy both constraints
    in closed form (the cross terms vanish identically on disjoint supports),
    so the final retraction only cleans up rounding.

    ``region`` is an optional list of per-axis (lo, hi) coordinate bounds.
    Raises ``InfeasibleRegion`` when no radius admits a bracketing pair.
    """
    grid = problem.grid
    box = _region_box(grid, region)
    hmax = max(grid.h)
    margin_len = _EDGE_MARGIN_CELLS * hmax
    alpha = problem.alpha
    tiny = 1e-12 * (1.0 + abs(alpha))

    reach = np.full(grid.shape, np.inf)
    for a in range(grid.dim):
        lo, hi = box[a]
        x = grid.coords[a]
        reach = np.minimum(reach, np.minimum(x - lo, hi - x))
    r_min = _MIN_RADIUS_CELLS * hmax
    r_max = float(np.max(reach)) - margin_len
    if r_max < r_min:
        raise InfeasibleRegion(
            f"region {box} is too thin for a compactly supported bump"
        )

    r = r_max
    while r >= r_min * 0.999:
        admissible = reach >= (r + margin_len) * 0.999
        if np.any(admissible):
            qm = np.where(admissible, problem.q, np.inf)
            qM = np.where(admissible, problem.q, -np.inf)
            idx_lo = np.unravel_index(int(np.argmin(qm)), grid.shape)
            idx_hi = np.unravel_index(int(np.argmax(qM)), grid.shape)
            if problem.q[idx_lo] < alpha < problem.q[idx_hi]:
                c_lo = np.array([grid.axes[a][idx_lo[a]] for a in range(grid.dim)])
                c_hi = np.array([grid.axes[a][idx_hi[a]] for a in range(grid.dim)])
                dist = float(np.linalg.norm(c_hi - c_lo))
                if dist >= 2.0 * r + 3.0 * hmax:
                    pair_lo = _normalized_bump(problem, c_lo, r)
                    pair_hi = _normalized_bump(problem, c_hi, r)
                    if pair_lo is not None and pair_hi is not None:
                        w_lo, avg_lo = pair_lo
                        w_hi, avg_hi = pair_hi
                        if (avg_lo < alpha - tiny and avg_hi > alpha + tiny
                                and inner(grid, w_lo, w_hi) == 0.0):
                            s2 = (alpha - avg_lo) / (avg_hi - avg_lo)
                            u = np.sqrt(1.0 - s2) * w_lo + np.sqrt(s2) * w_hi
                            return retract(problem, u)
        r *= 0.85
    raise InfeasibleRegion(
        f"no bump radius in [{r_min:.4g}, {r_max:.4g}] gives two disjoint "
        f"bumps whose coupling averages bracket alpha={alpha:.6g} in region {box}"
    )


def _axis_slab_region(grid: Grid, i0: int, i1: int) -> list[tuple[float, float]]:
    """Region covering node indices [i0, i1] along axis 0, full transversally."""
    x = grid.axes[0]
    box = [(float(x[i0]), float(x[i1]))]
    box += [(0.0, L) for L in grid.lengths[1:]]
    return box


def genus_seeds(problem: Problem, k: int) -> list[np.ndarray]:
    """k members of M with pairwise disjoint supports in slabs along axis 0.

    Equal-width slabs are tried first; if any slab cannot bracket alpha, a
    greedy sweep re-partitions the axis into the shortest feasible slabs from
    the left.  Raises ``SlabInfeasible`` (with the first failing slab index)
    when no partition works.  Supports of seeds in adjacent slabs are
    separated by at least one zero node because each seed is inset from its
    slab faces.
    """
    if k < 1:
        raise ValueError(f"need k >= 1 families, got {k}")
    grid = problem.grid
    n0 = grid.n[0]
    edges = [round(j * (n0 - 1) / k) for j in range(k + 1)]
    try:
        return [
            feasible_init(problem, _axis_slab_region(grid, edges[j], edges[j + 1]))
            for j in range(k)
        ]
    except InfeasibleRegion as first_failure:
        if k == 1:
            raise SlabInfeasible(str(first_failure), slab_index=0) from first_failure

    # Greedy fallback: cut the shortest slab from the left that brackets alpha.
    min_width = max(8, int(2 * (2 * _MIN_RADIUS_CELLS + 2 * _EDGE_MARGIN_CELLS)) + 2)
    seeds: list[np.ndarray] = []
    i0 = 0
    while len(seeds) < k and i0 < n0 - 1:
        placed = False
        for i1 in range(min(i0 + min_width, n0 - 1), n0):
            try:
                seeds.append(
                    feasible_init(problem, _axis_slab_region(grid, i0, i1))
                )
            except InfeasibleRegion:
                continue
            i0 = i1
            placed = True
            break
        if not placed:
            break
    if len(seeds) < k:
        raise SlabInfeasible(
            f"only {len(seeds)} of {k} slabs along axis 0 can bracket "
            f"alpha={problem.alpha:.6g}",
            slab_index=len(seeds),
        )
    return seeds


def sphere_samples(problem: Problem,
                   seeds: list[np.ndarray],
                   count: int,
                   rng: np.random.Generator) -> list[np.ndarray]:
    """Random unit combinations of disjoint-support seeds, retracted onto M.

    Because the seeds have disjoint supports and each one satisfies both
    constraints, any coefficient vector on the unit sphere lands on M up to
    rounding; the retraction is a no-op-level cleanup.
    """
    out = []
    for _ in range(count):
        c = rng.standard_normal(len(seeds))
        nrm = float(np.linalg.norm(c))
        if nrm < 1e-12:
            continue
        c /= nrm
        u = sum(ci * si for ci, si in zip(c, seeds))
        out.append(retract(problem, u))
    return out
