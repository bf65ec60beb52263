"""Uniform node-centered tensor grids on boxes: quadrature, stencils, field I/O.

A field is a plain numpy array of shape ``grid.shape``, one value per node,
boundary nodes included.  All volume integrals use tensor-product trapezoid
weights and all surface integrals use the induced face weights (counting
measure on the two endpoints in 1d).  The stencils are built so that the
discrete analogues of the Green identities hold to rounding, not just to
truncation order:

* ``laplacian_neumann`` is self-adjoint in the trapezoid inner product,
* ``dirichlet_inner(grid, f, g) == -inner(grid, laplacian_neumann(grid, f), g)``
  for every pair of fields,
* ``integrate(grid, laplacian_neumann(grid, f, flux)) == boundary_integrate(grid, flux)``.

The downstream energy identities (interaction energy, gradient consistency)
rely on these exact relations, so any change here must preserve them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Callable, Mapping

import numpy as np

from .errors import NonzeroBoundary

__all__ = [
    "Grid",
    "BoundaryData",
    "FACE_NAMES",
    "integrate",
    "inner",
    "mean",
    "norm_l2",
    "boundary_integrate",
    "laplacian_dirichlet",
    "laplacian_neumann",
    "neumann_flux_field",
    "dirichlet_inner",
    "dirichlet_energy",
    "write_field",
    "read_field",
]

# Face keys are (axis, side) with side 0 at coordinate 0 and side 1 at
# coordinate L.  The string aliases are used by the config format.
FACE_NAMES: dict[str, tuple[int, int]] = {
    "x0": (0, 0), "x1": (0, 1),
    "y0": (1, 0), "y1": (1, 1),
    "z0": (2, 0), "z1": (2, 1),
}


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the box [0, L1] x ... x [0, Ld] including boundary nodes.

    Parameters
    ----------
    lengths : tuple of float
        Edge lengths, all positive.  One to three axes.
    n : tuple of int
        Nodes per axis, at least 3 each (the stencils need one interior node).

    Notes
    -----
    Node coordinates along axis ``a`` are ``np.linspace(0, L_a, n_a)`` and the
    spacing is ``h_a = L_a / (n_a - 1)``.
    """

    lengths: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if not 1 <= len(lengths) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(lengths)}")
        if len(n) != len(lengths):
            raise ValueError("lengths and n must have the same number of axes")
        if any(L <= 0 or not np.isfinite(L) for L in lengths):
            raise ValueError(f"edge lengths must be positive finite, got {lengths}")
        if any(m < 3 for m in n):
            raise ValueError(f"need at least 3 nodes per axis, got {n}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "n", n)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @cached_property
    def h(self) -> tuple[float, ...]:
        return tuple(L / (m - 1) for L, m in zip(self.lengths, self.n))

    @cached_property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @cached_property
    def node_count(self) -> int:
        return int(np.prod(self.n))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Per-axis node coordinates (1d arrays)."""
        return tuple(np.linspace(0.0, L, m) for L, m in zip(self.lengths, self.n))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate fields, each of shape ``grid.shape``."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def axis_weights(self) -> tuple[np.ndarray, ...]:
        """Per-axis composite trapezoid weights h*[1/2, 1, ..., 1, 1/2]."""
        out = []
        for h, m in zip(self.h, self.n):
            w = np.full(m, h)
            w[0] *= 0.5
            w[-1] *= 0.5
            out.append(w)
        return tuple(out)

    @cached_property
    def weights(self) -> np.ndarray:
        """Tensor-product quadrature weight per node, shape ``grid.shape``."""
        return reduce(np.multiply.outer, self.axis_weights)

    @cached_property
    def cell_weights(self) -> tuple[np.ndarray, ...]:
        """Weights for the per-axis difference quotients in ``dirichlet_inner``.

        For axis ``a`` the array has shape ``n`` with ``n_a`` replaced by
        ``n_a - 1``: full spacing along the difference axis, trapezoid weights
        transversally.  With these weights the summation-by-parts identity
        against ``laplacian_neumann`` is exact.
        """
        out = []
        for a in range(self.dim):
            vecs = list(self.axis_weights)
            vecs[a] = np.full(self.n[a] - 1, self.h[a])
            out.append(reduce(np.multiply.outer, vecs))
        return tuple(out)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[tuple(slice(1, -1) for _ in range(self.dim))] = True
        return mask

    def face_shape(self, axis: int) -> tuple[int, ...]:
        return tuple(m for j, m in enumerate(self.n) if j != axis)

    def face_index(self, axis: int, side: int) -> tuple:
        """Index tuple selecting the nodes of one face."""
        idx: list = [slice(None)] * self.dim
        idx[axis] = 0 if side == 0 else -1
        return tuple(idx)

    @cached_property
    def face_weights(self) -> tuple[np.ndarray, ...]:
        """Surface quadrature weights per axis (same for both sides).

        In 1d the empty product leaves a scalar weight 1: the surface measure
        on an interval boundary is the counting measure on its two endpoints.
        """
        out = []
        for a in range(self.dim):
            vecs = [w for j, w in enumerate(self.axis_weights) if j != a]
            out.append(reduce(np.multiply.outer, vecs, np.array(1.0)))
        return tuple(out)

    def faces(self):
        for a in range(self.dim):
            for s in (0, 1):
                yield (a, s)

    def refined(self, factor: int = 2) -> "Grid":
        """Grid with each spacing divided by ``factor`` (nested nodes)."""
        return Grid(self.lengths, tuple((m - 1) * factor + 1 for m in self.n))

    def field(self, fn: Callable[..., np.ndarray] | float) -> np.ndarray:
        """Evaluate a callable of the coordinate fields, or fill a constant."""
        if callable(fn):
            return np.asarray(fn(*self.coords), dtype=float).reshape(self.shape)
        return np.full(self.shape, float(fn))


@dataclass(frozen=True)
class BoundaryData:
    """Scalar data on the boundary, stored per face.

    ``values[(axis, side)]`` has shape ``grid.face_shape(axis)``; in 1d the
    face arrays are 0-d.  Used both for Neumann flux data and for surface
    integrands.
    """

    grid: Grid
    values: Mapping[tuple[int, int], np.ndarray]

    def __post_init__(self):
        vals = {}
        for face in self.grid.faces():
            if face not in self.values:
                raise ValueError(f"missing boundary face {face}")
            arr = np.asarray(self.values[face], dtype=float)
            if arr.shape != self.grid.face_shape(face[0]):
                raise ValueError(
                    f"face {face}: expected shape {self.grid.face_shape(face[0])}, "
                    f"got {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"face {face}: boundary data must be finite")
            vals[face] = arr
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, grid: Grid) -> "BoundaryData":
        return cls.constant(grid, 0.0)

    @classmethod
    def constant(cls, grid: Grid, value) -> "BoundaryData":
        """Constant per face; ``value`` is a scalar or a {face: scalar} map.

        Faces may be keyed by (axis, side) pairs or by the string aliases in
        ``FACE_NAMES``; unspecified faces default to 0.
        """
        if np.isscalar(value):
            table = {face: float(value) for face in grid.faces()}
        else:
            table = {face: 0.0 for face in grid.faces()}
            for key, v in value.items():
                face = FACE_NAMES[key] if isinstance(key, str) else tuple(key)
                if face not in table:
                    raise ValueError(f"unknown face {key} for dim={grid.dim}")
                table[face] = float(v)
        return cls(grid, {
            face: np.full(grid.face_shape(face[0]), c) for face, c in table.items()
        })

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> "BoundaryData":
        """Evaluate ``fn(x1, ..., xd)`` at the nodes of every face."""
        vals = {}
        for axis, side in grid.faces():
            idx = grid.face_index(axis, side)
            coords = [c[idx] for c in grid.coords]
            vals[(axis, side)] = np.asarray(fn(*coords), dtype=float).reshape(
                grid.face_shape(axis)
            )
        return cls(grid, vals)

    def face(self, axis: int, side: int) -> np.ndarray:
        return self.values[(axis, side)]

    @cached_property
    def is_zero(self) -> bool:
        return all(not np.any(v) for v in self.values.values())


def integrate(grid: Grid, f: np.ndarray) -> float:
    """Trapezoid quadrature of a nodal field over the box."""
    return float(np.sum(grid.weights * f))


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Quadrature inner product <f, g> = integral of f*g."""
    return float(np.sum(grid.weights * f * g))


def mean(grid: Grid, f: np.ndarray) -> float:
    return integrate(grid, f) / grid.volume


def norm_l2(grid: Grid, f: np.ndarray) -> float:
    return float(np.sqrt(max(inner(grid, f, f), 0.0)))


def boundary_integrate(grid: Grid, data: BoundaryData) -> float:
    """Surface quadrature of boundary data over all faces.

    Edge and corner nodes belong to several faces and are counted once per
    face, which is the correct decomposition of the surface integral.
    """
    total = 0.0
    for axis, side in grid.faces():
        total += float(np.sum(grid.face_weights[axis] * data.face(axis, side)))
    return total


def _axis_slice(ndim: int, axis: int, s) -> tuple:
    idx: list = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def boundary_max(grid: Grid, f: np.ndarray) -> float:
    """Largest absolute value of a field on the boundary nodes."""
    worst = 0.0
    for axis, side in grid.faces():
        worst = max(worst, float(np.max(np.abs(f[grid.face_index(axis, side)]))))
    return worst


def zero_boundary(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Copy of ``f`` with boundary nodes set exactly to zero."""
    out = np.array(f, dtype=float)
    out[~grid.interior_mask] = 0.0
    return out


def laplacian_dirichlet(grid: Grid, f: np.ndarray, check: bool = True) -> np.ndarray:
    """Second-order Laplacian of a field vanishing on the boundary.

    Output is zero on boundary nodes.  Raises ``NonzeroBoundary`` when the
    input exceeds ``1e-12 * (1 + max|f|)`` on the boundary; pass
    ``check=False`` to clamp silently (used in hot loops on fields that are
    zero on the boundary by construction).
    """
    f = np.asarray(f, dtype=float)
    if check:
        scale = 1.0 + float(np.max(np.abs(f))) if f.size else 1.0
        worst = boundary_max(grid, f)
        if worst > 1e-12 * scale:
            raise NonzeroBoundary(
                f"field has boundary magnitude {worst:.3e} (limit {1e-12 * scale:.3e})"
            )
    g = zero_boundary(grid, f)
    out = np.zeros_like(g)
    nd = grid.dim
    for a in range(nd):
        h2 = grid.h[a] ** 2
        lo = _axis_slice(nd, a, slice(0, -2))
        mid = _axis_slice(nd, a, slice(1, -1))
        hi = _axis_slice(nd, a, slice(2, None))
        out[mid] += (g[lo] - 2.0 * g[mid] + g[hi]) / h2
    out[~grid.interior_mask] = 0.0
    return out


def laplacian_neumann(grid: Grid, f: np.ndarray,
                      flux: BoundaryData | None = None) -> np.ndarray:
    """Second-order Laplacian with reflected ghost nodes on every face.

    The ghost value across a face is ``inner_neighbor + 2 h * flux`` with the
    flux taken along the outward normal, which keeps the operator self-adjoint
    in the trapezoid inner product and second-order accurate up to the
    boundary.  ``flux=None`` means homogeneous Neumann data.
    """
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    nd = grid.dim
    for a in range(nd):
        h2 = grid.h[a] ** 2
        lo = _axis_slice(nd, a, slice(0, -2))
        mid = _axis_slice(nd, a, slice(1, -1))
        hi = _axis_slice(nd, a, slice(2, None))
        out[mid] += (f[lo] - 2.0 * f[mid] + f[hi]) / h2
        first = _axis_slice(nd, a, 0)
        second = _axis_slice(nd, a, 1)
        last = _axis_slice(nd, a, -1)
        seclast = _axis_slice(nd, a, -2)
        out[first] += 2.0 * (f[second] - f[first]) / h2
        out[last] += 2.0 * (f[seclast] - f[last]) / h2
    if flux is not None and not flux.is_zero:
        out += neumann_flux_field(grid, flux)
    return out


def neumann_flux_field(grid: Grid, flux: BoundaryData) -> np.ndarray:
    """Contribution of inhomogeneous Neumann data to the ghost stencil.

    Adds ``2 * flux / h`` on each face (contributions accumulate on edges and
    corners).  ``laplacian_neumann(grid, f, flux)`` equals
    ``laplacian_neumann(grid, f) + neumann_flux_field(grid, flux)``.
    """
    out = np.zeros(grid.shape)
    for axis, side in grid.faces():
        out[grid.face_index(axis, side)] += 2.0 * flux.face(axis, side) / grid.h[axis]
    return out


def dirichlet_inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """Discrete integral of grad(f) . grad(g) by forward differences.

    Per axis, difference quotients live at cell midpoints and are weighted by
    the full spacing along that axis and trapezoid weights transversally.
    This specific quadrature satisfies, to rounding,

        dirichlet_inner(grid, f, g) == -inner(grid, laplacian_neumann(grid, f), g)

    for all fields, and the analogous identity with ``laplacian_dirichlet``
    for fields vanishing on the boundary.  The energy identities downstream
    depend on this exactness.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    total = 0.0
    nd = grid.dim
    for a in range(nd):
        h = grid.h[a]
        df = np.diff(f, axis=a) / h
        dg = df if g is f else np.diff(g, axis=a) / h
        total += float(np.sum(grid.cell_weights[a] * df * dg))
    return total


def dirichlet_energy(grid: Grid, f: np.ndarray) -> float:
    """Discrete integral of |grad f|^2 (see ``dirichlet_inner``)."""
    return dirichlet_inner(grid, f, f)


# ---------------------------------------------------------------------------
# Field dumps: plain CSV with a shape header, one value per line, row-major
# (last axis fastest).


def write_field(path, grid: Grid, values: np.ndarray) -> None:
    """Write a nodal field with its grid header.

    Format: ``# dim=<d> n=<n1,...> L=<L1,...>`` then one value per line in
    row-major order.  Values are written with ``repr`` so the round trip is
    bit exact.
    """
    values = np.asarray(values, dtype=float).reshape(grid.shape)
    with open(path, "w") as fh:
        fh.write("# dim=%d n=%s L=%s\n" % (
            grid.dim,
            ",".join(str(m) for m in grid.n),
            ",".join(repr(L) for L in grid.lengths),
        ))
        for v in values.ravel(order="C"):
            fh.write(repr(float(v)) + "\n")


_HEADER_RE = re.compile(r"#\s*dim=(\d+)\s+n=([\d,]+)\s+L=([^\s]+)")


def read_field(path) -> tuple[Grid, np.ndarray]:
    """Read a field written by ``write_field``; returns (grid, values)."""
    with open(path) as fh:
        header = fh.readline()
        m = _HEADER_RE.match(header)
        if m is None:
            raise ValueError(f"{path}: missing or malformed field header: {header!r}")
        dim = int(m.group(1))
        n = tuple(int(v) for v in m.group(2).split(","))
        lengths = tuple(float(v) for v in m.group(3).split(","))
        if len(n) != dim or len(lengths) != dim:
            raise ValueError(f"{path}: header axis counts disagree")
        data = np.array([float(line) for line in fh if line.strip()])
    grid = Grid(lengths, n)
    if data.size != grid.node_count:
        raise ValueError(
            f"{path}: expected {grid.node_count} values, found {data.size}"
        )
    return grid, data.reshape(grid.shape, order="C")
