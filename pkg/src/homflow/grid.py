"""Structured grids and discrete calculus on them.

Two grid types cover everything the solvers need: a periodic grid on the
unit cell Y = [0,1]^dim and a Dirichlet grid on the physical box
(0,D)^dim. Fields are node-centered numpy arrays; all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ValidationError

Array = np.ndarray


@dataclass(frozen=True)
class UnitCellGrid:
    """Uniform periodic grid on the unit cell.

    Nodes sit at i/n per axis, i = 0..n-1; node n identifies with node 0.
    """

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 4:
            raise ValidationError(f"cell grid needs n >= 4, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def num_nodes(self) -> int:
        return self.n**self.dim

    def axis_coords(self) -> Array:
        return np.arange(self.n) * self.h

    def node_points(self) -> Array:
        """Node coordinates, shape ``shape + (dim,)``."""
        axes = [self.axis_coords()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def edge_points(self, axis: int) -> Array:
        """Midpoints of the edges along ``axis``, shape ``shape + (dim,)``.

        Edge [i, ...] joins node i and node i+1 (mod n) along the axis.
        """
        pts = self.node_points().copy()
        pts[..., axis] += 0.5 * self.h
        return pts


@dataclass(frozen=True)
class MacroGrid:
    """Uniform grid with Dirichlet boundary on (0, D)^dim.

    m nodes per axis including both boundary nodes, spacing H = D/(m-1).
    """

    dim: int
    D: float
    m: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}")
        if self.D <= 0:
            raise ValidationError(f"domain size must be positive, got {self.D}")
        if self.m < 3:
            raise ValidationError(f"macro grid needs m >= 3 nodes, got {self.m}")

    @property
    def H(self) -> float:
        return self.D / (self.m - 1)

    @property
    def shape(self) -> tuple:
        return (self.m,) * self.dim

    @property
    def num_nodes(self) -> int:
        return self.m**self.dim

    def axis_coords(self) -> Array:
        return np.linspace(0.0, self.D, self.m)

    def node_points(self) -> Array:
        axes = [self.axis_coords()] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def edge_points(self, axis: int) -> Array:
        """Midpoints of the m-1 edges along ``axis``; other axes stay nodal."""
        x = self.axis_coords()
        xe = 0.5 * (x[:-1] + x[1:])
        axes = [x] * self.dim
        axes[axis] = xe
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def interior_slice(self) -> tuple:
        return (slice(1, -1),) * self.dim

    def boundary_mask(self) -> Array:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            mask[(slice(None),) * ax + (0,)] = True
            mask[(slice(None),) * ax + (-1,)] = True
        return mask


Grid = Union[UnitCellGrid, MacroGrid]


@dataclass
class ScalarField:
    """One real value per grid node.

    ``edge_gradient`` optionally carries a per-axis staggered gradient
    (values on edge midpoints) assembled together with the field; metric
    code prefers it over differencing the nodal values when present.
    """

    grid: Grid
    values: Array
    homogeneous_dirichlet: bool = False
    edge_gradient: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValidationError(
                f"field shape {self.values.shape} does not match grid {self.grid.shape}"
            )
        if self.homogeneous_dirichlet:
            if not isinstance(self.grid, MacroGrid):
                raise ValidationError("Dirichlet tag only applies to macro grids")
            bnd = np.abs(self.values[self.grid.boundary_mask()])
            if bnd.size and bnd.max() > 0:
                raise ValidationError("Dirichlet-tagged field has nonzero boundary values")


@dataclass
class VectorField:
    """dim real values per grid node, stored in a trailing axis."""

    grid: Grid
    values: Array

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape + (self.grid.dim,):
            raise ValidationError(
                f"vector field shape {self.values.shape} does not match grid"
            )

    def component(self, axis: int) -> ScalarField:
        return ScalarField(self.grid, self.values[..., axis])


def integrate(f: ScalarField) -> float:
    """Quadrature of a field over its domain.

    Periodic grids use the rectangle rule (exact trapezoid on a torus,
    measure |Y| = 1); Dirichlet grids use the tensor trapezoid rule over
    (0,D)^dim.
    """
    g = f.grid
    if isinstance(g, UnitCellGrid):
        return float(f.values.mean())
    w = np.full(g.m, g.H)
    w[0] = w[-1] = 0.5 * g.H
    out = f.values
    for ax in range(g.dim):
        out = np.tensordot(out, w, axes=([0], [0]))
    return float(out)


def gradient(f: ScalarField) -> VectorField:
    """Centered-difference gradient.

    Periodic grids wrap around; Dirichlet grids use second-order one-sided
    stencils at the boundary. Exact on affine fields.
    """
    g = f.grid
    comps = []
    if isinstance(g, UnitCellGrid):
        for ax in range(g.dim):
            comps.append(
                (np.roll(f.values, -1, axis=ax) - np.roll(f.values, 1, axis=ax))
                / (2.0 * g.h)
            )
    else:
        for ax in range(g.dim):
            comps.append(np.gradient(f.values, g.H, axis=ax, edge_order=2))
    return VectorField(g, np.stack(comps, axis=-1))


def _interp_periodic(cell: ScalarField, y: Array) -> Array:
    """Multilinear interpolation of a cell field at points y (..., dim)."""
    g = cell.grid
    n = g.n
    vals = cell.values
    frac = np.mod(y, 1.0) * n
    i0 = np.floor(frac).astype(int) % n
    t = frac - np.floor(frac)
    if g.dim == 1:
        a, s = i0[..., 0], t[..., 0]
        return vals[a] * (1 - s) + vals[(a + 1) % n] * s
    a, b = i0[..., 0], i0[..., 1]
    s, u = t[..., 0], t[..., 1]
    a1, b1 = (a + 1) % n, (b + 1) % n
    return (
        vals[a, b] * (1 - s) * (1 - u)
        + vals[a1, b] * s * (1 - u)
        + vals[a, b1] * (1 - s) * u
        + vals[a1, b1] * s * u
    )


def sample_periodic(cell_field: ScalarField, l: float, macro_grid: MacroGrid) -> ScalarField:
    """Evaluate a unit-cell field at y = (x/l) mod 1 on a macro grid."""
    if l <= 0:
        raise ValidationError(f"period length must be positive, got {l}")
    if not isinstance(cell_field.grid, UnitCellGrid):
        raise ValidationError("sample_periodic expects a field on a unit-cell grid")
    if cell_field.grid.dim != macro_grid.dim:
        raise ValidationError("cell and macro grids have different dimensions")
    y = macro_grid.node_points() / l
    return ScalarField(macro_grid, _interp_periodic(cell_field, y))


def sample_periodic_at(cell_field: ScalarField, l: float, points: Array) -> Array:
    """Evaluate a unit-cell field at arbitrary physical points (..., dim)."""
    if l <= 0:
        raise ValidationError(f"period length must be positive, got {l}")
    return _interp_periodic(cell_field, np.asarray(points) / l)
