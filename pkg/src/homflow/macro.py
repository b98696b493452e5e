"""Fine-scale and homogenized boundary-value solves on (0, D)^dim.

Both problems use the conservative flux discretization with coefficients
and flux sources evaluated at edge midpoints (y = x/l mod 1 for the fine
problem), homogeneous Dirichlet data, and the same staggered layout as the
cell module. 1D systems go through the direct tridiagonal solver, 2D
through preconditioned CG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import EffectiveModel
from .errors import ResolutionError, ValidationError
from .fields import CoefficientField, TwoScaleSource
from .grid import MacroGrid, ScalarField
from .linalg import SolveOptions, SparseSymMatrix, cg_solve, tridiag_solve

Array = np.ndarray

MACRO_SOLVE_OPTS = SolveOptions(rel_tol=1e-10)


@dataclass(frozen=True)
class FineProblem:
    """Oscillatory problem -div(K(x/l) grad p) = f(x,x/l) + div F(x,x/l)."""

    field: CoefficientField
    l: float
    D: float
    source: TwoScaleSource
    m: int

    def __post_init__(self):
        if self.l <= 0:
            raise ValidationError(f"period length must be positive, got {self.l}")
        if self.D / self.l < 4 - 1e-12:
            raise ValidationError(
                f"scale separation D/l >= 4 required, got {self.D / self.l:.3g}"
            )
        if self.source.dim != self.field.dim:
            raise ValidationError("source and field dimensions differ")
        _ = self.grid  # validates m

    @property
    def grid(self) -> MacroGrid:
        return MacroGrid(self.field.dim, self.D, self.m)

    @property
    def cells_per_period(self) -> float:
        return self.l / self.grid.H

    def check_resolution(self):
        if self.grid.H > self.l / 8 * (1 + 1e-9):
            raise ResolutionError(
                f"H = {self.grid.H:.4g} exceeds l/8 = {self.l / 8:.4g}; "
                "increase cells per period"
            )


@dataclass(frozen=True)
class HomogenizedProblem:
    """Constant-coefficient problem -div(K0 grad p0) = f0 + div F0."""

    model: EffectiveModel
    D: float
    m: int

    @property
    def grid(self) -> MacroGrid:
        return MacroGrid(self.model.dim, self.D, self.m)


def fine_edge_coefficients(problem: FineProblem) -> list:
    """Per-axis K samples at edge midpoints, via y = x/l mod 1."""
    g = problem.grid
    out = []
    for a in range(g.dim):
        y = np.mod(g.edge_points(a) / problem.l, 1.0)
        out.append(problem.field.diag_at(y)[..., a])
    return out


def fine_edge_flux(problem: FineProblem) -> list | None:
    """Per-axis F components at edge midpoints, or None when F is absent."""
    if problem.source.F is None:
        return None
    g = problem.grid
    out = []
    for a in range(g.dim):
        pts = g.edge_points(a)
        y = np.mod(pts / problem.l, 1.0)
        out.append(np.asarray(problem.source.F(pts, y), dtype=float)[..., a])
    return out


def _node_source(problem: FineProblem) -> Array | None:
    if problem.source.f is None:
        return None
    g = problem.grid
    pts = g.node_points()
    y = np.mod(pts / problem.l, 1.0)
    return np.asarray(problem.source.f(pts, y), dtype=float)


def _rhs_interior(grid: MacroGrid, fvals: Array | None, Fe: list | None) -> Array:
    """f + div F at interior nodes, flux differences on the staggered edges."""
    b = np.zeros(grid.shape)
    if fvals is not None:
        b += fvals
    if Fe is not None:
        H = grid.H
        for a, fe in enumerate(Fe):
            lead = (slice(None),) * a
            b[lead + (slice(1, -1),)] += (fe[lead + (slice(1, None),)]
                                          - fe[lead + (slice(None, -1),)]) / H
    return b[grid.interior_slice()]


def _solve_dirichlet_1d(grid: MacroGrid, ke: Array, b_int: Array,
                        opts: SolveOptions) -> Array:
    H = grid.H
    diag = (ke[:-1] + ke[1:]) / H**2
    off = -ke[1:-1] / H**2
    return tridiag_solve(diag, off, b_int)


def _assemble_dirichlet_2d(grid: MacroGrid, ke: list) -> SparseSymMatrix:
    m, H = grid.m, grid.H
    mi = m - 2
    lin = np.full((m, m), -1, dtype=np.int64)
    lin[1:-1, 1:-1] = np.arange(mi * mi).reshape(mi, mi)

    k1, k2 = ke  # shapes (m-1, m) and (m, m-1)
    diag = (k1[1:, 1:-1] + k1[:-1, 1:-1] + k2[1:-1, 1:] + k2[1:-1, :-1]) / H**2

    rows = [lin[1:-1, 1:-1].ravel()]
    cols = [lin[1:-1, 1:-1].ravel()]
    vals = [diag.ravel()]
    # x-direction edges between interior nodes
    a_idx = lin[1:-2, 1:-1].ravel()
    b_idx = lin[2:-1, 1:-1].ravel()
    w = (-k1[1:-1, 1:-1] / H**2).ravel()
    rows.extend((a_idx, b_idx))
    cols.extend((b_idx, a_idx))
    vals.extend((w, w))
    # y-direction edges between interior nodes
    a_idx = lin[1:-1, 1:-2].ravel()
    b_idx = lin[1:-1, 2:-1].ravel()
    w = (-k2[1:-1, 1:-1] / H**2).ravel()
    rows.extend((a_idx, b_idx))
    cols.extend((b_idx, a_idx))
    vals.extend((w, w))
    return SparseSymMatrix.from_coo(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), mi * mi
    )


def solve_fine(problem: FineProblem, opts: SolveOptions = MACRO_SOLVE_OPTS) -> ScalarField:
    """Discrete solution of the fine-scale problem."""
    problem.check_resolution()
    grid = problem.grid
    ke = fine_edge_coefficients(problem)
    Fe = fine_edge_flux(problem)
    b_int = _rhs_interior(grid, _node_source(problem), Fe)

    vals = np.zeros(grid.shape)
    if grid.dim == 1:
        vals[1:-1] = _solve_dirichlet_1d(grid, ke[0], b_int, opts)
    else:
        A = _assemble_dirichlet_2d(grid, ke)
        x = cg_solve(A, b_int.ravel(), opts)
        vals[1:-1, 1:-1] = x.reshape(grid.m - 2, grid.m - 2)
    return ScalarField(grid, vals, homogeneous_dirichlet=True)


def homogenized_edge_flux(problem: HomogenizedProblem) -> list | None:
    if problem.model.F0 is None:
        return None
    g = problem.grid
    return [np.asarray(problem.model.F0(g.edge_points(a)), dtype=float)[..., a]
            for a in range(g.dim)]


def solve_homogenized(problem: HomogenizedProblem,
                      opts: SolveOptions = MACRO_SOLVE_OPTS) -> ScalarField:
    """Discrete solution of the homogenized problem with constant tensor K0."""
    grid = problem.grid
    model = problem.model
    H = grid.H
    fvals = None
    if model.f0 is not None:
        fvals = np.asarray(model.f0(grid.node_points()), dtype=float)
    Fe = homogenized_edge_flux(problem)
    b_int = _rhs_interior(grid, fvals, Fe)

    vals = np.zeros(grid.shape)
    if grid.dim == 1:
        ke = np.full(grid.m - 1, model.K0[0, 0])
        vals[1:-1] = _solve_dirichlet_1d(grid, ke, b_int, opts)
        return ScalarField(grid, vals, homogeneous_dirichlet=True)

    k1 = np.full((grid.m - 1, grid.m), model.K0[0, 0])
    k2 = np.full((grid.m, grid.m - 1), model.K0[1, 1])
    A = _assemble_dirichlet_2d(grid, [k1, k2])
    k12 = float(model.K0[0, 1])
    if abs(k12) > 0:
        A = SparseSymMatrix(A.csr + _cross_term_2d(grid, k12))
    x = cg_solve(A, b_int.ravel(), opts)
    vals[1:-1, 1:-1] = x.reshape(grid.m - 2, grid.m - 2)
    return ScalarField(grid, vals, homogeneous_dirichlet=True)


def _cross_term_2d(grid: MacroGrid, k12: float):
    """Stencil for -2 k12 d2p/dxdy, centered cross differences, symmetric."""
    import scipy.sparse as sp

    m = grid.m
    mi = m - 2
    lin = np.full((m, m), -1, dtype=np.int64)
    lin[1:-1, 1:-1] = np.arange(mi * mi).reshape(mi, mi)
    w = -2 * k12 / (4 * grid.H**2)
    rows, cols, vals = [], [], []
    for di, dj, sgn in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
        src = lin[1:-1, 1:-1]
        dst = np.roll(np.roll(lin, -di, axis=0), -dj, axis=1)[1:-1, 1:-1]
        mask = dst >= 0  # boundary ring is -1; rolls never wrap past it
        rows.append(src[mask].ravel())
        cols.append(dst[mask].ravel())
        vals.append(np.full(mask.sum(), w * sgn))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mi * mi, mi * mi),
    ).tocsr()


def boundary_flux_balance(problem: FineProblem, p: ScalarField) -> float:
    """Relative defect of the discrete conservation statement.

    Sums the discrete boundary fluxes of K grad p and compares against the
    volume source plus the boundary flux of F.
    """
    grid = problem.grid
    H = grid.H
    ke = fine_edge_coefficients(problem)
    Fe = fine_edge_flux(problem)
    fvals = _node_source(problem)

    hface = H ** (grid.dim - 1)
    outflux = 0.0
    f_total = 0.0
    fflux = 0.0
    for a in range(grid.dim):
        # telescoping the interior equations keeps only the first/last edge
        # along axis a, at interior transverse positions
        def face(arr, end):
            idx = [slice(1, -1)] * grid.dim
            idx[a] = -1 if end else 0
            return arr[tuple(idx)]

        dp = (np.take(p.values, range(1, grid.m), axis=a)
              - np.take(p.values, range(0, grid.m - 1), axis=a)) / H
        kd = ke[a] * dp
        outflux += hface * (np.sum(face(kd, True)) - np.sum(face(kd, False)))
        if Fe is not None:
            fflux += hface * (np.sum(face(Fe[a], True)) - np.sum(face(Fe[a], False)))
    if fvals is not None:
        f_total = H**grid.dim * float(np.sum(fvals[grid.interior_slice()]))
    lhs = -outflux
    rhs = f_total + fflux
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale
