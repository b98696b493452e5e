"""Periodic cell problems, the effective tensor, and effective sources.

Everything here lives on the unit cell. Discretization is the conservative
flux form with the coefficient sampled at edge midpoints: in 1D the
resulting discrete effective coefficient is exactly the harmonic mean of
the edge samples, which removes scheme bias from the closed-form checks.
All quadratures below use the same staggered edge layout as the operator,
so the discrete mass-balance and flux identities hold to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import CrossCheckFailure, ValidationError
from .fields import CoefficientField, TwoScaleSource
from .grid import ScalarField, UnitCellGrid, VectorField
from .linalg import SolveOptions, SparseSymMatrix, cg_solve

Array = np.ndarray

CELL_SOLVE_OPTS = SolveOptions(rel_tol=1e-12, nullspace=True)


def edge_coefficients(field: CoefficientField, grid: UnitCellGrid) -> list:
    """Per-axis diagonal coefficient at edge midpoints, each shaped like the grid."""
    return [field.diag_at(grid.edge_points(a))[..., a] for a in range(grid.dim)]


def cell_operator(field: CoefficientField, n: int):
    """Assemble the periodic flux-form operator; returns (matrix, edge coeffs)."""
    grid = UnitCellGrid(field.dim, n)
    ke = edge_coefficients(field, grid)
    h = grid.h
    idx = np.arange(grid.num_nodes).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for a in range(grid.dim):
        nb = np.roll(idx, -1, axis=a)
        w = (ke[a] / h**2).ravel()
        i, j = idx.ravel(), nb.ravel()
        rows.extend((i, j, i, j))
        cols.extend((i, j, j, i))
        vals.extend((w, w, -w, -w))
    A = SparseSymMatrix.from_coo(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
        grid.num_nodes,
    )
    return grid, A, ke


def _flux_divergence(grid: UnitCellGrid, flux_edges: list) -> Array:
    """Discrete divergence of an edge flux, (flux[i] - flux[i-1])/h per axis."""
    out = np.zeros(grid.shape)
    for a, fe in enumerate(flux_edges):
        if fe is not None:
            out += (fe - np.roll(fe, 1, axis=a)) / grid.h
    return out


def _edge_gradients(grid: UnitCellGrid, values: Array) -> list:
    return [(np.roll(values, -1, axis=a) - values) / grid.h for a in range(grid.dim)]


def _node_gradient(grid: UnitCellGrid, edge_grads: list) -> Array:
    """Average the two adjacent edge values onto nodes, shape + (dim,)."""
    comps = [0.5 * (g + np.roll(g, 1, axis=a)) for a, g in enumerate(edge_grads)]
    return np.stack(comps, axis=-1)


@dataclass
class CellSolution:
    """Zero-mean correctors N^1..N^dim on the unit cell.

    ``edge_grads[j][a]`` holds the staggered derivative of N^j along axis a
    at the a-edge midpoints; ``node_grads[j]`` is the same averaged to nodes
    (used when correctors are sampled at arbitrary points).
    """

    field: CoefficientField
    n: int
    N: list
    edge_grads: list
    node_grads: list
    residuals: list

    @property
    def grid(self) -> UnitCellGrid:
        return self.N[0].grid

    @property
    def dim(self) -> int:
        return self.field.dim


def _solve_cell_system(grid, A, rhs: Array, opts: SolveOptions) -> tuple:
    b = rhs.ravel()
    x = cg_solve(A, b, opts)
    res = float(np.linalg.norm(A @ x - (b - b.mean())))
    scale = float(np.linalg.norm(b)) or 1.0
    vals = x.reshape(grid.shape)
    vals = vals - vals.mean()
    return vals, res / scale


def solve_cell(field: CoefficientField, n: int,
               opts: SolveOptions = CELL_SOLVE_OPTS) -> CellSolution:
    """Solve the corrector problems for every axis on an n^dim cell grid."""
    if n < 8:
        raise ValidationError(f"cell solves need n >= 8, got {n}")
    grid, A, ke = cell_operator(field, n)
    N, egrads, ngrads, residuals = [], [], [], []
    for j in range(field.dim):
        flux = [ke[a] if a == j else None for a in range(grid.dim)]
        rhs = _flux_divergence(grid, flux)
        vals, res = _solve_cell_system(grid, A, rhs, opts)
        N.append(ScalarField(grid, vals))
        eg = _edge_gradients(grid, vals)
        egrads.append(eg)
        ngrads.append(VectorField(grid, _node_gradient(grid, eg)))
        residuals.append(res)
    return CellSolution(field, n, N, egrads, ngrads, residuals)


def solve_corrector(field: CoefficientField, n: int, j: int,
                    opts: SolveOptions = CELL_SOLVE_OPTS) -> ScalarField:
    """Zero-mean periodic corrector N^j for a unit gradient along axis j."""
    if not 0 <= j < field.dim:
        raise ValidationError(f"axis {j} out of range for dim {field.dim}")
    if n < 8:
        raise ValidationError(f"cell solves need n >= 8, got {n}")
    grid, A, ke = cell_operator(field, n)
    flux = [ke[a] if a == j else None for a in range(grid.dim)]
    vals, _ = _solve_cell_system(grid, A, _flux_divergence(grid, flux), opts)
    return ScalarField(grid, vals)


def effective_tensor(field: CoefficientField, cell: CellSolution) -> Array:
    """Effective tensor via the scheme-consistent edge quadrature.

    K0[a, j] = <k_a (d_a N^j + delta_aj)> over a-edges. In 1D this equals
    the discrete harmonic mean of the edge coefficients exactly.
    """
    if cell.field is not field and cell.field.name != field.name:
        raise ValidationError("cell solution was computed for a different field")
    grid = cell.grid
    ke = edge_coefficients(field, grid)
    d = field.dim
    K0 = np.zeros((d, d))
    for j in range(d):
        for a in range(d):
            K0[a, j] = float(np.mean(ke[a] * (cell.edge_grads[j][a] + (1.0 if a == j else 0.0))))
    return K0


def voigt_reuss_bounds(field: CoefficientField, n: int) -> tuple:
    """(Reuss, Voigt) bound matrices from the same edge samples the scheme uses."""
    grid = UnitCellGrid(field.dim, n)
    ke = edge_coefficients(field, grid)
    d = field.dim
    reuss = np.zeros((d, d))
    voigt = np.zeros((d, d))
    for a in range(d):
        voigt[a, a] = float(np.mean(ke[a]))
        reuss[a, a] = 1.0 / float(np.mean(1.0 / ke[a]))
    return reuss, voigt


def solve_source_corrector(field: CoefficientField, F, n: int, x: Array | None = None,
                           opts: SolveOptions = CELL_SOLVE_OPTS) -> ScalarField:
    """Zero-mean cell solution w of -div_y(K grad_y w) = div_y F.

    ``F`` is either a cell flux Phi(y) -> (..., dim), or a two-scale flux
    F(x, y) frozen at the macro point ``x``.
    """
    if n < 8:
        raise ValidationError(f"cell solves need n >= 8, got {n}")
    grid, A, _ = cell_operator(field, n)
    if x is not None:
        x = np.asarray(x, dtype=float).reshape(field.dim)
        Fy = lambda y: F(np.broadcast_to(x, y.shape[:-1] + (field.dim,)), y)
    else:
        Fy = F
    flux = [np.asarray(Fy(grid.edge_points(a)), dtype=float)[..., a] for a in range(grid.dim)]
    vals, _ = _solve_cell_system(grid, A, _flux_divergence(grid, flux), opts)
    return ScalarField(grid, vals)


@dataclass
class SeparableCorrectorTerm:
    """One g(x) Phi(y) term of a separable flux with its cell response."""

    g: Callable
    Phi: Callable
    w_hat: ScalarField
    edge_grads: list
    node_grad: Array


@dataclass
class SourceCorrector:
    """Cell response w(x, .) to a micro-structured flux.

    For a flux that is a sum of separable terms g_i(x) Phi_i(y) one cell
    problem per term suffices and w(x, .) = sum_i g_i(x) w_hat_i; otherwise
    w is solved per macro point and cached.
    """

    field: CoefficientField
    source: TwoScaleSource
    n: int
    terms: list | None = None
    _cache: dict = dc_field(default_factory=dict, repr=False)

    @property
    def separable(self) -> bool:
        return self.terms is not None

    def cell_field_at(self, x: Array) -> ScalarField:
        """w(x, .) as a zero-mean cell field."""
        if self.separable:
            xa = np.asarray(x, dtype=float).reshape(1, -1)
            grid = self.terms[0].w_hat.grid
            vals = np.zeros(grid.shape)
            for term in self.terms:
                vals += float(np.asarray(term.g(xa))[0]) * term.w_hat.values
            return ScalarField(grid, vals)
        key = tuple(np.round(np.asarray(x, dtype=float).ravel(), 12))
        if key not in self._cache:
            self._cache[key] = solve_source_corrector(self.field, self.source.F, self.n, x=x)
        return self._cache[key]


def source_corrector(field: CoefficientField, source: TwoScaleSource,
                     n: int) -> SourceCorrector | None:
    """Build the source corrector for a two-scale flux; None if no micro flux."""
    if source.F is None or not source.has_micro_F:
        return None
    terms = source.separable_terms
    if terms is not None:
        built = []
        for g, Phi in terms:
            w_hat = solve_source_corrector(field, Phi, n)
            eg = _edge_gradients(w_hat.grid, w_hat.values)
            built.append(SeparableCorrectorTerm(
                g, Phi, w_hat, eg, _node_gradient(w_hat.grid, eg)))
        return SourceCorrector(field, source, n, terms=built)
    return SourceCorrector(field, source, n)


@dataclass
class EffectiveSources:
    """Homogenized sources f0(x) and F0(x) with vectorized evaluators."""

    dim: int
    f0: Callable | None
    F0: Callable | None
    cross_check_gap: float = 0.0


def _flux_average(field: CoefficientField, grid: UnitCellGrid,
                  flux_edges: list, w_edge_grads: list | None) -> Array:
    """<F + K grad_y w> by edge quadrature, one entry per axis."""
    ke = edge_coefficients(field, grid)
    out = np.zeros(grid.dim)
    for a in range(grid.dim):
        term = flux_edges[a]
        if w_edge_grads is not None:
            term = term + ke[a] * w_edge_grads[a]
        out[a] = float(np.mean(term))
    return out


def _corrector_weighted_average(grid: UnitCellGrid, flux_edges: list,
                                cell: CellSolution) -> Array:
    """<F . (e_i + grad_y N^i)> by edge quadrature, the cross-check identity."""
    out = np.zeros(grid.dim)
    for i in range(grid.dim):
        acc = 0.0
        for a in range(grid.dim):
            acc += float(np.mean(flux_edges[a] * (cell.edge_grads[i][a] + (1.0 if a == i else 0.0))))
        out[i] = acc
    return out


def effective_source(source: TwoScaleSource, field: CoefficientField,
                     cell: CellSolution, w: SourceCorrector | None,
                     n_average: int = 64,
                     cross_check_points: Array | None = None) -> EffectiveSources:
    """Homogenized sources: f0 = <f(x,.)>, F0 = <F(x,.) + K grad_y w(x,.)>.

    F0 is additionally verified against <F (e_i + grad_y N^i)>; the two
    edge quadratures agree to solver tolerance by the discrete weak forms,
    so a larger gap indicates an inconsistent corrector and raises
    CrossCheckFailure.
    """
    dim = field.dim
    grid = cell.grid

    f0 = None
    if source.f is not None:
        if not source.has_micro_f:
            f0 = lambda x: np.asarray(source.f(x, np.zeros_like(x)), dtype=float)
        else:
            ypts = UnitCellGrid(dim, n_average).node_points().reshape(-1, dim)

            def f0(x, _y=ypts):
                x = np.asarray(x, dtype=float)
                lead = x.shape[:-1]
                xf = x.reshape(-1, 1, dim)
                vals = np.asarray(source.f(np.broadcast_to(xf, (xf.shape[0], _y.shape[0], dim)),
                                           np.broadcast_to(_y, (xf.shape[0], _y.shape[0], dim))))
                return vals.mean(axis=1).reshape(lead)

    F0 = None
    gap = 0.0
    if source.F is not None:
        if not source.has_micro_F:
            F0 = lambda x: np.asarray(source.F(x, np.zeros_like(x)), dtype=float)
        elif w is not None and w.separable:
            means, gs = [], []
            gap = 0.0
            scale = 1.0
            for term in w.terms:
                flux_edges = [np.asarray(term.Phi(grid.edge_points(a)))[..., a]
                              for a in range(dim)]
                mean_flux = _flux_average(field, grid, flux_edges, term.edge_grads)
                check = _corrector_weighted_average(grid, flux_edges, cell)
                gap = max(gap, float(np.max(np.abs(mean_flux - check))))
                scale = max(scale, float(np.max(np.abs(mean_flux))))
                means.append(mean_flux)
                gs.append(term.g)
            if gap > 10 * CELL_SOLVE_OPTS.rel_tol * scale * 1e2:
                raise CrossCheckFailure(
                    f"effective flux formulas disagree by {gap:.3e}"
                )

            def F0(x, _means=means, _gs=gs):
                out = 0.0
                for g, m in zip(_gs, _means):
                    out = out + np.asarray(g(x), dtype=float)[..., None] * m
                return out
        else:
            if w is None:
                raise ValidationError(
                    "a micro-structured flux needs its source corrector"
                )

            def F0(x):
                x = np.asarray(x, dtype=float)
                lead = x.shape[:-1]
                xf = x.reshape(-1, dim)
                out = np.zeros((xf.shape[0], dim))
                for k, xp in enumerate(xf):
                    wf = w.cell_field_at(xp)
                    eg = _edge_gradients(grid, wf.values)
                    fe = [np.asarray(source.F(np.broadcast_to(xp, grid.edge_points(a).shape[:-1] + (dim,)),
                                              grid.edge_points(a)))[..., a]
                          for a in range(dim)]
                    out[k] = _flux_average(field, grid, fe, eg)
                return out.reshape(lead + (dim,))

            if cross_check_points is not None:
                for xp in np.atleast_2d(cross_check_points):
                    fe = [np.asarray(source.F(np.broadcast_to(xp, grid.edge_points(a).shape[:-1] + (dim,)),
                                              grid.edge_points(a)))[..., a]
                          for a in range(dim)]
                    direct = F0(np.asarray(xp).reshape(1, dim))[0]
                    check = _corrector_weighted_average(grid, fe, cell)
                    gap = max(gap, float(np.max(np.abs(direct - check))))
                scale = 1.0
                if gap > 10 * CELL_SOLVE_OPTS.rel_tol * scale * 1e2:
                    raise CrossCheckFailure(
                        f"effective flux formulas disagree by {gap:.3e}"
                    )

    return EffectiveSources(dim, f0, F0, gap)


@dataclass
class MassBalance:
    """Micro/macro flux comparison for one unit gradient direction."""

    eta: Array
    micro_flux: Array
    macro_flux: Array
    mean_gradient: Array

    @property
    def defect(self) -> float:
        return float(np.linalg.norm(self.micro_flux - self.macro_flux))


def mass_balance_check(field: CoefficientField, n: int, eta: Array,
                       opts: SolveOptions = CELL_SOLVE_OPTS) -> MassBalance:
    """Solve the cell problem with p_eta - eta.x periodic and compare fluxes.

    Returns the defect ||<K grad p_eta> - K0 eta|| together with both sides;
    the mean-gradient identity <grad p_eta> = eta holds exactly for the
    flux discretization and is asserted here.
    """
    eta = np.asarray(eta, dtype=float).reshape(field.dim)
    if not np.isclose(np.linalg.norm(eta), 1.0):
        raise ValidationError("eta must be a unit vector")
    grid, A, ke = cell_operator(field, n)
    flux = [eta[a] * ke[a] for a in range(grid.dim)]
    phi, _ = _solve_cell_system(grid, A, _flux_divergence(grid, flux), opts)

    egrads = _edge_gradients(grid, phi)
    micro = np.array([float(np.mean(ke[a] * (egrads[a] + eta[a]))) for a in range(grid.dim)])
    mean_grad = np.array([float(np.mean(egrads[a])) + eta[a] for a in range(grid.dim)])
    if np.max(np.abs(mean_grad - eta)) > 1e-12:
        raise ValidationError("mean gradient of the cell solution deviates from eta")

    cellsol = solve_cell(field, n, opts)
    K0 = effective_tensor(field, cellsol)
    return MassBalance(eta, micro, K0 @ eta, mean_grad)


@dataclass
class EffectiveModel:
    """Effective tensor plus homogenized sources and provenance metadata."""

    dim: int
    K0: Array
    lam: float
    Lam: float
    n: int
    residuals: list
    f0: Callable | None = None
    F0: Callable | None = None
    field_name: str = ""

    def __post_init__(self):
        self.K0 = np.asarray(self.K0, dtype=float)
        if self.K0.shape != (self.dim, self.dim):
            raise ValidationError("K0 shape does not match dim")
        if np.max(np.abs(self.K0 - self.K0.T)) > 1e-8 * max(1.0, np.abs(self.K0).max()):
            raise ValidationError("K0 is not symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (self.K0 + self.K0.T))
        if eigs.min() <= 0:
            raise ValidationError("K0 is not positive definite")

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "K0": [float(v) for v in self.K0.ravel()],
            "lambda": self.lam,
            "Lambda": self.Lam,
            "n": self.n,
            "residuals": [float(r) for r in self.residuals],
        }


def build_effective_model(field: CoefficientField, n: int,
                          source: TwoScaleSource | None = None,
                          opts: SolveOptions = CELL_SOLVE_OPTS) -> tuple:
    """Solve the cell problems and package (model, cell solution, corrector)."""
    cellsol = solve_cell(field, n, opts)
    K0 = effective_tensor(field, cellsol)
    w = None
    f0 = F0 = None
    if source is not None:
        w = source_corrector(field, source, n)
        eff = effective_source(source, field, cellsol, w)
        f0, F0 = eff.f0, eff.F0
    model = EffectiveModel(field.dim, K0, field.lam, field.Lam, n,
                           cellsol.residuals, f0=f0, F0=F0, field_name=field.name)
    return model, cellsol, w
