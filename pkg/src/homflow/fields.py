"""Coefficient fields, two-scale sources, and the built-in catalog.

A coefficient field is an evaluator mapping cell coordinates y in [0,1]^dim
to a symmetric matrix, plus declared ellipticity bounds. Fields are supplied
as callbacks rather than sampled tables so each solver picks its own
resolution. All catalog entries are diagonal (isotropic or laminated);
general symmetric matrices are supported by ``validate`` but the structured
solvers require a diagonal evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import EllipticityViolation, ValidationError

Array = np.ndarray


@dataclass(frozen=True)
class CoefficientField:
    """Periodic symmetric coefficient K(y) with ellipticity bounds.

    ``matrix`` maps points of shape (..., dim) to matrices (..., dim, dim)
    and must depend on y mod 1 only. ``diag`` is the fast evaluator for
    diagonal fields, returning (..., dim); it is None for fields with
    genuine off-diagonal entries, which the grid solvers reject.
    """

    dim: int
    matrix: Callable[[Array], Array]
    lam: float
    Lam: float
    name: str = ""
    diag: Callable[[Array], Array] | None = None
    smooth: bool = True

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}")
        if not (0 < self.lam <= self.Lam):
            raise ValidationError("ellipticity bounds need 0 < lambda <= Lambda")

    def diag_at(self, y: Array) -> Array:
        if self.diag is None:
            raise ValidationError(
                f"field {self.name!r} has off-diagonal entries; "
                "the structured-grid solvers support diagonal coefficients only"
            )
        return self.diag(np.asarray(y, dtype=float))


def isotropic_field(dim: int, k: Callable[[Array], Array], lam: float, Lam: float,
                    name: str = "", smooth: bool = True) -> CoefficientField:
    """Build K(y) = k(y) * I from a positive scalar profile k."""

    def diag(y: Array) -> Array:
        vals = np.asarray(k(y), dtype=float)
        return np.repeat(vals[..., None], dim, axis=-1)

    def matrix(y: Array) -> Array:
        vals = np.asarray(k(y), dtype=float)
        return vals[..., None, None] * np.eye(dim)

    return CoefficientField(dim, matrix, lam, Lam, name=name, diag=diag, smooth=smooth)


def diagonal_field(dim: int, ks: Callable[[Array], Array], lam: float, Lam: float,
                   name: str = "", smooth: bool = True) -> CoefficientField:
    """Build a diagonal field from ks(y) -> (..., dim)."""

    def matrix(y: Array) -> Array:
        d = np.asarray(ks(y), dtype=float)
        out = np.zeros(d.shape[:-1] + (dim, dim))
        for a in range(dim):
            out[..., a, a] = d[..., a]
        return out

    return CoefficientField(dim, matrix, lam, Lam, name=name, diag=ks, smooth=smooth)


@dataclass(frozen=True)
class TwoScaleSource:
    """Source data f(x,y) + div F(x,y) with Y-periodic micro dependence.

    ``f`` maps (x, y) pairs of shape (..., dim) to scalars (...,);
    ``F`` maps them to vectors (..., dim). Either may be None. When F is a
    sum of separable terms, F(x,y) = sum_i g_i(x) Phi_i(y), ``separable_F``
    carries the (g_i, Phi_i) pairs (a single pair may be given bare) and
    the cell machinery solves one source-corrector problem per term instead
    of one per macro point.
    """

    dim: int
    f: Callable[[Array, Array], Array] | None = None
    F: Callable[[Array, Array], Array] | None = None
    has_micro_f: bool = False
    has_micro_F: bool = False
    separable_F: tuple | None = None

    @property
    def separable_terms(self) -> tuple | None:
        """Normalized ((g, Phi), ...) view of ``separable_F``."""
        if self.separable_F is None:
            return None
        sf = self.separable_F
        if len(sf) == 2 and callable(sf[0]) and callable(sf[1]):
            return (tuple(sf),)
        return tuple(tuple(term) for term in sf)

    @staticmethod
    def zero(dim: int) -> "TwoScaleSource":
        return TwoScaleSource(dim)

    @staticmethod
    def macro(dim: int, f: Callable[[Array], Array]) -> "TwoScaleSource":
        """Scalar source with no micro-structure."""
        return TwoScaleSource(dim, f=lambda x, y: np.asarray(f(x), dtype=float))

    @staticmethod
    def constant(dim: int, value: float) -> "TwoScaleSource":
        return TwoScaleSource.macro(dim, lambda x: np.full(x.shape[:-1], float(value)))

    def shifted_flux(self, shift: Array) -> "TwoScaleSource":
        """Same source with a constant vector added to F (divergence-free)."""
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (self.dim,)).copy()
        base_F = self.F

        def F2(x, y):
            if base_F is None:
                return np.broadcast_to(shift, x.shape[:-1] + (self.dim,)).copy()
            return base_F(x, y) + shift

        shift_term = (lambda x: np.ones(np.asarray(x).shape[:-1]),
                      lambda y: np.broadcast_to(shift, np.asarray(y).shape[:-1] + (self.dim,)).copy())
        terms = self.separable_terms
        if base_F is None:
            new_terms = (shift_term,)
        elif terms is not None:
            new_terms = terms + (shift_term,)
        else:
            new_terms = None
        return TwoScaleSource(self.dim, f=self.f, F=F2,
                              has_micro_f=self.has_micro_f,
                              has_micro_F=True,
                              separable_F=new_terms)


@dataclass(frozen=True)
class EllipticityReport:
    lambda_est: float
    Lambda_est: float


def _sym_eigs_2x2(mats: Array) -> tuple:
    a = mats[..., 0, 0]
    d = mats[..., 1, 1]
    b = mats[..., 0, 1]
    tr = 0.5 * (a + d)
    disc = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + b**2, 0.0))
    return tr - disc, tr + disc


def validate(field: CoefficientField, n: int) -> EllipticityReport:
    """Sample K on the n^dim cell grid and check the declared bounds.

    Raises EllipticityViolation when a sampled matrix is asymmetric beyond
    1e-12, has a nonpositive eigenvalue, or when the sampled spectrum falls
    outside the declared [lambda, Lambda] by more than 1e-9.
    """
    if n < 4:
        raise ValidationError(f"validation needs n >= 4, got {n}")
    from .grid import UnitCellGrid

    pts = UnitCellGrid(field.dim, n).node_points()
    mats = np.asarray(field.matrix(pts), dtype=float)
    if mats.shape != pts.shape[:-1] + (field.dim, field.dim):
        raise ValidationError("matrix evaluator returned a wrong shape")

    asym = np.abs(mats - np.swapaxes(mats, -1, -2)).max()
    scale = max(1.0, np.abs(mats).max())
    if asym > 1e-12 * scale:
        raise EllipticityViolation(f"symmetry residual {asym:.3e} exceeds 1e-12")

    if field.dim == 1:
        lo = hi = mats[..., 0, 0]
    else:
        lo, hi = _sym_eigs_2x2(mats)
    lambda_est = float(lo.min())
    Lambda_est = float(hi.max())
    if lambda_est <= 0:
        raise EllipticityViolation(f"nonpositive eigenvalue {lambda_est:.3e} sampled")
    if lambda_est < field.lam - 1e-9 or Lambda_est > field.Lam + 1e-9:
        raise EllipticityViolation(
            f"sampled spectrum [{lambda_est:.6g}, {Lambda_est:.6g}] escapes "
            f"declared [{field.lam:.6g}, {field.Lam:.6g}]"
        )
    return EllipticityReport(lambda_est, Lambda_est)


# ---------------------------------------------------------------------------
# catalog

def make_cosine1d() -> CoefficientField:
    """1D cosine coefficient K(y) = 1/(2 + cos 2 pi y), bounds [1/3, 1]."""
    return isotropic_field(
        1, lambda y: 1.0 / (2.0 + np.cos(2 * np.pi * y[..., 0])),
        lam=1.0 / 3.0, Lam=1.0, name="cosine1d",
    )


def make_constant(dim: int = 2, value: float = 1.0) -> CoefficientField:
    if value <= 0:
        raise ValidationError("constant coefficient must be positive")
    return isotropic_field(
        dim, lambda y: np.full(y.shape[:-1], float(value)),
        lam=value, Lam=value, name="constant",
    )


def make_laminate(a: Callable[[Array], Array] | None = None,
                  lam: float | None = None, Lam: float | None = None) -> CoefficientField:
    """2D laminate K(y) = a(y1) * I for a positive 1-periodic profile a.

    Defaults to the cosine profile 1/(2 + cos 2 pi y1).
    """
    if a is None:
        a = lambda t: 1.0 / (2.0 + np.cos(2 * np.pi * t))
        lam, Lam = 1.0 / 3.0, 1.0
    probe = np.asarray(a(np.linspace(0.0, 1.0, 257)))
    if probe.min() <= 0:
        raise ValidationError("laminate profile must be strictly positive")
    if lam is None:
        lam, Lam = float(probe.min()), float(probe.max())
    return isotropic_field(2, lambda y: np.asarray(a(y[..., 0]), dtype=float),
                           lam=lam, Lam=Lam, name="laminate")


def make_cosine2d() -> CoefficientField:
    """Separable product (2+cos 2 pi y1)(2+cos 2 pi y2)/9, bounds [1/9, 1]."""
    return isotropic_field(
        2,
        lambda y: (2 + np.cos(2 * np.pi * y[..., 0]))
        * (2 + np.cos(2 * np.pi * y[..., 1])) / 9.0,
        lam=1.0 / 9.0, Lam=1.0, name="cosine2d",
    )


def make_cross2d() -> CoefficientField:
    """Non-separable smooth field 2 + cos(2 pi y1) cos(2 pi y2), bounds [1, 3].

    The only smooth catalog entry whose discrete effective tensor carries a
    genuine O(h^2) error; the separable entries are integrated exactly by
    the periodic midpoint rule.
    """
    return isotropic_field(
        2,
        lambda y: 2.0 + np.cos(2 * np.pi * y[..., 0]) * np.cos(2 * np.pi * y[..., 1]),
        lam=1.0, Lam=3.0, name="cross2d",
    )


def make_checkerboard(k1: float = 1.0, k2: float = 4.0) -> CoefficientField:
    """Two-phase checkerboard; discontinuous, rate tests informational only."""
    if min(k1, k2) <= 0:
        raise ValidationError("checkerboard phases must be positive")

    def k(y: Array) -> Array:
        y1 = np.mod(y[..., 0], 1.0)
        y2 = np.mod(y[..., 1], 1.0)
        phase1 = (y1 < 0.5) ^ (y2 < 0.5)
        return np.where(phase1, k1, k2).astype(float)

    return isotropic_field(2, k, lam=min(k1, k2), Lam=max(k1, k2),
                           name="checkerboard", smooth=False)


@dataclass(frozen=True)
class FieldCatalogEntry:
    name: str
    dim: int
    build: Callable[..., CoefficientField]
    description: str
    discontinuous: bool = False
    params: tuple = dc_field(default=())


FIELD_CATALOG = {
    e.name: e
    for e in (
        FieldCatalogEntry("constant", 0, make_constant,
                          "constant isotropic coefficient (params: dim, value)",
                          params=("dim", "value")),
        FieldCatalogEntry("cosine1d", 1, make_cosine1d,
                          "1D cosine coefficient 1/(2+cos 2 pi y)"),
        FieldCatalogEntry("cosine2d", 2, make_cosine2d,
                          "2D separable cosine product"),
        FieldCatalogEntry("cross2d", 2, make_cross2d,
                          "2D non-separable cosine cross term"),
        FieldCatalogEntry("laminate", 2, make_laminate,
                          "2D laminate with the cosine profile along y1"),
        FieldCatalogEntry("checkerboard", 2, make_checkerboard,
                          "2D two-phase checkerboard (params: k1, k2)",
                          discontinuous=True, params=("k1", "k2")),
    )
}


def catalog_field(name: str, **params) -> CoefficientField:
    """Instantiate a catalog field by name."""
    if name not in FIELD_CATALOG:
        known = ", ".join(sorted(FIELD_CATALOG))
        raise ValidationError(f"unknown field {name!r}; catalog has: {known}")
    entry = FIELD_CATALOG[name]
    allowed = set(entry.params)
    extra = set(params) - allowed
    if extra:
        raise ValidationError(f"field {name!r} does not accept parameters {sorted(extra)}")
    return entry.build(**params)


def permuted_field(field: CoefficientField) -> CoefficientField:
    """Swap the two coordinate axes of a 2D diagonal field."""
    if field.dim != 2:
        raise ValidationError("axis permutation needs a 2D field")

    def swap(y: Array) -> Array:
        return y[..., ::-1]

    diag = None
    if field.diag is not None:
        base_diag = field.diag
        diag = lambda y: base_diag(swap(y))[..., ::-1]
    base_matrix = field.matrix

    def matrix(y: Array) -> Array:
        m = base_matrix(swap(y))
        return m[..., ::-1, ::-1]

    return CoefficientField(2, matrix, field.lam, field.Lam,
                            name=field.name + "_permuted", diag=diag,
                            smooth=field.smooth)


def scaled_field(field: CoefficientField, c: float) -> CoefficientField:
    """Multiply a field by a positive constant."""
    if c <= 0:
        raise ValidationError("scaling constant must be positive")
    diag = None
    if field.diag is not None:
        base_diag = field.diag
        diag = lambda y: c * base_diag(y)
    base_matrix = field.matrix
    return CoefficientField(field.dim, lambda y: c * base_matrix(y),
                            c * field.lam, c * field.Lam,
                            name=f"{field.name}_x{c:g}", diag=diag,
                            smooth=field.smooth)
