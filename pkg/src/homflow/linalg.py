"""Sparse symmetric solvers: Jacobi-preconditioned CG and a 1D Thomas solver.

Every elliptic solve in the toolkit reduces to one of these. Periodic cell
problems are singular with a constant nullspace; those are solved on the
zero-mean quotient space by projecting the right-hand side and the iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NoConvergence, ValidationError, ZeroPivot

Array = np.ndarray


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances and flags for cg_solve.

    rel_tol bounds the final unpreconditioned residual relative to ||b||.
    max_iter defaults to 50*sqrt(dimension). With ``nullspace`` set the
    system may be singular with a constant nullspace; b is projected onto
    zero mean and the returned solution has zero mean.
    """

    rel_tol: float = 1e-10
    max_iter: int | None = None
    nullspace: bool = False

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-4):
            raise ValidationError(f"rel_tol must lie in (0, 1e-4], got {self.rel_tol}")

    def iteration_budget(self, dimension: int) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return max(100, int(50 * math.sqrt(dimension)))


class SparseSymMatrix:
    """Symmetric sparse matrix in compressed-row layout.

    Thin wrapper over a scipy CSR matrix; construction checks structural
    and numerical symmetry so downstream CG can rely on it.
    """

    def __init__(self, csr: sp.csr_matrix):
        csr = sp.csr_matrix(csr)
        if csr.shape[0] != csr.shape[1]:
            raise ValidationError("matrix must be square")
        asym = abs(csr - csr.T)
        scale = abs(csr).max() or 1.0
        if asym.nnz and asym.max() > 1e-12 * scale:
            raise ValidationError(
                f"matrix asymmetry {asym.max():.3e} exceeds 1e-12 relative"
            )
        self._csr = csr

    @classmethod
    def from_coo(cls, rows, cols, vals, size: int) -> "SparseSymMatrix":
        m = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
        m.sum_duplicates()
        return cls(m)

    @property
    def dimension(self) -> int:
        return self._csr.shape[0]

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def diagonal(self) -> Array:
        return self._csr.diagonal()

    def matvec(self, x: Array) -> Array:
        return self._csr @ x

    def __matmul__(self, x: Array) -> Array:
        return self._csr @ x


def cg_solve(
    A: SparseSymMatrix,
    b: Array,
    opts: SolveOptions | None = None,
    energy_log: list | None = None,
) -> Array:
    """Conjugate gradient with Jacobi preconditioning.

    Returns x with ||Ax - b|| <= rel_tol * ||b||. If ``energy_log`` is a
    list it receives the CG energy functional 0.5 x'Ax - b'x per iteration,
    which decreases monotonically in exact arithmetic.
    """
    opts = opts or SolveOptions()
    b = np.asarray(b, dtype=float)
    if b.shape != (A.dimension,):
        raise ValidationError("right-hand side shape does not match matrix")
    if opts.nullspace:
        b = b - b.mean()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)

    diag = A.diagonal()
    if np.any(diag <= 0):
        raise ValidationError("matrix has nonpositive diagonal entries")
    inv_diag = 1.0 / diag

    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    budget = opts.iteration_budget(A.dimension)
    tol = opts.rel_tol * bnorm

    it = 0
    rnorm = bnorm
    while rnorm > tol:
        if it >= budget:
            raise NoConvergence("CG did not converge", rnorm / bnorm, it)
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0:
            raise NoConvergence("CG lost positive-definiteness", rnorm / bnorm, it)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if opts.nullspace:
            x -= x.mean()
            r -= r.mean()
        if energy_log is not None:
            energy_log.append(0.5 * float(x @ (A @ x)) - float(b @ x))
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        rnorm = float(np.linalg.norm(r))
        it += 1
    return x


def tridiag_solve(diag: Array, off: Array, b: Array) -> Array:
    """Thomas algorithm for a symmetric positive-definite tridiagonal system.

    ``off`` holds the n-1 sub/superdiagonal entries.
    """
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    b = np.asarray(b, dtype=float)
    n = diag.size
    if off.size != n - 1 or b.size != n:
        raise ValidationError("tridiagonal system sizes are inconsistent")

    d = diag.copy()
    rhs = b.copy()
    for i in range(1, n):
        if d[i - 1] == 0.0:
            raise ZeroPivot(f"zero pivot at row {i - 1}")
        w = off[i - 1] / d[i - 1]
        d[i] -= w * off[i - 1]
        rhs[i] -= w * rhs[i - 1]
    if d[-1] == 0.0:
        raise ZeroPivot(f"zero pivot at row {n - 1}")

    x = np.empty(n)
    x[-1] = rhs[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = (rhs[i] - off[i] * x[i + 1]) / d[i]
    return x
