"""Sparse solves for the symmetric indefinite saddle-point systems."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
# lower bound on the condition number, ||A|| ||x|| / ||b||, above which a
# solution is treated as resonant rather than returned
GROWTH_LIMIT = 1e12


class SolverError(RuntimeError):
    """Base class for linear-solve failures."""


class SingularMatrixError(SolverError):
    """The matrix is (structurally or numerically exactly) singular."""


class NearSingularError(SolverError):
    """The residual contract could not be met or the solution blew up."""


@dataclass
class SolveReport:
    relative_residual: float
    method: str
    iterations: int = 0
    condition_estimate: Optional[float] = None


def as_sparse(A, symmetric: bool = False, check: bool = False) -> sp.csr_matrix:
    """Consolidate ``A`` into CSR storage (duplicates summed)."""
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if symmetric and check:
        asym = abs(A - A.T).max() if A.nnz else 0.0
        scale = abs(A).max() if A.nnz else 1.0
        if asym > 1e-14 * scale:
            raise ValueError(f"matrix flagged symmetric but |A - A^T| = {asym:.3e}")
    return A


class Factorization:
    """Reusable LU factorization with a residual-checked solve.

    ``pivot_floor`` rejects factorizations whose smallest pivot, relative to
    the largest, falls below it. This catches singular operators even for
    right-hand sides that happen to be consistent with them.
    """

    def __init__(self, A, tol: float = DEFAULT_TOL, symmetric: bool = False,
                 pivot_floor: Optional[float] = None):
        _check_tol(tol)
        self.A = as_sparse(A)
        self.tol = tol
        # both orderings are deterministic; the symmetric one assumes a
        # nonzero diagonal and is much cheaper on SPD-like systems
        if symmetric:
            kw = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.01,
                      options=dict(SymmetricMode=True))
        else:
            kw = dict(permc_spec="COLAMD")
        try:
            self.lu = spla.splu(self.A.tocsc(), **kw)
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        self._anorm = float(abs(self.A).sum(axis=1).max()) if self.A.nnz else 0.0
        piv = np.abs(self.lu.U.diagonal())
        self.pivot_ratio = float(piv.min() / piv.max()) if piv.size and piv.max() > 0 else 0.0
        if pivot_floor is not None and self.pivot_ratio < pivot_floor:
            raise NearSingularError(
                f"smallest relative pivot {self.pivot_ratio:.3e} below {pivot_floor:.1e}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def solve(self, b) -> tuple[np.ndarray, SolveReport]:
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (self.n,):
            raise ValueError(f"rhs has shape {b.shape}, expected ({self.n},)")
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros(self.n), SolveReport(0.0, "direct", 0, None)
        x = self.lu.solve(b)
        rel = np.linalg.norm(b - self.A @ x) / bnorm
        steps = 0
        while rel > self.tol and steps < 3:
            x = x + self.lu.solve(b - self.A @ x)
            rel = np.linalg.norm(b - self.A @ x) / bnorm
            steps += 1
        method = "direct"
        if not np.all(np.isfinite(x)) or rel > self.tol:
            x, rel, steps = _krylov(self.A, b, self.tol, x if np.all(np.isfinite(x)) else None)
            method = "iterative"
        growth = self._anorm * np.abs(x).max() / np.abs(b).max()
        report = SolveReport(float(rel), method, steps, float(growth))
        if rel > self.tol:
            raise NearSingularError(
                f"relative residual {rel:.3e} above tolerance {self.tol:.1e}")
        if growth > GROWTH_LIMIT:
            raise NearSingularError(f"solution growth {growth:.3e} signals a near-singular matrix")
        return x, report


def _check_tol(tol: float):
    if not 0.0 < tol <= 1e-6:
        raise ValueError(f"tolerance must lie in (0, 1e-6], got {tol}")


def _krylov(A, b, tol, x0):
    """MINRES fallback; A is assumed symmetric."""
    iters = 0

    def count(_):
        nonlocal iters
        iters += 1

    x, _ = spla.minres(A, b, x0=x0, rtol=tol * 0.1, maxiter=min(10 * A.shape[0], 20000), callback=count)
    rel = np.linalg.norm(b - A @ x) / np.linalg.norm(b)
    log.debug("minres fallback: %d iterations, residual %.3e", iters, rel)
    return x, float(rel), iters


def solve(A, b, tol: float = DEFAULT_TOL, symmetric: bool = False
          ) -> tuple[np.ndarray, SolveReport]:
    """Solve ``A x = b`` with ``||A x - b|| / ||b|| <= tol``.

    ``symmetric=True`` selects a symmetric fill-reducing ordering; leave it
    off for saddle-point matrices with a zero diagonal block.

    Raises
    ------
    SingularMatrixError
        The factorization hit an exactly zero pivot.
    NearSingularError
        The residual stalled above ``tol`` or the solution grew beyond
        ``GROWTH_LIMIT`` times the data.
    """
    _check_tol(tol)
    return Factorization(A, tol, symmetric).solve(b)
