"""Compressible time-harmonic elasticity and its incompressible limit.

Solves ``grad(lam div u) + omega2 u + 2 div(mu sym_grad u) = -f`` with
``u = F`` on the boundary. The discretization reuses the Stokes stencils, with
the pressure replaced by ``lam div u``, so as ``lam`` grows the discrete
solution approaches the discrete Stokes solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import mac
from .fields import CENTER, Grid2, ScalarField, VectorField2, divergence, l2_norm, sobolev_norm
from .linsolve import (DEFAULT_TOL, Factorization, NearSingularError, SingularMatrixError,
                       SolveReport)
from .stokes import (DEFAULT_MU_FLOOR, PIVOT_FLOOR, ResonanceError, StokesProblem, check_positive,
                     dynamic_matrix, momentum_load, solve_stokes)


@dataclass(frozen=True, eq=False)
class ElasticityProblem:
    grid: Grid2
    mu: ScalarField
    lam: ScalarField
    omega2: float
    boundary_data: VectorField2
    body_force: Optional[VectorField2] = None
    mu_floor: float = DEFAULT_MU_FLOOR
    lam_floor: float = DEFAULT_MU_FLOOR

    def __post_init__(self):
        check_positive(self.mu, self.mu_floor, "mu")
        check_positive(self.lam, self.lam_floor, "lambda")
        for f in (self.mu, self.lam, self.boundary_data):
            if f.grid != self.grid:
                raise ValueError("all fields must live on the problem grid")
        if self.omega2 < 0:
            raise ValueError("omega2 must be non-negative")
        if self.body_force is not None and not self.body_force.staggered:
            raise ValueError("body force must be face-staggered")

    @property
    def lam_min(self) -> float:
        return float(self.lam.values.min())


def solve_elasticity(prob: ElasticityProblem, tol: float = DEFAULT_TOL
                     ) -> tuple[VectorField2, SolveReport]:
    """Displacement on the staggered layout.

    Boundary data are imposed exactly as in :func:`stokes.solve_stokes`
    (including the flux correction) so that both solvers see the same trace.
    """
    grid = prob.grid
    ops = mac.operators(grid)
    A = dynamic_matrix(grid, mac.cell_values(prob.mu, grid), prob.omega2,
                       lam=mac.cell_values(prob.lam, grid))
    I, B = ops.interior, ops.boundary
    A_I = A[I]
    ub = ops.boundary_values(prob.boundary_data)
    rhs = momentum_load(grid, prob.body_force) - A_I[:, B] @ ub
    try:
        x, report = Factorization(A_I[:, I], tol, symmetric=True,
                                      pivot_floor=PIVOT_FLOOR).solve(rhs)
    except (NearSingularError, SingularMatrixError) as exc:
        raise ResonanceError(f"omega2 near eigenvalue: {exc}") from exc
    full = np.zeros(ops.n_full)
    full[I], full[B] = x, ub
    return ops.full_to_faces(full), report


@dataclass
class LimitStudyResult:
    lambdas: np.ndarray
    h1_errors: np.ndarray
    div_norms: np.ndarray
    h1_slope: float
    div_slope: float
    reports: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.lambdas) <= 0):
            raise ValueError("lambda values must be strictly increasing")

    def rows(self):
        return list(zip(self.lambdas.tolist(), self.h1_errors.tolist(), self.div_norms.tolist()))

    def monotone(self, rel_tol: float = 0.05) -> bool:
        """Errors non-increasing along the list, up to ``rel_tol`` slack."""
        e = self.h1_errors
        return bool(np.all(e[1:] <= e[:-1] * (1.0 + rel_tol)))

    def to_tsv(self) -> str:
        lines = ["lambda\th1_error\tdiv_l2"]
        lines += [f"{l:.17g}\t{e:.17g}\t{d:.17g}" for l, e, d in self.rows()]
        lines.append(f"# h1_slope\t{self.h1_slope:.17g}")
        lines.append(f"# div_slope\t{self.div_slope:.17g}")
        return "\n".join(lines) + "\n"


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def limit_study(mu: ScalarField, omega2: float, F: VectorField2, lambdas: Sequence[float],
                body_force: Optional[VectorField2] = None,
                tol: float = DEFAULT_TOL) -> LimitStudyResult:
    """Distance of elasticity solutions from the Stokes solution as ``lam`` grows.

    ``lambdas`` needs at least 4 values spanning at least 3 decades; each is
    used as a spatially constant compressional modulus.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.size < 4:
        raise ValueError("limit study needs at least 4 lambda values")
    if np.any(np.diff(lam) <= 0):
        raise ValueError("lambda values must be strictly increasing")
    if lam[-1] / lam[0] < 1e3 * (1 - 1e-12):
        raise ValueError("lambda values must span at least 3 decades")
    grid = mu.grid
    ref = solve_stokes(StokesProblem(grid, mu, omega2, F, body_force), tol)
    errs, divs, reports = [], [], [ref.report]
    for value in lam:
        prob = ElasticityProblem(grid, mu, ScalarField.constant(grid, value, CENTER),
                                 omega2, F, body_force)
        u, rep = solve_elasticity(prob, tol)
        errs.append(sobolev_norm(u - ref.u, 1))
        divs.append(l2_norm(divergence(u)))
        reports.append(rep)
    errs, divs = np.array(errs), np.array(divs)
    return LimitStudyResult(lam, errs, divs, loglog_slope(lam, errs), loglog_slope(lam, divs),
                            reports)
