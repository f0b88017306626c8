"""Time-harmonic incompressible Stokes solver with variable shear modulus.

Solves ``omega2 u + 2 div(mu sym_grad u) + grad p = -f`` with ``div u = 0``,
``u = F`` on the boundary and zero-mean pressure. Negating the momentum rows
gives the symmetric saddle-point form returned by :func:`assemble_stokes`::

    [ K(mu) - omega2 M   D^T   0 ] [u]   [ M f - K_b F ]
    [ D                  0     e ] [p] = [ -D_b F      ]
    [ 0                  e^T   0 ] [l]   [ 0           ]

``e`` is the cell-area vector and ``l`` the multiplier of the pressure-mean
constraint. :func:`solve_stokes` solves the same system exactly on the
discretely divergence-free subspace: velocities are written as the discrete
curl of a node stream function, the reduced symmetric system is factorized
directly, and the pressure is recovered from a Neumann pressure-Poisson solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import mac
from .fields import CENTER, Grid2, ScalarField, VectorField2, divergence, l2_norm, sobolev_norm
from .linsolve import (DEFAULT_TOL, Factorization, NearSingularError, SingularMatrixError,
                       SolveReport)

DEFAULT_MU_FLOOR = 1e-8
# the reduced system is fourth order and its own residual floor sits near
# 1e-10 already at 128^2; the contract is enforced on the Stokes system instead
REDUCED_TOL = 1e-6
# relative LU pivot below which omega2 is treated as a discrete eigenvalue
PIVOT_FLOOR = 1e-12


class AdmissibilityError(ValueError):
    """A coefficient violates its positivity floor."""


class ResonanceError(NearSingularError):
    """omega2 sits at (or numerically next to) an eigenvalue of the operator."""


@dataclass(frozen=True, eq=False)
class StokesProblem:
    grid: Grid2
    mu: ScalarField
    omega2: float
    boundary_data: VectorField2
    body_force: Optional[VectorField2] = None
    mu_floor: float = DEFAULT_MU_FLOOR

    def __post_init__(self):
        check_positive(self.mu, self.mu_floor, "mu")
        if self.mu.grid != self.grid:
            raise ValueError("mu lives on a different grid")
        if self.omega2 < 0:
            raise ValueError("omega2 must be non-negative")
        if self.boundary_data.grid != self.grid:
            raise ValueError("boundary data lives on a different grid")
        if self.body_force is not None and not self.body_force.staggered:
            raise ValueError("body force must be face-staggered")


@dataclass(eq=False)
class StokesSolution:
    u: VectorField2
    p: ScalarField
    report: SolveReport


def check_positive(f: ScalarField, floor: float, name: str):
    if floor <= 0:
        raise AdmissibilityError(f"{name} floor must be positive")
    if f.location != CENTER:
        raise AdmissibilityError(f"{name} must be cell-centred")
    low = float(f.values.min())
    if low < floor:
        raise AdmissibilityError(f"min({name}) = {low:.6g} is below the floor {floor:.6g}")


def momentum_load(grid: Grid2, body_force: Optional[VectorField2]) -> np.ndarray:
    """``M f`` on the interior faces."""
    ops = mac.operators(grid)
    if body_force is None:
        return np.zeros(ops.interior.size)
    return (ops.face_mass * ops.face_vector(body_force))[ops.interior]


def dynamic_matrix(grid: Grid2, mu: np.ndarray, omega2: float,
                   lam: Optional[np.ndarray] = None) -> sp.csr_matrix:
    """``K(mu) [+ G(lam)] - omega2 M`` on the full velocity vector."""
    ops = mac.operators(grid)
    mass = np.zeros(ops.n_full)
    mass[:ops.n_faces] = ops.face_mass
    A = ops.stiffness(mu) - omega2 * sp.diags(mass)
    if lam is not None:
        A = A + ops.grad_div(lam)
    return A.tocsr()


class StokesOperator:
    """Factorized Stokes operator for one ``(mu, omega2)``.

    The factorization serves every right-hand side: forward solves with
    different boundary data as well as adjoint solves.
    """

    def __init__(self, grid: Grid2, mu: np.ndarray, omega2: float, tol: float = DEFAULT_TOL):
        self.grid = grid
        self.omega2 = float(omega2)
        self.tol = tol
        self.ops = mac.operators(grid)
        self.stream = mac.stream_operators(grid)
        self.mu = np.array(mu, dtype=np.float64).ravel()
        ops = self.ops
        A = dynamic_matrix(grid, self.mu, self.omega2)
        A_I = A[ops.interior]
        self.A_II = A_I[:, ops.interior].tocsr()
        self.A_IB = A_I[:, ops.boundary].tocsr()
        Z = self.stream.z
        reduced = (Z.T @ self.A_II @ Z).tocsr()
        try:
            self._factor = Factorization(reduced, REDUCED_TOL, symmetric=True,
                                         pivot_floor=PIVOT_FLOOR)
        except (NearSingularError, SingularMatrixError) as exc:
            raise ResonanceError(f"omega2 near eigenvalue: {exc}") from exc

    def _reduced_solve(self, rhs: np.ndarray) -> tuple[np.ndarray, SolveReport]:
        try:
            return self._factor.solve(rhs)
        except NearSingularError as exc:
            raise ResonanceError(f"omega2 near eigenvalue: {exc}") from exc

    def velocity(self, ub: np.ndarray, load: np.ndarray) -> tuple[np.ndarray, SolveReport]:
        """Interior face velocities for Dirichlet entries ``ub`` and load ``M f``."""
        ops, st = self.ops, self.stream
        psi = mac.boundary_stream(self.grid, ub)
        lift = (st.curl[:, st.outer] @ psi[st.outer])
        lift_I = np.zeros(ops.n_full)
        lift_I[:ops.n_faces] = lift
        lift_I = lift_I[ops.interior]
        rhs = st.z.T @ (load - self.A_IB @ ub - self.A_II @ lift_I)
        phi, report = self._reduced_solve(rhs)
        return st.z @ phi + lift_I, report

    def pressure(self, u_I: np.ndarray, ub: np.ndarray, load: np.ndarray) -> np.ndarray:
        """Zero-mean pressure from the momentum rows, ``D_I^T p = load - A u``."""
        ops = self.ops
        r = load - self.A_II @ u_I - self.A_IB @ ub
        DI = ops.div[:, ops.interior]
        rhs = np.concatenate([DI @ r, [0.0]])
        x, _ = mac.pressure_poisson(self.grid).solve(rhs)
        p = x[:ops.n_cells]
        return p - p.mean()

    def full_velocity(self, u_I: np.ndarray, ub: np.ndarray) -> np.ndarray:
        full = np.zeros(self.ops.n_full)
        full[self.ops.interior] = u_I
        full[self.ops.boundary] = ub
        return full

    def relative_residual(self, u_I: np.ndarray, p: np.ndarray, ub: np.ndarray,
                          load: np.ndarray) -> float:
        """``||S x - rhs|| / ||rhs||`` for the saddle system of :func:`assemble_stokes`."""
        ops = self.ops
        D = ops.div
        DI, DB = D[:, ops.interior], D[:, ops.boundary]
        f_mom = load - self.A_IB @ ub
        f_div = -(DB @ ub)
        r_mom = f_mom - self.A_II @ u_I - DI.T @ p
        r_div = f_div - DI @ u_I
        r_mean = self.grid.cell_area * p.sum()
        num = np.sqrt(r_mom @ r_mom + r_div @ r_div + r_mean ** 2)
        den = np.sqrt(f_mom @ f_mom + f_div @ f_div)
        return 0.0 if den == 0 else float(num / den)

    def solve(self, ub: np.ndarray, load: np.ndarray) -> StokesSolution:
        u_I, inner = self.velocity(ub, load)
        p = self.pressure(u_I, ub, load)
        rel = self.relative_residual(u_I, p, ub, load)
        if rel > self.tol:
            raise ResonanceError(f"Stokes residual {rel:.3e} above tolerance {self.tol:.1e}")
        report = SolveReport(rel, inner.method, inner.iterations, inner.condition_estimate)
        g = self.grid
        u = self.ops.full_to_faces(self.full_velocity(u_I, ub))
        return StokesSolution(u, ScalarField(g, CENTER, p.reshape(g.shape(CENTER))), report)


def operator_for(prob: StokesProblem, tol: float = DEFAULT_TOL) -> StokesOperator:
    return StokesOperator(prob.grid, mac.cell_values(prob.mu, prob.grid), prob.omega2, tol)


def assemble_stokes(prob: StokesProblem) -> tuple[sp.csr_matrix, np.ndarray]:
    """Symmetric indefinite saddle-point matrix and right-hand side.

    Unknowns are ordered as interior face velocities (x-faces then y-faces,
    C order), cell pressures, then the pressure-mean multiplier.
    """
    grid = prob.grid
    ops = mac.operators(grid)
    ub = ops.boundary_values(prob.boundary_data)
    load = momentum_load(grid, prob.body_force)
    A = dynamic_matrix(grid, mac.cell_values(prob.mu, grid), prob.omega2)
    I, B = ops.interior, ops.boundary
    A_I = A[I]
    D = ops.div
    e = sp.csr_matrix(np.full((ops.n_cells, 1), grid.cell_area))
    S = sp.bmat([[A_I[:, I], D[:, I].T, None],
                 [D[:, I], None, e],
                 [None, e.T, None]], format="csr")
    rhs = np.concatenate([load - A_I[:, B] @ ub, -(D[:, B] @ ub), [0.0]])
    return S, rhs


def solve_stokes(prob: StokesProblem, tol: float = DEFAULT_TOL) -> StokesSolution:
    """Solve the Stokes problem.

    Raises
    ------
    ResonanceError
        ``omega2`` is (numerically) an eigenvalue: the solve either missed the
        residual contract or produced a resonant blow-up.
    """
    op = operator_for(prob, tol)
    ub = op.ops.boundary_values(prob.boundary_data)
    return op.solve(ub, momentum_load(prob.grid, prob.body_force))


def residual_vector(prob: StokesProblem, sol: StokesSolution) -> np.ndarray:
    """Saddle-system residual of ``(u, p)`` with the multiplier set to zero."""
    S, rhs = assemble_stokes(prob)
    ops = mac.operators(prob.grid)
    x = np.concatenate([ops.face_vector(sol.u)[ops.interior], sol.p.values.ravel(), [0.0]])
    return S @ x - rhs


def residual_norm(prob: StokesProblem, sol: StokesSolution) -> float:
    """Euclidean norm of the momentum, continuity and mean-pressure residuals."""
    return float(np.linalg.norm(residual_vector(prob, sol)))


def incompressibility_defect(sol: StokesSolution) -> float:
    """``||div u||_{L2} / ||u||_{H1}`` (zero for the zero field)."""
    h1 = sobolev_norm(sol.u, 1)
    return 0.0 if h1 == 0 else l2_norm(divergence(sol.u)) / h1
