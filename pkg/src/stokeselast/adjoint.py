"""Data misfit, adjoint Stokes solve and the shape derivative in ``mu``.

The misfit is ``J(mu) = 1/2 sum_k ||u_k(mu) - u_m,k||^2`` with trapezoidal
quadrature on the faces. Because ``J`` is differentiated at the discrete level,
the returned gradient is the exact derivative of the discrete misfit; in the
continuum it tends to ``2 sym_grad v : sym_grad u`` where ``v`` solves the
adjoint problem

    2 div(mu sym_grad v) + omega2 v + grad q = u - u_m,   v = 0 on the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import mac
from .fields import CENTER, Grid2, ScalarField, VectorField2, boundary_ring, l2_inner, l2_norm
from .linsolve import DEFAULT_TOL, SolveReport
from .stokes import StokesOperator, check_positive, DEFAULT_MU_FLOOR

RING_WIDTH = 1
ORTHO_REJECT = 1e-3


@dataclass(frozen=True, eq=False)
class Measurement:
    boundary_data: VectorField2   # node-collocated trace F
    measured: VectorField2        # face-staggered u_m
    label: str = ""

    def __post_init__(self):
        if self.boundary_data.staggered:
            raise ValueError("boundary data must be node-collocated")
        if not self.measured.staggered:
            raise ValueError("measured field must be face-staggered")
        if self.boundary_data.grid != self.measured.grid:
            raise ValueError("boundary data and measurement live on different grids")


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Measurements sharing one grid, plus the noise that was added to them.

    ``noise_level`` is relative (``||eta|| / ||u||`` per record) and
    ``noise_norm`` the absolute ``L2`` norm of all added noise, which is the
    ``delta`` of the discrepancy principle.
    """

    records: tuple
    noise_model: str = "none"
    noise_level: float = 0.0
    noise_norm: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValueError("a measurement set needs at least one record")
        g = self.records[0].measured.grid
        if any(r.measured.grid != g for r in self.records):
            raise ValueError("all measurements must share one grid")
        if self.noise_level < 0 or self.noise_norm < 0:
            raise ValueError("noise metadata must be non-negative")

    @property
    def grid(self) -> Grid2:
        return self.records[0].measured.grid

    @property
    def noisy(self) -> bool:
        return self.noise_model != "none" and self.noise_norm > 0

    def subset(self, indices: Sequence[int]) -> "MeasurementSet":
        return MeasurementSet(tuple(self.records[i] for i in indices), self.noise_model,
                              self.noise_level, self.noise_norm, self.seed)


@dataclass
class GradientResult:
    objective: float
    gradient: ScalarField               # L2 gradient, zero on the boundary ring
    residual_norms: list
    forward_reports: list = field(default_factory=list, repr=False)
    adjoint_reports: list = field(default_factory=list, repr=False)
    sensitivity: Optional[np.ndarray] = field(default=None, repr=False)  # dJ/dmu per cell

    @property
    def gradient_norm(self) -> float:
        return l2_norm(self.gradient)


class MisfitState:
    """Forward solves for every measurement at one ``mu``.

    Holds the factorized operator so that the adjoint solves of
    :meth:`gradient` reuse it.
    """

    def __init__(self, mu: ScalarField, omega2: float, data: MeasurementSet,
                 tol: float = DEFAULT_TOL, mu_floor: float = DEFAULT_MU_FLOOR):
        check_positive(mu, mu_floor, "mu")
        if mu.grid != data.grid:
            raise ValueError("mu and measurements live on different grids")
        self.mu = mu
        self.data = data
        grid = data.grid
        self.ops = mac.operators(grid)
        self.op = StokesOperator(grid, mac.cell_values(mu, grid), omega2, tol)
        no_load = np.zeros(self.ops.interior.size)
        self.ub, self.u_full, self.residuals, self.forward_reports = [], [], [], []
        for rec in data.records:
            ub = self.ops.boundary_values(rec.boundary_data)
            sol = self.op.solve(ub, no_load)
            full = self.ops.faces_to_full(sol.u, ub)
            report = sol.report
            self.ub.append(ub)
            self.u_full.append(full)
            self.residuals.append(full[:self.ops.n_faces] - self.ops.face_vector(rec.measured))
            self.forward_reports.append(report)
        w = self.ops.face_quad
        self.residual_norms = [float(np.sqrt(np.sum(w * r * r))) for r in self.residuals]
        self.objective = 0.5 * float(sum(n * n for n in self.residual_norms))

    def velocity(self, k: int = 0) -> VectorField2:
        return self.ops.full_to_faces(self.u_full[k])

    def gradient(self) -> GradientResult:
        grid = self.data.grid
        ops = self.ops
        sens = np.zeros(ops.n_cells)
        adjoint_reports = []
        zero_ub = np.zeros(ops.boundary.size)
        for full, r in zip(self.u_full, self.residuals):
            # v = -Lambda where Lambda carries the misfit weight W r as load
            load = (ops.face_quad * r)[ops.interior]
            sol = self.op.solve(zero_ub, load)
            sens -= ops.stiffness_derivative(ops.faces_to_full(sol.u, zero_ub), full)
            adjoint_reports.append(sol.report)
        g = (sens / grid.cell_area).reshape(grid.shape(CENTER))
        g[boundary_ring(grid, RING_WIDTH)] = 0.0
        return GradientResult(self.objective, ScalarField(grid, CENTER, g), self.residual_norms,
                              self.forward_reports, adjoint_reports, sens)


def objective(mu: ScalarField, omega2: float, data: MeasurementSet,
              tol: float = DEFAULT_TOL) -> float:
    """``1/2 sum_k ||u_k(mu) - u_m,k||^2``."""
    return MisfitState(mu, omega2, data, tol).objective


def gradient(mu: ScalarField, omega2: float, data: MeasurementSet,
             tol: float = DEFAULT_TOL) -> GradientResult:
    """Misfit and its ``L2`` gradient in ``mu``, zeroed on the boundary ring."""
    return MisfitState(mu, omega2, data, tol).gradient()


def solve_adjoint(mu: ScalarField, omega2: float, residual: VectorField2,
                  tol: float = DEFAULT_TOL) -> tuple[VectorField2, ScalarField]:
    """Adjoint velocity and zero-mean pressure for the source ``residual``.

    Solves ``2 div(mu sym_grad v) + omega2 v + grad q = residual`` with
    ``v = 0`` on the boundary, using the same discrete operator as the
    forward solve.
    """
    grid = mu.grid
    if residual.grid != grid or not residual.staggered:
        raise ValueError("residual must be face-staggered on the grid of mu")
    check_positive(mu, DEFAULT_MU_FLOOR, "mu")
    op = StokesOperator(grid, mac.cell_values(mu, grid), omega2, tol)
    ops = op.ops
    # forward convention is L u = -f, so the source enters with a minus sign
    load = -(ops.face_mass * ops.face_vector(residual))[ops.interior]
    sol = op.solve(np.zeros(ops.boundary.size), load)
    return sol.u, sol.p


@dataclass
class DirectionCheck:
    exact: float                 # <gradient, direction> in L2
    estimates: np.ndarray        # central differences, one per epsilon
    mismatches: np.ndarray       # relative |estimate - exact| / |exact|

    @property
    def best(self) -> float:
        return float(np.min(self.mismatches))


@dataclass
class GradientCheck:
    epsilons: np.ndarray
    directions: list

    @property
    def max_mismatch(self) -> float:
        """Worst direction's best-over-epsilon relative mismatch."""
        return max(d.best for d in self.directions)

    def to_tsv(self) -> str:
        lines = ["direction\texact\tbest_mismatch\t"
                 + "\t".join(f"eps={float(e)!r}" for e in self.epsilons)]
        for k, d in enumerate(self.directions):
            lines.append("\t".join([str(k), repr(d.exact), repr(d.best)]
                                   + [repr(float(m)) for m in d.mismatches]))
        return "\n".join(lines) + "\n"


def smooth_direction(grid: Grid2, rng: np.random.Generator, n_modes: int = 3,
                     max_freq: int = 3) -> ScalarField:
    """Random sum of low sine modes times a bump that vanishes on the boundary."""
    X, Y = grid.coords(CENTER)
    s = (X - grid.origin[0]) / grid.lx
    t = (Y - grid.origin[1]) / grid.ly
    d = np.zeros_like(X)
    for _ in range(n_modes):
        a, b = rng.integers(1, max_freq + 1, 2)
        d += rng.standard_normal() * np.sin(np.pi * a * s) * np.sin(np.pi * b * t)
    d *= (np.sin(np.pi * s) * np.sin(np.pi * t)) ** 2
    d[boundary_ring(grid, RING_WIDTH)] = 0.0
    return ScalarField(grid, CENTER, d / np.max(np.abs(d)))


def check_gradient(mu: ScalarField, omega2: float, data: MeasurementSet,
                   n_directions: int = 5, epsilons: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
                   seed: int = 0, tol: float = DEFAULT_TOL) -> GradientCheck:
    """Compare the adjoint gradient with central differences of the misfit.

    Each direction gets an ``epsilon`` sweep; the best relative mismatch per
    direction is what a correct gradient drives to round-off level. Directions
    nearly orthogonal to the gradient (``|<g, d>| < ORTHO_REJECT ||g|| ||d||``)
    make the relative mismatch meaningless and are redrawn.
    """
    if n_directions < 1 or not len(epsilons):
        raise ValueError("need at least one direction and one epsilon")
    eps = np.asarray(epsilons, dtype=float)
    g = gradient(mu, omega2, data, tol).gradient
    rng = np.random.default_rng(seed)
    gnorm = l2_norm(g)
    if gnorm == 0.0:
        raise ValueError("gradient vanishes identically; a relative check is undefined")
    checks, draws = [], 0
    while len(checks) < n_directions:
        draws += 1
        if draws > 100 * n_directions:
            raise RuntimeError("could not draw directions with a non-negligible derivative")
        d = smooth_direction(mu.grid, rng)
        exact = l2_inner(g, d)
        if abs(exact) < ORTHO_REJECT * gnorm * l2_norm(d):
            continue
        est = np.array([(objective(mu + d * e, omega2, data, tol)
                         - objective(mu - d * e, omega2, data, tol)) / (2.0 * e) for e in eps])
        mism = np.abs(est - exact) / max(abs(exact), np.finfo(float).tiny)
        checks.append(DirectionCheck(exact, est, mism))
    return GradientCheck(eps, checks)
