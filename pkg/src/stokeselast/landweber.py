"""Landweber (steepest-descent) reconstruction of the shear modulus.

Each step is ``mu <- max(mu - sigma * grad J(mu), mu_floor)`` with the
boundary ring of ``mu`` frozen. In line-search mode ``sigma`` is found by
halving until the misfit decreases, and doubled after every accepted step so
the search stays short; fixed mode applies the plain update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adjoint import RING_WIDTH, GradientResult, MeasurementSet, MisfitState
from .fields import ScalarField, boundary_ring, l2_norm, sobolev_norm
from .linsolve import DEFAULT_TOL, SolverError
from .stokes import DEFAULT_MU_FLOOR

log = logging.getLogger(__name__)

STOP_GRADIENT = "gradient_tolerance"
STOP_MAX_ITER = "max_iterations"
STOP_DISCREPANCY = "discrepancy"
STOP_LINE_SEARCH = "line_search_failed"
STOP_SOLVER = "solver_failure"


@dataclass(frozen=True)
class LandweberConfig:
    sigma: float = 1.0
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    discrepancy_tau: float = 1.5
    mu_floor: float = DEFAULT_MU_FLOOR
    line_search: bool = True
    seed: int = 0
    snapshot_every: int = 0
    max_halvings: int = 40
    solver_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if not self.discrepancy_tau >= 1:
            raise ValueError("discrepancy_tau must be at least 1")
        if not self.mu_floor > 0:
            raise ValueError("mu_floor must be positive")
        if self.snapshot_every < 0 or self.max_halvings < 1:
            raise ValueError("snapshot_every must be >= 0 and max_halvings >= 1")


@dataclass
class IterationRecord:
    n: int
    objective: float
    gradient_norm: float
    step: float                         # sigma that produced this iterate (0 at n = 0)
    l2_error: Optional[float] = None    # relative ||mu_n - mu_true|| / ||mu_true||
    h4_error: Optional[float] = None    # absolute discrete H^4 norm of mu_n - mu_true


@dataclass
class IterationTrace:
    records: list
    final_mu: ScalarField
    stop_reason: str
    snapshots: dict = field(default_factory=dict)
    message: str = ""

    @property
    def iterations(self) -> int:
        return self.records[-1].n

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def monotone(self) -> bool:
        """True when the misfit never increased along the run."""
        J = self.objectives
        return bool(np.all(J[1:] <= J[:-1]))

    def to_tsv(self) -> str:
        lines = ["n\tobjective\tgradient_norm\tstep\tl2_error\th4_error"]
        for r in self.records:
            cols = [r.n, r.objective, r.gradient_norm, r.step, r.l2_error, r.h4_error]
            lines.append("\t".join("nan" if c is None else repr(c) if isinstance(c, float)
                                   else str(c) for c in cols))
        lines.append(f"# stop_reason\t{self.stop_reason}")
        return "\n".join(lines) + "\n"


def discrepancy_threshold(data: MeasurementSet, tau: float) -> float:
    """Misfit level ``1/2 (tau delta)^2`` below which noisy data are fitted."""
    return 0.5 * (tau * data.noise_norm) ** 2


def run(mu0: ScalarField, omega2: float, data: MeasurementSet, cfg: LandweberConfig,
        mu_true: Optional[ScalarField] = None) -> IterationTrace:
    """Iterate from ``mu0`` until one of the stopping rules fires.

    A solver failure after the first iterate ends the run with reason
    ``solver_failure`` and the trace up to that point; a failure at ``mu0``
    propagates.
    """
    grid = mu0.grid
    ring = boundary_ring(grid, RING_WIDTH)
    frozen = mu0.values[ring].copy()
    true_norm = l2_norm(mu_true) if mu_true is not None else None

    def errors(mu: ScalarField):
        if mu_true is None:
            return None, None
        diff = mu - mu_true
        return l2_norm(diff) / true_norm, sobolev_norm(diff, 4)

    def update(mu: ScalarField, g: ScalarField, sigma: float) -> ScalarField:
        v = np.maximum(mu.values - sigma * g.values, cfg.mu_floor)
        v[ring] = frozen
        return mu.with_values(v)

    state = MisfitState(mu0, omega2, data, cfg.solver_tol, cfg.mu_floor)
    grad = state.gradient()
    g0 = grad.gradient_norm
    records, snapshots = [], {}
    mu, sigma, step = mu0, cfg.sigma, 0.0
    limit = discrepancy_threshold(data, cfg.discrepancy_tau) if data.noisy else None
    # data fitted to solver accuracy: the gradient is round-off from here on
    floor = 0.5 * cfg.solver_tol ** 2 * sum(l2_norm(r.measured) ** 2 for r in data.records)
    reason, message = STOP_MAX_ITER, ""
    n = 0
    while True:
        l2e, h4e = errors(mu)
        records.append(IterationRecord(n, grad.objective, grad.gradient_norm, step, l2e, h4e))
        if cfg.snapshot_every and n % cfg.snapshot_every == 0:
            snapshots[n] = mu
        log.debug("iteration %d: J=%.6e |g|=%.3e step=%.3e", n, grad.objective,
                  grad.gradient_norm, step)
        if limit is not None and grad.objective <= limit:
            reason = STOP_DISCREPANCY
            break
        if grad.gradient_norm <= cfg.gradient_tolerance * g0 or grad.objective <= floor:
            reason = STOP_GRADIENT
            break
        if n >= cfg.max_iterations:
            reason = STOP_MAX_ITER
            break
        try:
            if cfg.line_search:
                trial, step, sigma = _search(mu, grad, sigma, update, omega2, data, cfg)
                if trial is None:
                    reason, message = STOP_LINE_SEARCH, f"no decrease after {cfg.max_halvings} halvings"
                    break
            else:
                step = cfg.sigma
                trial = MisfitState(update(mu, grad.gradient, step), omega2, data,
                                    cfg.solver_tol, cfg.mu_floor)
            grad = trial.gradient()
        except SolverError as exc:
            reason, message = STOP_SOLVER, str(exc)
            break
        mu = trial.mu
        n += 1
    if cfg.snapshot_every:
        snapshots[n] = mu
    return IterationTrace(records, mu, reason, snapshots, message)


def _search(mu, grad: GradientResult, sigma, update, omega2, data, cfg):
    """Backtracking on simple decrease. Returns ``(state, step, next_sigma)``."""
    for _ in range(cfg.max_halvings):
        try:
            trial = MisfitState(update(mu, grad.gradient, sigma), omega2, data,
                                cfg.solver_tol, cfg.mu_floor)
        except SolverError:
            # an overshooting step can land next to a resonance; treat as a rejection
            sigma *= 0.5
            continue
        if trial.objective < grad.objective:
            return trial, sigma, 2.0 * sigma
        sigma *= 0.5
    return None, 0.0, sigma
