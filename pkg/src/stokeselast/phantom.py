"""Synthetic shear-modulus phantoms, boundary data and measurement noise."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import CENTER, Grid2, ScalarField, VectorField2, l2_norm
from .stokes import DEFAULT_MU_FLOOR

CLEARANCE_SIGMAS = 3.0
PHANTOM_KINDS = ("constant", "gaussian-inclusion", "multi-inclusion")
BOUNDARY_MODES = ("shear-x", "rotation", "poiseuille", "pure-shear")


class PhantomError(ValueError):
    """Phantom specification violates the floor or boundary clearance."""


@dataclass(frozen=True)
class Inclusion:
    center: tuple
    width: float
    amplitude: float

    def __post_init__(self):
        if len(self.center) != 2:
            raise PhantomError("inclusion center must have two coordinates")
        if not self.width > 0:
            raise PhantomError("inclusion width must be positive")


@dataclass(frozen=True)
class PhantomSpec:
    grid: Grid2
    kind: str = "constant"
    background: float = 1.0
    inclusions: tuple = field(default_factory=tuple)
    mu_floor: float = DEFAULT_MU_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(
            i if isinstance(i, Inclusion) else Inclusion(**i) for i in self.inclusions))
        if self.kind not in PHANTOM_KINDS:
            raise PhantomError(f"unknown phantom kind {self.kind!r}")
        n = len(self.inclusions)
        if self.kind == "constant" and n:
            raise PhantomError("a constant phantom takes no inclusions")
        if self.kind == "gaussian-inclusion" and n != 1:
            raise PhantomError("gaussian-inclusion needs exactly one inclusion")
        if self.kind == "multi-inclusion" and n < 1:
            raise PhantomError("multi-inclusion needs at least one inclusion")
        g = self.grid
        x0, y0 = g.origin
        for inc in self.inclusions:
            cx, cy = inc.center
            gap = min(cx - x0, x0 + g.lx - cx, cy - y0, y0 + g.ly - cy)
            if gap < CLEARANCE_SIGMAS * inc.width:
                raise PhantomError(
                    f"inclusion at {inc.center} with width {inc.width} is closer than "
                    f"{CLEARANCE_SIGMAS:g} widths to the boundary")


def gaussian_inclusion(grid: Grid2, amplitude: float = 1.0, width: float = 0.15,
                       center=None, background: float = 1.0) -> PhantomSpec:
    if center is None:
        x0, y0 = grid.origin
        center = (x0 + 0.5 * grid.lx, y0 + 0.5 * grid.ly)
    return PhantomSpec(grid, "gaussian-inclusion", background,
                       (Inclusion(tuple(center), width, amplitude),))


def evaluate_phantom(spec: PhantomSpec, X, Y) -> np.ndarray:
    """``background + sum_k a_k exp(-|x - c_k|^2 / (2 w_k^2))`` at arbitrary points."""
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    mu = np.full(np.broadcast(X, Y).shape, float(spec.background))
    for inc in spec.inclusions:
        cx, cy = inc.center
        r2 = (X - cx) ** 2 + (Y - cy) ** 2
        mu += inc.amplitude * np.exp(-r2 / (2.0 * inc.width ** 2))
    return mu


def generate_phantom(spec: PhantomSpec) -> ScalarField:
    """The phantom sampled at cell centers, checked against the floor."""
    mu = evaluate_phantom(spec, *spec.grid.coords(CENTER))
    low = float(mu.min())
    if low < spec.mu_floor:
        raise PhantomError(f"phantom minimum {low:.6g} is below the floor {spec.mu_floor:.6g}")
    return ScalarField(spec.grid, CENTER, mu)


def _boundary_function(mode: str):
    if mode == "shear-x":
        return lambda X, Y: (Y, np.zeros_like(X))
    if mode == "rotation":
        return lambda X, Y: (-Y, X)
    if mode == "poiseuille":
        return lambda X, Y: (Y * (1.0 - Y), np.zeros_like(X))
    if mode == "pure-shear":
        return lambda X, Y: (X, -Y)
    raise ValueError(f"unknown boundary mode {mode!r}; expected one of {BOUNDARY_MODES}")


def boundary_field(grid: Grid2, mode: str) -> VectorField2:
    """The full linear/quadratic field whose trace a boundary mode prescribes."""
    return VectorField2.from_function(grid, _boundary_function(mode), staggered=True)


def shear_boundary_data(grid: Grid2, mode: str = "shear-x") -> VectorField2:
    """Node-collocated boundary data ``F`` for one of the standard modes.

    ``shear-x`` is the trace of ``(y, 0)``, ``rotation`` of ``(-y, x)``,
    ``poiseuille`` of ``(y (1 - y), 0)`` and ``pure-shear`` of ``(x, -y)``.
    Interior nodes carry the same formula; solvers read only the boundary.
    """
    f = _boundary_function(mode)
    if mode == "rotation":
        warnings.warn("rotation data have zero symmetric gradient, so det(sym_grad u) = 0 "
                      "and the 2D non-degeneracy condition fails", stacklevel=2)
    return VectorField2.from_function(grid, f, staggered=False)


def add_noise(u: VectorField2, level: float, seed) -> VectorField2:
    """``u + eta`` with Gaussian ``eta`` scaled so ``||eta|| = level ||u||``."""
    if not 0.0 <= level < 1.0:
        raise ValueError("noise level must lie in [0, 1)")
    if level == 0.0:
        return u
    rng = np.random.default_rng(seed)
    comps = u.components()
    raw = [rng.standard_normal(c.values.shape) for c in comps]
    eta = VectorField2(*(c.with_values(r) for c, r in zip(comps, raw)))
    scale = level * l2_norm(u) / l2_norm(eta)
    return u + eta * scale
