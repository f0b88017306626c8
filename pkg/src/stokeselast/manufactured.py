"""Manufactured solutions: symbolic fields and the body forces they induce."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .fields import CENTER, NODE, Grid2, ScalarField, VectorField2

x, y = sp.symbols("x y", real=True)


def _lam(expr) -> Callable:
    f = sp.lambdify((x, y), expr, "numpy")
    return lambda X, Y: np.broadcast_to(np.asarray(f(X, Y), dtype=float), np.shape(X))


def operator_terms(u, mu, omega2, p=0, lam=None):
    """``omega2 u + 2 div(mu sym_grad u) + grad p [+ grad(lam div u)]``."""
    ux, uy = u
    exx = sp.diff(ux, x)
    eyy = sp.diff(uy, y)
    exy = (sp.diff(ux, y) + sp.diff(uy, x)) / 2
    fx = omega2 * ux + 2 * (sp.diff(mu * exx, x) + sp.diff(mu * exy, y)) + sp.diff(p, x)
    fy = omega2 * uy + 2 * (sp.diff(mu * exy, x) + sp.diff(mu * eyy, y)) + sp.diff(p, y)
    if lam is not None:
        div = exx + eyy
        fx += sp.diff(lam * div, x)
        fy += sp.diff(lam * div, y)
    return sp.simplify(fx), sp.simplify(fy)


@dataclass
class Manufactured:
    """Exact fields plus the body force that makes them a solution."""

    u: tuple
    p: object
    mu: object
    omega2: float
    force: tuple
    lam: object = None

    def velocity(self, grid: Grid2, staggered: bool = True) -> VectorField2:
        fx, fy = _lam(self.u[0]), _lam(self.u[1])
        return VectorField2.from_function(grid, lambda X, Y: (fx(X, Y), fy(X, Y)), staggered)

    def boundary_data(self, grid: Grid2) -> VectorField2:
        return self.velocity(grid, staggered=False)

    def pressure(self, grid: Grid2) -> ScalarField:
        f = ScalarField.from_function(grid, _lam(self.p), CENTER)
        return f.with_values(f.values - f.values.mean())

    def shear_modulus(self, grid: Grid2) -> ScalarField:
        return ScalarField.from_function(grid, _lam(self.mu), CENTER)

    def compressional_modulus(self, grid: Grid2) -> ScalarField:
        return ScalarField.from_function(grid, _lam(self.lam), CENTER)

    def body_force(self, grid: Grid2) -> VectorField2:
        fx, fy = _lam(self.force[0]), _lam(self.force[1])
        return VectorField2.from_function(grid, lambda X, Y: (fx(X, Y), fy(X, Y)))


def _psi_velocity():
    psi = sp.sin(sp.pi * x) ** 2 * sp.sin(sp.pi * y) ** 2
    return (sp.diff(psi, y), -sp.diff(psi, x))


def stokes_case(omega2: float = 1.0) -> Manufactured:
    """Divergence-free velocity from ``psi = sin^2(pi x) sin^2(pi y)`` with
    ``mu = 1 + sin(pi x) sin(pi y) / 2`` and ``p = sin(2 pi x) cos(2 pi y)``."""
    u = _psi_velocity()
    mu = 1 + sp.Rational(1, 2) * sp.sin(sp.pi * x) * sp.sin(sp.pi * y)
    p = sp.sin(2 * sp.pi * x) * sp.cos(2 * sp.pi * y)
    lhs = operator_terms(u, mu, omega2, p)
    return Manufactured(u, p, mu, omega2, (-lhs[0], -lhs[1]))


def elasticity_case(omega2: float = 1.0, lam: float = 10.0, eps: float = 0.1) -> Manufactured:
    """The Stokes-case velocity plus a compressible ``eps sin sin (1, 1)`` part."""
    ux, uy = _psi_velocity()
    bump = eps * sp.sin(sp.pi * x) * sp.sin(sp.pi * y)
    u = (ux + bump, uy + bump)
    mu = 1 + sp.Rational(1, 2) * sp.sin(sp.pi * x) * sp.sin(sp.pi * y)
    lam_expr = sp.Float(lam) + 0 * x
    lhs = operator_terms(u, mu, omega2, 0, lam=lam_expr)
    return Manufactured(u, sp.Integer(0), mu, omega2, (-lhs[0], -lhs[1]), lam=lam_expr)


def adjoint_case(omega2: float = 1.0) -> Manufactured:
    """Adjoint source ``2 div(mu sym_grad v) + omega2 v + grad q`` for the
    Stokes-case fields; ``force`` holds that source with its own sign."""
    case = stokes_case(omega2)
    lhs = operator_terms(case.u, case.mu, omega2, case.p)
    return Manufactured(case.u, case.p, case.mu, omega2, lhs)


def sample_nodes(grid: Grid2, f: Callable) -> VectorField2:
    """Node-collocated samples of ``f(x, y) -> (fx, fy)`` (boundary-data layout)."""
    return VectorField2.from_function(grid, f, staggered=False)


def node_scalar(grid: Grid2, expr) -> ScalarField:
    return ScalarField.from_function(grid, _lam(expr), NODE)
