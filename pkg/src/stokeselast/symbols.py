"""Pointwise ellipticity, non-degeneracy and boundary-root diagnostics.

3D: the principal symbol of the pressure-free ``mu`` equation built from one
strain ``A`` is ``(A xi) x xi``, which vanishes whenever ``xi`` is an
eigenvector of ``A``; two strains ``A, At`` are combined through
``|(A xi) x xi| + |(At xi) x xi| >= C |xi|^2``.

2D: the classical non-degeneracy quantity ``det(sym_grad u)`` and the
quantity ``d u_1 / d x_1`` are both reported. :func:`symbol_2d` evaluates
``2 |xi|^2 d_1 u_1``, the symbol of ``(d_1, -d_2) . (2 div(mu sym_grad u))``;
:func:`curl_symbol_2d` evaluates the symbol after the pressure is actually
eliminated with ``(-d_2, d_1) .``, which is an indefinite quadratic form
whenever the strain is traceless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .fields import CENTER, ScalarField, VectorField2, sym_gradient


@dataclass(frozen=True)
class SymTensor3:
    """Symmetric 3x3 matrix stored by its six independent entries."""

    xx: float
    yy: float
    zz: float
    xy: float = 0.0
    xz: float = 0.0
    yz: float = 0.0

    @classmethod
    def from_matrix(cls, m) -> "SymTensor3":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("expected a 3x3 matrix")
        s = 0.5 * (m + m.T)
        return cls(s[0, 0], s[1, 1], s[2, 2], s[0, 1], s[0, 2], s[1, 2])

    @classmethod
    def diag(cls, a: float, b: float, c: float) -> "SymTensor3":
        return cls(a, b, c)

    def matrix(self) -> np.ndarray:
        return np.array([[self.xx, self.xy, self.xz],
                         [self.xy, self.yy, self.yz],
                         [self.xz, self.yz, self.zz]])

    def scaled(self, t: float) -> "SymTensor3":
        return SymTensor3.from_matrix(t * self.matrix())


@dataclass
class ConditionReport:
    margin: float
    argmin_point: object
    argmin_direction: Optional[np.ndarray]
    n_points: int
    n_directions: int
    threshold: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        def fmt(v):
            if isinstance(v, (float, np.floating)):
                return repr(float(v))
            if isinstance(v, np.ndarray):
                return " ".join(repr(float(x)) for x in v.ravel())
            if isinstance(v, (tuple, list)):
                return " ".join(str(x) for x in v)
            return str(v)

        items = [("margin", self.margin), ("threshold", self.threshold),
                 ("pass", str(self.passed).lower()), ("argmin_point", self.argmin_point),
                 ("argmin_direction", self.argmin_direction),
                 ("n_points", self.n_points), ("n_directions", self.n_directions)]
        items += sorted(self.extra.items())
        return "".join(f"{k} = {fmt(v)}\n" for k, v in items if v is not None)


@dataclass
class LopatinskiiReport:
    a: float
    b: float
    c: float
    roots: tuple
    decaying: int

    @property
    def decays(self) -> bool:
        """At least one exponentially decaying fundamental solution exists."""
        return self.decaying > 0

    def to_text(self) -> str:
        r1, r2 = self.roots
        lines = [f"a = {self.a!r}", f"b = {self.b!r}", f"c = {self.c!r}",
                 f"root1 = {r1.real!r} {r1.imag!r}", f"root2 = {r2.real!r} {r2.imag!r}",
                 f"decaying_roots = {self.decaying}"]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# 3D symbols

def _as_matrix(A) -> np.ndarray:
    return A.matrix() if isinstance(A, SymTensor3) else np.asarray(A, dtype=float)


def symbol_3d(A, xi) -> np.ndarray:
    """``(A xi) x xi``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (3,):
        raise ValueError("xi must be a 3-vector")
    if not np.any(xi):
        raise ValueError("xi must be non-zero")
    return np.cross(_as_matrix(A) @ xi, xi)


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors (deterministic)."""
    if n < 1:
        raise ValueError("need at least one direction")
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _pair_margin(A: np.ndarray, At: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Normalized ``|(A xi) x xi| + |(At xi) x xi|`` for rows of ``xi``."""
    n2 = np.sum(xi * xi, axis=-1)
    s = (np.linalg.norm(np.cross(xi @ A.T, xi), axis=-1)
         + np.linalg.norm(np.cross(xi @ At.T, xi), axis=-1))
    return s / n2


def _refine(A, At, xi0):
    # minimize over the sphere through spherical angles
    def angles(v):
        return np.array([np.arccos(np.clip(v[2], -1, 1)), np.arctan2(v[1], v[0])])

    def vec(t):
        return np.array([np.sin(t[0]) * np.cos(t[1]), np.sin(t[0]) * np.sin(t[1]), np.cos(t[0])])

    res = minimize(lambda t: _pair_margin(A, At, vec(t)[None])[0], angles(xi0),
                   method="Nelder-Mead", options=dict(xatol=1e-12, fatol=1e-15, maxiter=2000))
    v = vec(res.x)
    return float(_pair_margin(A, At, v[None])[0]), v


def condition_3d(A_field: Sequence, At_field: Sequence, threshold: float = 0.0,
                 n_directions: int = 2048, n_refine: int = 4) -> ConditionReport:
    """Minimum over points and directions of the two-strain symbol margin.

    Directions are a Fibonacci lattice plus the eigenvectors of both strains
    (where a single symbol vanishes); the ``n_refine`` best candidates per
    point are then polished by a local search on the sphere.
    """
    A_list, At_list = list(A_field), list(At_field)
    if not A_list or len(A_list) != len(At_list):
        raise ValueError("strain fields must be non-empty and of equal length")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    base = fibonacci_sphere(n_directions)
    best = (np.inf, None, None)
    for k, (A, At) in enumerate(zip(A_list, At_list)):
        A, At = _as_matrix(A), _as_matrix(At)
        cand = np.vstack([base, np.linalg.eigh(A)[1].T, np.linalg.eigh(At)[1].T])
        vals = _pair_margin(A, At, cand)
        for j in np.argsort(vals, kind="stable")[:max(n_refine, 1)]:
            m, v = float(vals[j]), cand[j]
            if n_refine and m > 0:
                m2, v2 = _refine(A, At, v)
                if m2 < m:
                    m, v = m2, v2
            if m < best[0]:
                best = (m, k, v)
    margin = max(best[0], 0.0)
    return ConditionReport(margin, best[1], best[2], len(A_list), n_directions, threshold,
                           margin >= threshold)


def lopatinskii_coefficients_3d(A, At, nu, zeta) -> tuple[float, float, float]:
    """``(a, b, c)`` of the boundary ODE ``a m'' + i b m' + c m = 0``.

    Substituting ``xi -> i zeta + nu d/dz`` into both symbols and projecting
    the two vector equations on ``(A nu) x nu`` and ``(At nu) x nu``.
    """
    nu = np.asarray(nu, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if abs(nu @ zeta) > 1e-12 * np.linalg.norm(nu) * np.linalg.norm(zeta):
        raise ValueError("zeta must be tangential (orthogonal to nu)")
    a = b = c = 0.0
    for M in (_as_matrix(A), _as_matrix(At)):
        p = np.cross(M @ nu, nu)
        a += p @ p
        b += p @ (np.cross(M @ zeta, nu) + np.cross(M @ nu, zeta))
        c -= p @ np.cross(M @ zeta, zeta)
    return float(a), float(b), float(c)


def lopatinskii_roots(a: float, b: float, c: float) -> LopatinskiiReport:
    """Roots of ``a l^2 + i b l + c = 0`` and how many have negative real part."""
    if not a > 0:
        raise ValueError("leading coefficient a must be positive")
    disc = np.sqrt(complex(-b * b - 4.0 * a * c))
    r1 = (-1j * b + disc) / (2.0 * a)
    r2 = (-1j * b - disc) / (2.0 * a)
    decaying = int(r1.real < 0) + int(r2.real < 0)
    return LopatinskiiReport(float(a), float(b), float(c), (r1, r2), decaying)


def lopatinskii_2d(d1u1: float, zeta_norm: float) -> LopatinskiiReport:
    """Boundary ODE ``m'' = 2 d_1 u_1 |zeta|^2 m`` as ``(a, b, c) = (1, 0, -2 d_1u_1 |zeta|^2)``."""
    return lopatinskii_roots(1.0, 0.0, -2.0 * d1u1 * zeta_norm ** 2)


# ---------------------------------------------------------------------------
# 2D quantities

def _strain_at_centers(u: VectorField2):
    e = sym_gradient(u)
    return e.txx.values, e.tyy.values, e.txy_at_centers()


def nondegeneracy_2d(u: VectorField2, threshold: float = 0.0) -> ConditionReport:
    """``min |det(sym_grad u)|`` over cells, with ``min |d_1 u_1|`` alongside."""
    exx, eyy, exy = _strain_at_centers(u)
    det = exx * eyy - exy * exy
    adet = np.abs(det)
    k = np.unravel_index(np.argmin(adet), adet.shape)
    d1 = np.abs(exx)
    k1 = np.unravel_index(np.argmin(d1), d1.shape)
    margin = float(adet[k])
    extra = {"min_abs_d1u1": float(d1[k1]), "argmin_d1u1": tuple(int(i) for i in k1),
             "det_min": float(det.min()), "det_max": float(det.max())}
    return ConditionReport(margin, tuple(int(i) for i in k), None, adet.size, 0, threshold,
                           margin >= threshold, extra)


def determinant_field(u: VectorField2) -> ScalarField:
    exx, eyy, exy = _strain_at_centers(u)
    return ScalarField(u.grid, CENTER, exx * eyy - exy * exy)


def _check_xi2(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (2,):
        raise ValueError("xi must be a 2-vector")
    if not np.any(xi):
        raise ValueError("xi must be non-zero")
    return xi


def _cell(u: VectorField2, index) -> tuple[int, int]:
    i, j = (int(v) for v in index)
    nx, ny = u.grid.shape(CENTER)
    if not (0 <= i < nx and 0 <= j < ny):
        raise IndexError(f"cell index {(i, j)} outside a {nx}x{ny} grid")
    return i, j


def symbol_2d(u: VectorField2, index, xi) -> float:
    """``2 |xi|^2 d_1 u_1`` at cell ``index``."""
    xi = _check_xi2(xi)
    i, j = _cell(u, index)
    d1u1 = (u.ux.values[i + 1, j] - u.ux.values[i, j]) / u.grid.hx
    return float(2.0 * (xi @ xi) * d1u1)


def curl_symbol_2d(u: VectorField2, index, xi) -> float:
    """Symbol of ``(-d_2, d_1) . (2 div(mu sym_grad u))`` acting on ``mu``:
    ``2 xi_perp^T E xi`` with ``xi_perp = (-xi_2, xi_1)``."""
    xi = _check_xi2(xi)
    i, j = _cell(u, index)
    exx, eyy, exy = _strain_at_centers(u)
    E = np.array([[exx[i, j], exy[i, j]], [exy[i, j], eyy[i, j]]])
    perp = np.array([-xi[1], xi[0]])
    return float(2.0 * perp @ E @ xi)


def angle_samples(n: int = 256) -> np.ndarray:
    """``n`` uniform unit directions in the plane."""
    t = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(t), np.sin(t)])


def curl_ellipticity_2d(u: VectorField2, n_angles: int = 256) -> ConditionReport:
    """``min |curl_symbol_2d| / |xi|^2`` over cells and directions.

    Directions are ``n_angles`` uniform angles; around the best sample a
    bounded scalar search refines the angle once.
    """
    exx, eyy, exy = _strain_at_centers(u)
    t = 2.0 * np.pi * np.arange(n_angles) / n_angles
    c, s = np.cos(t), np.sin(t)
    # 2 xi_perp^T E xi for unit xi = (c, s)
    vals = np.abs(2.0 * (exy[..., None] * (c * c - s * s) + (eyy - exx)[..., None] * c * s))
    flat = np.argmin(vals)
    i, j, k = np.unravel_index(flat, vals.shape)
    E = (exx[i, j], eyy[i, j], exy[i, j])

    def f(theta):
        cc, ss = np.cos(theta), np.sin(theta)
        return abs(2.0 * (E[2] * (cc * cc - ss * ss) + (E[1] - E[0]) * cc * ss))

    dt = 2.0 * np.pi / n_angles
    res = minimize_scalar(f, bounds=(t[k] - dt, t[k] + dt), method="bounded",
                          options=dict(xatol=1e-12))
    margin, theta = (float(res.fun), res.x) if res.fun < vals[i, j, k] else (float(vals[i, j, k]), t[k])
    return ConditionReport(margin, (int(i), int(j)), np.array([np.cos(theta), np.sin(theta)]),
                           exx.size, n_angles, 0.0, True)
