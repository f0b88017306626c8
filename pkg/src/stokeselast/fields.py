"""Discrete fields on a staggered (MAC) rectangular grid.

Arrays are indexed ``[i, j]`` with ``i`` running along x and ``j`` along y,
and flattened in C order when serialized. Site layouts per stagger tag:

============  ==============  =================================
tag           shape           coordinates
============  ==============  =================================
cell-center   (nx, ny)        ((i+1/2) hx, (j+1/2) hy)
node          (nx+1, ny+1)    (i hx, j hy)
x-face        (nx+1, ny)      (i hx, (j+1/2) hy)
y-face        (nx, ny+1)      ((i+1/2) hx, j hy)
============  ==============  =================================
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

CENTER = "cell-center"
NODE = "node"
XFACE = "x-face"
YFACE = "y-face"
LOCATIONS = (CENTER, NODE, XFACE, YFACE)

MAX_SOBOLEV_ORDER = 5


class GridError(ValueError):
    """Raised for invalid grids or mismatched field layouts."""


@dataclass(frozen=True)
class Grid2:
    """Uniform rectangular grid ``[x0, x0 + nx*hx] x [y0, y0 + ny*hy]``."""

    nx: int
    ny: int
    hx: float
    hy: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise GridError("cell counts must be integers")
        if self.nx < 4 or self.ny < 4:
            raise GridError(f"grid needs at least 4 cells per axis, got {self.nx}x{self.ny}")
        if not (self.hx > 0 and self.hy > 0):
            raise GridError("cell sizes must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def unit_square(cls, n: int, ny: int | None = None) -> "Grid2":
        ny = n if ny is None else ny
        return cls(n, ny, 1.0 / n, 1.0 / ny)

    @classmethod
    def rectangle(cls, nx: int, ny: int, lx: float = 1.0, ly: float = 1.0,
                  origin=(0.0, 0.0)) -> "Grid2":
        return cls(nx, ny, lx / nx, ly / ny, tuple(origin))

    @property
    def lx(self) -> float:
        return self.nx * self.hx

    @property
    def ly(self) -> float:
        return self.ny * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def shape(self, location: str) -> tuple[int, int]:
        if location == CENTER:
            return (self.nx, self.ny)
        if location == NODE:
            return (self.nx + 1, self.ny + 1)
        if location == XFACE:
            return (self.nx + 1, self.ny)
        if location == YFACE:
            return (self.nx, self.ny + 1)
        raise GridError(f"unknown stagger tag {location!r}")

    def size(self, location: str) -> int:
        sx, sy = self.shape(location)
        return sx * sy

    def axes(self, location: str) -> tuple[np.ndarray, np.ndarray]:
        """1D site coordinates along x and y for a stagger location."""
        x0, y0 = self.origin
        xn = x0 + self.hx * np.arange(self.nx + 1)
        yn = y0 + self.hy * np.arange(self.ny + 1)
        xc = x0 + self.hx * (np.arange(self.nx) + 0.5)
        yc = y0 + self.hy * (np.arange(self.ny) + 0.5)
        return {
            CENTER: (xc, yc),
            NODE: (xn, yn),
            XFACE: (xn, yc),
            YFACE: (xc, yn),
        }[self._check(location)]

    def coords(self, location: str) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes(location)
        return np.meshgrid(x, y, indexing="ij")

    def quadrature_weights(self, location: str) -> np.ndarray:
        """Trapezoidal weights in directions whose sites reach the boundary,
        midpoint weights otherwise."""
        x_has_ends = location in (NODE, XFACE)
        y_has_ends = location in (NODE, YFACE)
        sx, sy = self.shape(location)
        wx = np.full(sx, self.hx)
        wy = np.full(sy, self.hy)
        if x_has_ends:
            wx[[0, -1]] *= 0.5
        if y_has_ends:
            wy[[0, -1]] *= 0.5
        return np.outer(wx, wy)

    def _check(self, location: str) -> str:
        if location not in LOCATIONS:
            raise GridError(f"unknown stagger tag {location!r}")
        return location


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid2
    location: str
    values: np.ndarray

    def __post_init__(self):
        shape = self.grid.shape(self.location)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1 and values.size == shape[0] * shape[1]:
            values = values.reshape(shape)
        if values.shape != shape:
            raise GridError(
                f"{self.location} field on {self.grid.nx}x{self.grid.ny} grid needs shape "
                f"{shape}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid2, location: str = CENTER) -> "ScalarField":
        return cls(grid, location, np.zeros(grid.shape(location)))

    @classmethod
    def constant(cls, grid: Grid2, value: float, location: str = CENTER) -> "ScalarField":
        return cls(grid, location, np.full(grid.shape(location), float(value)))

    @classmethod
    def from_function(cls, grid: Grid2, f: Callable, location: str = CENTER) -> "ScalarField":
        x, y = grid.coords(location)
        return cls(grid, location, np.broadcast_to(f(x, y), x.shape))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, self.location, values)

    def __add__(self, other):
        return self.with_values(self.values + _values_of(other, self))

    def __sub__(self, other):
        return self.with_values(self.values - _values_of(other, self))

    def __mul__(self, alpha):
        return self.with_values(self.values * alpha)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


@dataclass(frozen=True, eq=False)
class VectorField2:
    """Two-component field, face-staggered (default) or collocated at nodes."""

    ux: ScalarField
    uy: ScalarField

    def __post_init__(self):
        if self.ux.grid != self.uy.grid:
            raise GridError("vector components live on different grids")
        layout = (self.ux.location, self.uy.location)
        if layout not in ((XFACE, YFACE), (NODE, NODE)):
            raise GridError(f"unsupported vector layout {layout}")

    @property
    def grid(self) -> Grid2:
        return self.ux.grid

    @property
    def staggered(self) -> bool:
        return self.ux.location == XFACE

    @classmethod
    def zeros(cls, grid: Grid2, staggered: bool = True) -> "VectorField2":
        lx, ly = (XFACE, YFACE) if staggered else (NODE, NODE)
        return cls(ScalarField.zeros(grid, lx), ScalarField.zeros(grid, ly))

    @classmethod
    def from_function(cls, grid: Grid2, f: Callable, staggered: bool = True) -> "VectorField2":
        """Sample ``f(x, y) -> (fx, fy)`` at the component sites."""
        lx, ly = (XFACE, YFACE) if staggered else (NODE, NODE)
        x, y = grid.coords(lx)
        fx = np.broadcast_to(f(x, y)[0], x.shape)
        x, y = grid.coords(ly)
        fy = np.broadcast_to(f(x, y)[1], x.shape)
        return cls(ScalarField(grid, lx, fx), ScalarField(grid, ly, fy))

    def components(self) -> tuple[ScalarField, ScalarField]:
        return (self.ux, self.uy)

    def __add__(self, other):
        return VectorField2(self.ux + other.ux, self.uy + other.uy)

    def __sub__(self, other):
        return VectorField2(self.ux - other.ux, self.uy - other.uy)

    def __mul__(self, alpha):
        return VectorField2(self.ux * alpha, self.uy * alpha)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField2(-self.ux, -self.uy)


@dataclass(frozen=True, eq=False)
class SymTensorField2:
    txx: ScalarField
    tyy: ScalarField
    txy: ScalarField

    def __post_init__(self):
        if (self.txx.location, self.tyy.location, self.txy.location) != (CENTER, CENTER, NODE):
            raise GridError("symmetric tensor needs txx, tyy at cell centers and txy at nodes")

    @property
    def grid(self) -> Grid2:
        return self.txx.grid

    def txy_at_centers(self) -> np.ndarray:
        return node_to_center(self.txy.values)


Field = Union[ScalarField, VectorField2]


def _values_of(other, like: ScalarField):
    if isinstance(other, ScalarField):
        if other.grid != like.grid or other.location != like.location:
            raise GridError("fields live on different layouts")
        return other.values
    return other


def _staggered(u: VectorField2) -> VectorField2:
    if not isinstance(u, VectorField2) or not u.staggered:
        raise GridError("operator needs a face-staggered vector field")
    return u


def half_to_full_diff(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Differentiate samples at half-integer offsets onto integer offsets.

    ``n`` samples at ``(k+1/2) h`` become ``n+1`` derivative values at ``k h``:
    compact centred differences inside, second-order one-sided
    ``(-2 f0 + 3 f1 - f2) / h`` at both ends.
    """
    a = np.moveaxis(np.asarray(a, dtype=np.float64), axis, 0)
    n = a.shape[0]
    if n < 3:
        raise GridError("one-sided boundary stencil needs three samples")
    out = np.empty((n + 1,) + a.shape[1:])
    out[1:-1] = (a[1:] - a[:-1]) / h
    out[0] = (-2.0 * a[0] + 3.0 * a[1] - a[2]) / h
    out[-1] = (2.0 * a[-1] - 3.0 * a[-2] + a[-3]) / h
    return np.moveaxis(out, 0, axis)


def node_to_center(a: np.ndarray) -> np.ndarray:
    return 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])


def sym_gradient(u: VectorField2) -> SymTensorField2:
    """Strain tensor ``(grad u + grad u^T) / 2`` at its natural stagger positions."""
    u = _staggered(u)
    g = u.grid
    txx = np.diff(u.ux.values, axis=0) / g.hx
    tyy = np.diff(u.uy.values, axis=1) / g.hy
    dy_ux = half_to_full_diff(u.ux.values, g.hy, axis=1)
    dx_uy = half_to_full_diff(u.uy.values, g.hx, axis=0)
    return SymTensorField2(
        ScalarField(g, CENTER, txx),
        ScalarField(g, CENTER, tyy),
        ScalarField(g, NODE, 0.5 * (dy_ux + dx_uy)),
    )


def divergence(u: VectorField2) -> ScalarField:
    u = _staggered(u)
    g = u.grid
    div = np.diff(u.ux.values, axis=0) / g.hx + np.diff(u.uy.values, axis=1) / g.hy
    return ScalarField(g, CENTER, div)


def scalar_curl(u: VectorField2) -> ScalarField:
    """Node-centred rotation ``d(uy)/dx - d(ux)/dy``."""
    u = _staggered(u)
    g = u.grid
    dx_uy = half_to_full_diff(u.uy.values, g.hx, axis=0)
    dy_ux = half_to_full_diff(u.ux.values, g.hy, axis=1)
    return ScalarField(g, NODE, dx_uy - dy_ux)


def cell_gradient(phi: ScalarField) -> VectorField2:
    """Face-staggered gradient of a cell-centred scalar.

    Boundary faces use the same one-sided stencil as :func:`scalar_curl`, so
    ``scalar_curl(cell_gradient(phi))`` vanishes up to rounding everywhere.
    """
    if phi.location != CENTER:
        raise GridError("cell_gradient needs a cell-centred scalar")
    g = phi.grid
    gx = half_to_full_diff(phi.values, g.hx, axis=0)
    gy = half_to_full_diff(phi.values, g.hy, axis=1)
    return VectorField2(ScalarField(g, XFACE, gx), ScalarField(g, YFACE, gy))


def stream_velocity(psi: ScalarField) -> VectorField2:
    """``(d psi/dy, -d psi/dx)`` from a node-valued stream function.

    Discretely divergence-free: :func:`divergence` of the result is zero up to
    rounding.
    """
    if psi.location != NODE:
        raise GridError("stream function must live at nodes")
    g = psi.grid
    ux = np.diff(psi.values, axis=1) / g.hy
    uy = -np.diff(psi.values, axis=0) / g.hx
    return VectorField2(ScalarField(g, XFACE, ux), ScalarField(g, YFACE, uy))


@lru_cache(maxsize=64)
def derivative_matrix(n: int, h: float, m: int) -> sp.csr_matrix:
    """Second-order accurate ``m``-th derivative on ``n`` equispaced samples.

    Interior rows use the symmetric stencil (``m + 1`` points for even ``m``,
    ``m + 2`` for odd), rows near the ends a one-sided window of ``m + 2``
    points. Every row is exact for polynomials of degree ``< m + 2`` (up to
    the window length), so the pointwise error is ``O(h^2)`` right up to the
    boundary and repeated application across axes does not amplify it.
    """
    if m == 0:
        return sp.identity(n, format="csr")
    if n <= m:
        return sp.csr_matrix((n, n))
    half = (m + 1) // 2 if m % 2 == 0 else (m + 2) // 2
    edge = min(m + 2, n)
    rows, cols, vals = [], [], []
    fact = factorial(m)
    for i in range(n):
        if half <= i < n - half:
            idx = np.arange(i - half, i + half + 1)
        else:
            start = 0 if i < half else n - edge
            idx = np.arange(start, start + edge)
        off = idx - i
        V = np.vander(off.astype(float), increasing=True).T
        rhs = np.zeros(len(idx))
        rhs[m] = fact
        w = np.linalg.solve(V, rhs) / h ** m
        rows += [i] * len(idx)
        cols += idx.tolist()
        vals += w.tolist()
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def partial(values: np.ndarray, grid: "Grid2", ax: int, ay: int) -> np.ndarray:
    """``d^ax/dx^ax d^ay/dy^ay`` of sampled values via :func:`derivative_matrix`."""
    nx, ny = values.shape
    out = derivative_matrix(nx, grid.hx, ax) @ values
    return (derivative_matrix(ny, grid.hy, ay) @ out.T).T


def _scalar_sobolev_terms(f: ScalarField, order: int) -> list[float]:
    """Squared L2 norms of the full derivative tensor at each order 0..order.

    Mixed partials enter with their multiplicity in ``grad^k f : grad^k f``.
    """
    g = f.grid
    w = g.quadrature_weights(f.location)
    terms = []
    for m in range(order + 1):
        terms.append(sum(comb(m, k) * float(np.sum(w * partial(f.values, g, k, m - k) ** 2))
                         for k in range(m + 1)))
    return terms


def sobolev_norm(f: Field, order: int = 0, mode: str = "full") -> float:
    """Discrete ``W^{order,2}`` norm (``mode="full"``) or top-order seminorm.

    Each partial derivative is one second-order accurate stencil per axis
    (centred inside, one-sided at the edges, see :func:`derivative_matrix`);
    integrals use :meth:`Grid2.quadrature_weights`. Meaningful only for
    smooth, well-resolved fields.
    """
    if not 0 <= int(order) <= MAX_SOBOLEV_ORDER:
        raise ValueError(f"sobolev order must be in 0..{MAX_SOBOLEV_ORDER}, got {order}")
    if mode not in ("full", "seminorm"):
        raise ValueError(f"unknown norm mode {mode!r}")
    comps = f.components() if isinstance(f, VectorField2) else (f,)
    total = 0.0
    for c in comps:
        terms = _scalar_sobolev_terms(c, int(order))
        total += sum(terms) if mode == "full" else terms[-1]
    return float(np.sqrt(total))


def l2_norm(f: Field) -> float:
    return sobolev_norm(f, 0)


def l2_inner(a: Field, b: Field) -> float:
    pairs = zip(a.components(), b.components()) if isinstance(a, VectorField2) else [(a, b)]
    total = 0.0
    for fa, fb in pairs:
        if fa.location != fb.location or fa.grid != fb.grid:
            raise GridError("fields live on different layouts")
        total += float(np.sum(fa.grid.quadrature_weights(fa.location) * fa.values * fb.values))
    return total


def boundary_ring(grid: Grid2, width: int = 1) -> np.ndarray:
    """Boolean mask of cell-centred sites within ``width`` cells of the boundary."""
    mask = np.zeros(grid.shape(CENTER), dtype=bool)
    mask[:width, :] = mask[-width:, :] = True
    mask[:, :width] = mask[:, -width:] = True
    return mask
