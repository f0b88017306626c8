"""Index bookkeeping and sparse strain operators for the MAC discretization.

The "full" velocity vector stacks, in order:

* ``ux`` at all x-faces, ``(nx+1)*ny`` values,
* ``uy`` at all y-faces, ``nx*(ny+1)`` values,
* tangential ``ux`` at bottom then top boundary nodes, ``2*(nx+1)`` values,
* tangential ``uy`` at left then right boundary nodes, ``2*(ny+1)`` values.

Normal components on boundary faces and all tangential entries are Dirichlet
data; the remaining face values are unknowns. Every operator that depends on
the shear modulus is written as ``E^T diag(weights * mu) E`` so that the
stiffness is symmetric and its derivative in ``mu`` is a pointwise strain
product.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fields import CENTER, NODE, XFACE, YFACE, Grid2, ScalarField, VectorField2, GridError


@dataclass(frozen=True, eq=False)
class MacOperators:
    grid: Grid2
    n_full: int
    interior: np.ndarray      # indices of unknown face values in the full vector
    boundary: np.ndarray      # indices of Dirichlet entries in the full vector
    exx: sp.csr_matrix        # cells x full
    eyy: sp.csr_matrix        # cells x full
    exy: sp.csr_matrix        # nodes x full, (d_y ux + d_x uy) / 2
    div: sp.csr_matrix        # cells x full, area weighted
    node_avg: sp.csr_matrix   # nodes x cells, arithmetic mean of adjacent cells
    node_weight: np.ndarray   # control area per node
    face_mass: np.ndarray     # control area per face (full faces), interior rows only
    face_quad: np.ndarray     # trapezoidal weights per face (full faces)

    @property
    def n_ux(self) -> int:
        return (self.grid.nx + 1) * self.grid.ny

    @property
    def n_uy(self) -> int:
        return self.grid.nx * (self.grid.ny + 1)

    @property
    def n_faces(self) -> int:
        return self.n_ux + self.n_uy

    @property
    def n_cells(self) -> int:
        return self.grid.nx * self.grid.ny

    def stiffness(self, mu: np.ndarray) -> sp.csr_matrix:
        """SPD-on-interior energy matrix of ``u -> -2 div(mu sym_grad u)``."""
        a = self.grid.cell_area
        mu = np.ravel(mu)
        mu_n = self.node_avg @ mu
        cell_w = sp.diags(2.0 * a * mu)
        node_w = sp.diags(4.0 * self.node_weight * mu_n)
        K = (self.exx.T @ cell_w @ self.exx + self.eyy.T @ cell_w @ self.eyy
             + self.exy.T @ node_w @ self.exy)
        return K.tocsr()

    def stiffness_derivative(self, v_full: np.ndarray, u_full: np.ndarray) -> np.ndarray:
        """``d/d mu_c`` of ``v^T K(mu) u`` for every cell ``c``."""
        a = self.grid.cell_area
        cell = 2.0 * a * ((self.exx @ v_full) * (self.exx @ u_full)
                          + (self.eyy @ v_full) * (self.eyy @ u_full))
        node = 4.0 * self.node_weight * (self.exy @ v_full) * (self.exy @ u_full)
        return cell + self.node_avg.T @ node

    def grad_div(self, lam: np.ndarray) -> sp.csr_matrix:
        """Energy matrix of ``u -> -grad(lam div u)``."""
        w = sp.diags(np.ravel(lam) / self.grid.cell_area)
        return (self.div.T @ w @ self.div).tocsr()

    def faces_to_full(self, u: VectorField2, ub: np.ndarray) -> np.ndarray:
        """Full vector from a staggered field, tangential entries from ``ub``."""
        full = np.concatenate([u.ux.values.ravel(), u.uy.values.ravel(),
                               np.zeros(self.n_full - self.n_faces)])
        full[self.boundary] = ub
        return full

    def full_to_faces(self, full: np.ndarray) -> VectorField2:
        g = self.grid
        ux = full[:self.n_ux].reshape(g.shape(XFACE))
        uy = full[self.n_ux:self.n_faces].reshape(g.shape(YFACE))
        return VectorField2(ScalarField(g, XFACE, ux), ScalarField(g, YFACE, uy))

    def face_vector(self, u: VectorField2) -> np.ndarray:
        if not u.staggered or u.grid != self.grid:
            raise GridError("expected a face-staggered field on the operator grid")
        return np.concatenate([u.ux.values.ravel(), u.uy.values.ravel()])

    def boundary_values(self, F: VectorField2, flux_correct: bool = True) -> np.ndarray:
        """Dirichlet entries (ordered like ``self.boundary``) from node data.

        Normal face values are the mean of the two adjacent boundary nodes.
        With ``flux_correct`` the net outflow is removed uniformly along the
        perimeter so the discrete continuity equations are solvable.
        """
        g = self.grid
        if F.grid != g:
            raise GridError("boundary data lives on a different grid")
        if F.staggered:
            raise GridError("boundary data must be collocated at nodes")
        fx, fy = F.ux.values, F.uy.values
        left = 0.5 * (fx[0, :-1] + fx[0, 1:])
        right = 0.5 * (fx[-1, :-1] + fx[-1, 1:])
        bottom = 0.5 * (fy[:-1, 0] + fy[1:, 0])
        top = 0.5 * (fy[:-1, -1] + fy[1:, -1])
        if flux_correct:
            flux = g.hy * np.sum(right - left) + g.hx * np.sum(top - bottom)
            shift = flux / (2.0 * (g.lx + g.ly))
            left, right = left + shift, right - shift
            bottom, top = bottom + shift, top - shift
        ux = np.zeros(g.shape(XFACE))
        uy = np.zeros(g.shape(YFACE))
        ux[0, :], ux[-1, :] = left, right
        uy[:, 0], uy[:, -1] = bottom, top
        full = np.concatenate([ux.ravel(), uy.ravel(),
                               fx[:, 0], fx[:, -1], fy[0, :], fy[-1, :]])
        return full[self.boundary]


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=shape)


@lru_cache(maxsize=16)
def operators(grid: Grid2) -> MacOperators:
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    n_ux = (nx + 1) * ny
    n_uy = nx * (ny + 1)
    o_tb = n_ux + n_uy               # bottom tangential ux, then top
    o_lr = o_tb + 2 * (nx + 1)       # left tangential uy, then right
    n_full = o_lr + 2 * (ny + 1)

    ux_id = np.arange(n_ux).reshape(nx + 1, ny)
    uy_id = n_ux + np.arange(n_uy).reshape(nx, ny + 1)
    bottom_id = o_tb + np.arange(nx + 1)
    top_id = o_tb + nx + 1 + np.arange(nx + 1)
    left_id = o_lr + np.arange(ny + 1)
    right_id = o_lr + ny + 1 + np.arange(ny + 1)
    cell_id = np.arange(nx * ny).reshape(nx, ny)
    node_id = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)

    is_unknown = np.zeros(n_full, dtype=bool)
    is_unknown[ux_id[1:-1, :].ravel()] = True
    is_unknown[uy_id[:, 1:-1].ravel()] = True
    interior = np.flatnonzero(is_unknown)
    boundary = np.flatnonzero(~is_unknown)

    n_cells = nx * ny
    c = cell_id.ravel()
    ones = np.ones(n_cells)
    exx = _coo([c, c], [ux_id[1:, :].ravel(), ux_id[:-1, :].ravel()],
               [ones / hx, -ones / hx], (n_cells, n_full))
    eyy = _coo([c, c], [uy_id[:, 1:].ravel(), uy_id[:, :-1].ravel()],
               [ones / hy, -ones / hy], (n_cells, n_full))

    # d(ux)/dy at nodes; wall nodes use the half-cell distance to the wall value
    rows, cols, vals = [], [], []
    inner = node_id[:, 1:-1].ravel()
    k = np.ones(inner.size)
    rows += [inner, inner]
    cols += [ux_id[:, 1:].ravel(), ux_id[:, :-1].ravel()]
    vals += [k / hy, -k / hy]
    w = np.ones(nx + 1) * 2.0 / hy
    rows += [node_id[:, 0], node_id[:, 0], node_id[:, -1], node_id[:, -1]]
    cols += [ux_id[:, 0], bottom_id, top_id, ux_id[:, -1]]
    vals += [w, -w, w, -w]
    dy_ux = _coo(rows, cols, vals, ((nx + 1) * (ny + 1), n_full))

    rows, cols, vals = [], [], []
    inner = node_id[1:-1, :].ravel()
    k = np.ones(inner.size)
    rows += [inner, inner]
    cols += [uy_id[1:, :].ravel(), uy_id[:-1, :].ravel()]
    vals += [k / hx, -k / hx]
    w = np.ones(ny + 1) * 2.0 / hx
    rows += [node_id[0, :], node_id[0, :], node_id[-1, :], node_id[-1, :]]
    cols += [uy_id[0, :], left_id, right_id, uy_id[-1, :]]
    vals += [w, -w, w, -w]
    dx_uy = _coo(rows, cols, vals, ((nx + 1) * (ny + 1), n_full))
    exy = (0.5 * (dy_ux + dx_uy)).tocsr()

    div = (grid.cell_area * (exx + eyy)).tocsr()

    # node <- adjacent cells (4 inside, 2 on edges, 1 at corners)
    rows, cols = [], []
    for di in (0, 1):
        for dj in (0, 1):
            ni = node_id[di:nx + di, dj:ny + dj]
            rows.append(ni.ravel())
            cols.append(cell_id.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    count = np.bincount(rows, minlength=(nx + 1) * (ny + 1)).astype(float)
    node_avg = sp.csr_matrix((1.0 / count[rows], (rows, cols)),
                             shape=((nx + 1) * (ny + 1), n_cells))

    cx = np.ones(nx + 1)
    cx[[0, -1]] = 0.5
    cy = np.ones(ny + 1)
    cy[[0, -1]] = 0.5
    node_weight = grid.cell_area * np.outer(cx, cy).ravel()

    face_quad = np.concatenate([grid.quadrature_weights(XFACE).ravel(),
                                grid.quadrature_weights(YFACE).ravel()])
    face_mass = np.full(n_ux + n_uy, grid.cell_area)

    return MacOperators(grid, n_full, interior, boundary, exx, eyy, exy, div,
                        node_avg, node_weight, face_mass, face_quad)


def cell_values(field: ScalarField, grid: Grid2) -> np.ndarray:
    if field.grid != grid or field.location != CENTER:
        raise GridError("coefficient fields must be cell-centred on the problem grid")
    return field.values.ravel()


def node_field(grid: Grid2, values: np.ndarray) -> ScalarField:
    return ScalarField(grid, NODE, values.reshape(grid.shape(NODE)))


@dataclass(frozen=True, eq=False)
class StreamOperators:
    """Discrete curl from node stream values to face velocities.

    ``curl[:, inner]`` restricted to interior faces is a basis of the
    discretely divergence-free fields with zero boundary flux.
    """

    curl: sp.csr_matrix       # faces x nodes
    inner: np.ndarray         # interior node indices
    outer: np.ndarray         # boundary node indices
    z: sp.csr_matrix          # interior faces x interior nodes


@lru_cache(maxsize=16)
def stream_operators(grid: Grid2) -> StreamOperators:
    ops = operators(grid)
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    node = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    ux = np.arange(ops.n_ux).reshape(nx + 1, ny)
    uy = ops.n_ux + np.arange(ops.n_uy).reshape(nx, ny + 1)
    rows = [ux.ravel(), ux.ravel(), uy.ravel(), uy.ravel()]
    cols = [node[:, 1:].ravel(), node[:, :-1].ravel(), node[1:, :].ravel(), node[:-1, :].ravel()]
    vals = [np.full(ux.size, 1 / hy), np.full(ux.size, -1 / hy),
            np.full(uy.size, -1 / hx), np.full(uy.size, 1 / hx)]
    curl = _coo(rows, cols, vals, (ops.n_faces, node.size))
    is_inner = np.zeros(node.shape, dtype=bool)
    is_inner[1:-1, 1:-1] = True
    inner = node[is_inner]
    outer = node[~is_inner]
    z = curl[ops.interior][:, inner].tocsr()
    return StreamOperators(curl, inner, outer, z)


def boundary_stream(grid: Grid2, ub: np.ndarray) -> np.ndarray:
    """Stream function on boundary nodes (zero at the origin corner) whose
    curl reproduces the normal boundary velocities in ``ub``.

    ``ub`` must carry zero net flux; the closing mismatch is returned in the
    last corner only up to rounding.
    """
    ops = operators(grid)
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    full = np.zeros(ops.n_full)
    full[ops.boundary] = ub
    ux = full[:ops.n_ux].reshape(nx + 1, ny)
    uy = full[ops.n_ux:ops.n_faces].reshape(nx, ny + 1)
    psi = np.zeros((nx + 1, ny + 1))
    # ux = d psi/dy, uy = -d psi/dx
    psi[1:, 0] = -hx * np.cumsum(uy[:, 0])
    psi[0, 1:] = hy * np.cumsum(ux[0, :])
    psi[nx, 1:] = psi[nx, 0] + hy * np.cumsum(ux[nx, :])
    psi[1:, ny] = psi[0, ny] - hx * np.cumsum(uy[:, ny])
    return psi.ravel()


@lru_cache(maxsize=16)
def pressure_poisson(grid: Grid2):
    """Factorized pressure-Poisson matrix ``D_I D_I^T`` bordered by the mean constraint."""
    from .linsolve import DEFAULT_TOL, Factorization

    ops = operators(grid)
    DI = ops.div[:, ops.interior]
    # the mean constraint enters as a bordered row, keeping the matrix sparse
    E = sp.csr_matrix(np.full((ops.n_cells, 1), grid.cell_area))
    P = sp.bmat([[DI @ DI.T, E], [E.T, None]], format="csr")
    return Factorization(P, DEFAULT_TOL, symmetric=False)
