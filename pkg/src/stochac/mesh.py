"""Structured P1 finite elements on the unit square.

Nodes are numbered row-major, ``index = j * (n + 1) + i`` for the node at
``(i * h, j * h)``.  Each grid square is cut along its south-west/north-east
diagonal into two right triangles, so an interior node sits in a patch of six
triangles.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import SolverError

NEUMANN = "neumann"
DIRICHLET = "dirichlet"
BC_KINDS = (NEUMANN, DIRICHLET)


class Mesh:
    """Uniform triangulation of (0, 1)^2 with cached P1 operators.

    Operators are built on first access and never mutated afterwards, so a
    mesh can be shared freely between realizations.
    """

    def __init__(self, n, bc=NEUMANN):
        if int(n) != n or n < 2:
            raise ValueError(f"n_cells_per_side must be an integer >= 2, got {n!r}")
        if bc not in BC_KINDS:
            raise ValueError(f"bc must be one of {BC_KINDS}, got {bc!r}")
        self.n = int(n)
        self.bc = bc
        self.h = 1.0 / self.n

        m = self.n + 1
        ii, jj = np.meshgrid(np.arange(m), np.arange(m))
        self.node_coords = np.column_stack([ii.ravel() * self.h, jj.ravel() * self.h])

        ci, cj = np.meshgrid(np.arange(self.n), np.arange(self.n))
        a = (cj * m + ci).ravel()
        b = a + 1
        c = a + m + 1
        d = a + m
        lower = np.column_stack([a, b, c])
        upper = np.column_stack([a, c, d])
        # interleave so the two halves of a square are adjacent
        self.triangles = np.empty((2 * self.n * self.n, 3), dtype=np.int64)
        self.triangles[0::2] = lower
        self.triangles[1::2] = upper

        on_edge = (ii == 0) | (jj == 0) | (ii == self.n) | (jj == self.n)
        self.boundary_nodes = np.flatnonzero(on_edge.ravel())
        self.interior_nodes = np.flatnonzero(~on_edge.ravel())
        self.boundary_mask = on_edge.ravel()

    @property
    def n_nodes(self):
        return self.node_coords.shape[0]

    @property
    def shape(self):
        """Grid shape ``(rows, cols)`` for reshaping nodal vectors row-major."""
        return (self.n + 1, self.n + 1)

    def signed_areas(self):
        p = self.node_coords[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def mass(self):
        return assemble_mass(self)

    @cached_property
    def lumped_mass(self):
        return np.asarray(self.mass.sum(axis=1)).ravel()

    @cached_property
    def stiffness(self):
        return assemble_stiffness(self)

    def integrate(self, values):
        """Lumped-quadrature integral of a nodal field."""
        return float(self.lumped_mass @ values)

    def __repr__(self):
        return f"Mesh(n={self.n}, bc={self.bc!r})"


def build_mesh(n, bc=NEUMANN):
    return Mesh(n, bc)


def _element_gradients(mesh):
    p = mesh.node_coords[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    # b_k = y_{k+1} - y_{k+2}, c_k = x_{k+2} - x_{k+1} (cyclic)
    bcoef = np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)
    ccoef = np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)
    return bcoef, ccoef, mesh.signed_areas()


def _scatter(mesh, local):
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_mass(mesh):
    """Consistent P1 mass matrix ``M_ij = (phi_j, phi_i)``.

    The lumped variant is ``mesh.lumped_mass`` (row sums).
    """
    area = mesh.signed_areas()
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * ref[None]
    return _scatter(mesh, local)


def assemble_stiffness(mesh):
    """P1 stiffness matrix ``K_ij = (grad phi_j, grad phi_i)``.

    Returned without boundary conditions; see :func:`apply_bc`.
    """
    bcoef, ccoef, area = _element_gradients(mesh)
    local = (bcoef[:, :, None] * bcoef[:, None, :] + ccoef[:, :, None] * ccoef[:, None, :])
    local /= 4.0 * area[:, None, None]
    return _scatter(mesh, local)


def apply_bc(mesh, operator, rhs, boundary_values=None):
    """Impose the mesh's boundary condition on the linear system.

    Neumann is natural, so the system comes back untouched.  For Dirichlet the
    boundary rows and columns are eliminated symmetrically (unit diagonal) and
    the right-hand side is corrected so the boundary unknowns equal
    ``boundary_values`` (zero by default).  The result stays SPD.
    """
    if mesh.bc == NEUMANN:
        return operator, rhs
    g = np.zeros(mesh.n_nodes)
    if boundary_values is not None:
        # scalar or full nodal vector; only boundary entries are used
        full = np.broadcast_to(np.asarray(boundary_values, dtype=float), (mesh.n_nodes,))
        g[mesh.boundary_nodes] = full[mesh.boundary_nodes]
    rhs = np.asarray(rhs, dtype=float) - operator @ g
    rhs[mesh.boundary_nodes] = g[mesh.boundary_nodes]

    keep = (~mesh.boundary_mask).astype(float)
    d = sp.diags(keep)
    A = (d @ operator @ d).tocsr()
    A = A + sp.diags(mesh.boundary_mask.astype(float))
    return A.tocsr(), rhs


def solve_spd(A, b, tol=1e-10, max_iter=1000, x0=None):
    """Jacobi-preconditioned conjugate gradients.

    Returns ``x`` with ``||A x - b||_2 <= tol * ||b||_2``.  Raises
    :class:`SolverError` if that is not reached within ``max_iter`` iterations.
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    if sp.issparse(A):
        diag = A.diagonal()
    else:
        A = np.asarray(A, dtype=float)
        diag = np.diag(A).copy()
    if np.any(diag <= 0):
        raise SolverError("matrix has a non-positive diagonal entry", residual=np.inf)
    inv_diag = 1.0 / diag

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    target = tol * bnorm
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    for _ in range(max_iter):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # guard against drift of the recursive residual
            true = np.linalg.norm(b - A @ x)
            if true <= target:
                return x
            r = b - A @ x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not converge in {max_iter} iterations", residual=rnorm / bnorm
    )
