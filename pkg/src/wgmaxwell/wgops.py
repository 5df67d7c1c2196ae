"""Discrete weak differential operators and the global DOF layout.

A discrete velocity lives as a pair (interior polynomial, edge traces): the
interior part is P_{k+1} per cell, the trace part P_k per edge, single-valued
across edges and zero on the domain boundary.  The weak gradient of such a
pair is the [P_k]^2 cell polynomial defined by duality,

    (grad_w v, q)_K = -(v0, div q)_K + <vb, q.n>_dK   for all q in [P_k(K)]^2,

realized here as an explicit local matrix per cell acting on the stacked
(interior, 3 x trace) coefficient blocks.  The weak strain symmetrizes the
weak gradient; the weak divergence is the scalar analogue.

Symmetric tensors are stored as (11, 22, 12) component triples throughout,
with the inner product s:t = s11 t11 + s22 t22 + 2 s12 t12.
"""

from dataclasses import dataclass, field

import numpy as np

from .polyspace import CellBasis, dim_P

# (11, 22, 12) component convention: off-diagonal carries weight 2 in s:t
TENSOR_COMPONENT_WEIGHTS = np.array([1.0, 1.0, 2.0])


@dataclass(frozen=True)
class DofLayout:
    """Global indexing of stress, interior-velocity and edge-velocity unknowns.

    Ordering: all stress coefficients (per cell, per component 11/22/12, per
    P_k basis function), then interior velocity (per cell, per component x/y,
    per P_{k+1} basis function), then edge velocity on interior edges only
    (per edge slot, per component, per P_k(E) basis function).  Boundary edges
    carry no unknowns: the constraint vb = 0 on the boundary is imposed by
    omission.
    """

    mesh: object
    k: int
    nk: int = field(init=False)
    n1: int = field(init=False)
    nb: int = field(init=False)
    n_stress: int = field(init=False)
    n_vel: int = field(init=False)
    n_edge: int = field(init=False)
    total: int = field(init=False)
    edge_slot: np.ndarray = field(init=False)

    def __post_init__(self):
        nk = dim_P(self.k, "cell")
        n1 = dim_P(self.k + 1, "cell")
        nb = dim_P(self.k, "edge")
        nc = self.mesh.n_cells
        interior = self.mesh.interior_edges
        slot = np.full(self.mesh.n_edges, -1, dtype=np.int64)
        slot[interior] = np.arange(interior.size)
        slot.flags.writeable = False
        object.__setattr__(self, "nk", nk)
        object.__setattr__(self, "n1", n1)
        object.__setattr__(self, "nb", nb)
        object.__setattr__(self, "n_stress", 3 * nk * nc)
        object.__setattr__(self, "n_vel", 2 * n1 * nc)
        object.__setattr__(self, "n_edge", 2 * nb * interior.size)
        object.__setattr__(self, "total", self.n_stress + self.n_vel + self.n_edge)
        object.__setattr__(self, "edge_slot", slot)

    @property
    def n_interior_edges(self):
        return self.n_edge // (2 * self.nb)

    @property
    def stress_slice(self):
        return slice(0, self.n_stress)

    @property
    def vel_slice(self):
        return slice(self.n_stress, self.n_stress + self.n_vel)

    @property
    def edge_slice(self):
        return slice(self.n_stress + self.n_vel, self.total)

    def stress_indices(self):
        """(nc, 3, nk) global indices of stress coefficients."""
        nc = self.mesh.n_cells
        base = np.arange(nc)[:, None, None] * 3 * self.nk
        comp = np.arange(3)[None, :, None] * self.nk
        return base + comp + np.arange(self.nk)[None, None, :]

    def vel_indices(self):
        """(nc, 2, n1) global indices of interior velocity coefficients."""
        nc = self.mesh.n_cells
        base = self.n_stress + np.arange(nc)[:, None, None] * 2 * self.n1
        comp = np.arange(2)[None, :, None] * self.n1
        return base + comp + np.arange(self.n1)[None, None, :]

    def edge_indices(self):
        """(ne, 2, nb) global indices of trace coefficients; -1 on boundary."""
        off = self.n_stress + self.n_vel
        idx = off + (self.edge_slot[:, None, None] * 2 * self.nb
                     + np.arange(2)[None, :, None] * self.nb
                     + np.arange(self.nb)[None, None, :])
        return np.where(self.edge_slot[:, None, None] < 0, -1, idx)

    def split(self, x):
        """Split a full coefficient vector into (eta, beta, gamma)."""
        return (x[self.stress_slice], x[self.vel_slice], x[self.edge_slice])


def weak_gradient_matrices(space):
    """Local weak-gradient operators for every cell.

    Returns G of shape (nc, 2, nk, n1 + 3*nb): G[c, d] maps the stacked
    coefficients (v0 in P_{k+1}, then traces on local edges 0..2 in the
    global edge orientation) to component d of grad_w v in P_k(K).
    """
    mesh = space.mesh
    nk, n1, nb = space.nk, space.n1, space.k + 1
    ncols = n1 + 3 * nb

    # volume term: B[c,d,m,i] = (psi_i, d phi_m / dx_d)_K
    B = np.einsum("cq,cqmd,cqi->cdmi", space.qw, space.dphi_k, space.phi_k1)
    # edge term: Tk[c,l,m,j] = <chi_j, phi_m>_E
    Tk = space.Wk.transpose(0, 1, 3, 2)

    rhs = np.zeros((mesh.n_cells, 2, nk, ncols))
    rhs[:, :, :, :n1] = -B
    for loc in range(3):
        n_d = mesh.normals[:, loc, :]  # (nc, 2)
        cols = slice(n1 + loc * nb, n1 + (loc + 1) * nb)
        rhs[:, :, :, cols] = n_d[:, :, None, None] * Tk[:, loc][:, None, :, :]

    # solve the local P_k mass system row-wise
    g = space.solve_mass_k(rhs.transpose(0, 1, 3, 2))
    return g.transpose(0, 1, 3, 2)


def weak_gradient(space, cell, v0, vb, gmats=None):
    """Weak gradient of a scalar pair on one cell.

    v0: (n1,) interior P_{k+1} coefficients; vb: (3, nb) trace coefficients
    per local edge in global edge orientation.  Returns (2, nk).
    """
    if gmats is None:
        gmats = weak_gradient_matrices(space)
    stacked = np.concatenate([np.asarray(v0, float).ravel(),
                              np.asarray(vb, float).ravel()])
    return gmats[cell] @ stacked


def weak_strain(space, cell, v0, vb, gmats=None):
    """Weak symmetric strain of a vector pair on one cell.

    v0: (2, n1); vb: (3, 2, nb).  Returns (3, nk) in (11, 22, 12) order.
    """
    if gmats is None:
        gmats = weak_gradient_matrices(space)
    vb = np.asarray(vb, float)
    g1 = weak_gradient(space, cell, v0[0], vb[:, 0], gmats)
    g2 = weak_gradient(space, cell, v0[1], vb[:, 1], gmats)
    return np.stack([g1[0], g2[1], 0.5 * (g1[1] + g2[0])])


def weak_strain_all(space, v0, vb_cellwise, gmats=None):
    """Batched weak strain: v0 (nc, 2, n1), vb_cellwise (nc, 3, 2, nb).

    Returns (nc, 3, nk).
    """
    if gmats is None:
        gmats = weak_gradient_matrices(space)
    stacked = np.concatenate(
        [v0, vb_cellwise.transpose(0, 2, 1, 3).reshape(v0.shape[0], 2, -1)], axis=2)
    g = np.einsum("cdmn,cen->cdem", gmats, stacked)  # g[c, d, e] = d-th deriv of comp e
    return np.stack([g[:, 0, 0], g[:, 1, 1], 0.5 * (g[:, 1, 0] + g[:, 0, 1])], axis=1)


def gather_cell_traces(layout, edge_coeffs):
    """Arrange per-edge trace coefficients cell-wise.

    edge_coeffs: (ne, ..., nb) in global edge orientation.  Returns
    (nc, 3, ..., nb) ready for the weak-gradient column blocks.
    """
    return edge_coeffs[layout.mesh.cell_edges]


def weak_divergence(space, cell, v0, vb, j=None):
    """Weak divergence of a vector pair on one cell, valued in P_j(K).

    v0: (2, n1); vb: (3, 2, nb); j defaults to k.  Solves
    (div_w v, q)_K = -(v0, grad q)_K + <vb.n, q>_dK for all q in P_j(K).
    """
    mesh = space.mesh
    if j is None:
        j = space.k
    basis = CellBasis(j)
    ctr = mesh.centroids[cell]
    h = mesh.h_K[cell]

    x_rel = (space.qp[cell] - ctr) / h
    q = basis.values(x_rel)                 # (nq, nj)
    dq = basis.gradients(x_rel, h)          # (nq, nj, 2)
    v0_vals = np.einsum("qi,di->qd", space.phi_k1[cell], np.asarray(v0, float))
    rhs = -np.einsum("q,qjd,qd->j", space.qw[cell], dq, v0_vals)

    xe_rel = (space.edge_qp[mesh.cell_edges[cell]] - ctr) / h  # (3, nqe, 2)
    qe = basis.values(xe_rel)               # (3, nqe, nj)
    vb_vals = np.einsum("qr,ldr->lqd", space.chi, np.asarray(vb, float))
    vb_dot_n = np.einsum("lqd,ld->lq", vb_vals, mesh.normals[cell])
    rhs += np.einsum("lq,lq,lqj->j", space.edge_qw[cell], vb_dot_n, qe)

    mass = np.einsum("q,qi,qj->ij", space.qw[cell], q, q)
    return np.linalg.solve(mass, rhs)
