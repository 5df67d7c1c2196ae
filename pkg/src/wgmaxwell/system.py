"""Constitutive law, global sparse blocks, per-step matrix and load vector.

The semi-discrete scheme in coefficient form reads

    M0 d(eta)/dt + M0 eta + M1 beta + M2 gamma = 0
    -M1^T eta + M3 beta + M4 gamma = F
    -M2^T eta + M5 beta + M6 gamma = 0

where eta/beta/gamma hold the stress, interior-velocity and edge-velocity
coefficients.  M0 is the stress mass under the compliance (inverse stiffness)
tensor; M1, M2 come from the divergence/trace pairing of stresses with
velocities; M3..M6 split the trace-penalty stabilization

    s(v, w) = sum_edges (1/h_E) <Qb v0 - vb, Qb w0 - wb>_E

into its interior/interior, interior/trace and trace/trace couplings.  The
coupling blocks are assembled from the boundary (integration-by-parts) form,
which needs no local mass solve; the weak-strain route is kept as a testing
oracle.  Backward Euler turns this into one time-independent sparse matrix,
factorized once and reused for every step.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class SolverError(RuntimeError):
    """Raised when the per-step sparse factorization or solve fails."""


@dataclass(frozen=True)
class IsotropicLaw:
    """Isotropic stiffness C eps = 2 mu eps + lam tr(eps) I in 2D and its
    inverse, acting on (11, 22, 12) component triples."""

    mu: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and self.mu + self.lam > 0):
            raise ValueError("need mu > 0 and 2*mu + 2*lam > 0 for a positive law")

    def apply(self, eps):
        """C eps; eps shape (..., 3)."""
        eps = np.asarray(eps, dtype=float)
        tr = eps[..., 0] + eps[..., 1]
        out = np.empty_like(eps)
        out[..., 0] = 2 * self.mu * eps[..., 0] + self.lam * tr
        out[..., 1] = 2 * self.mu * eps[..., 1] + self.lam * tr
        out[..., 2] = 2 * self.mu * eps[..., 2]
        return out

    def apply_inv(self, sigma):
        """C^{-1} sigma = sigma/(2 mu) - lam tr(sigma) I / (2 mu (2 mu + 2 lam))."""
        sigma = np.asarray(sigma, dtype=float)
        a = 1.0 / (2 * self.mu)
        c = self.lam / (2 * self.mu * (2 * self.mu + 2 * self.lam))
        tr = sigma[..., 0] + sigma[..., 1]
        out = np.empty_like(sigma)
        out[..., 0] = a * sigma[..., 0] - c * tr
        out[..., 1] = a * sigma[..., 1] - c * tr
        out[..., 2] = a * sigma[..., 2]
        return out

    def compliance_bounds(self):
        """Spectral bounds (lo, hi) of C^{-1}: lo|t|^2 <= C^{-1}t:t <= hi|t|^2.

        C acts with eigenvalue 2 mu + 2 lam on the trace part and 2 mu on the
        deviatoric part (2D), so the compliance eigenvalues are the inverses.
        """
        return 1.0 / (2 * self.mu + 2 * self.lam), 1.0 / (2 * self.mu)


def apply_Cinv(law, tensor):
    """Compliance applied to a symmetric tensor in (11, 22, 12) components."""
    return law.apply_inv(tensor)


@dataclass
class SystemBlocks:
    """The seven global sparse blocks plus their layout and law."""

    layout: object
    law: IsotropicLaw
    M0: sp.csr_matrix
    M1: sp.csr_matrix
    M2: sp.csr_matrix
    M3: sp.csr_matrix
    M4: sp.csr_matrix
    M5: sp.csr_matrix
    M6: sp.csr_matrix

    def stabilization_gram(self):
        """The s(., .) Gram matrix on (beta, gamma), [[M3, M4], [M5, M6]]."""
        return sp.bmat([[self.M3, self.M4], [self.M5, self.M6]], format="csr")

    def stress_energy_sq(self, eta):
        """||sigma||_a^2 = eta^T M0 eta."""
        return float(eta @ (self.M0 @ eta))

    def stabilization_energy_sq(self, beta, gamma):
        """s(v, v) for coefficient blocks (beta, gamma)."""
        return float(beta @ (self.M3 @ beta) + beta @ (self.M4 @ gamma)
                     + gamma @ (self.M5 @ beta) + gamma @ (self.M6 @ gamma))


def _scatter(rows, cols, vals, shape):
    """Accumulate local blocks: rows (n, A), cols (n, B), vals (n, A, B)."""
    a, b = rows.shape[1], cols.shape[1]
    r = np.repeat(rows[:, :, None], b, axis=2)
    c = np.repeat(cols[:, None, :], a, axis=1)
    return sp.coo_matrix((vals.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()


def assemble_blocks(space, layout, law):
    """Assemble M0..M6 for one mesh/degree/law combination."""
    mesh = space.mesh
    nc = mesh.n_cells
    nk, n1, nb = layout.nk, layout.n1, layout.nb

    sidx = layout.stress_indices()       # (nc, 3, nk)
    vidx = layout.vel_indices()          # (nc, 2, n1)
    eidx_all = layout.edge_indices()     # (ne, 2, nb), -1 on boundary

    # --- M0: stress mass under the compliance tensor -----------------------
    a = 1.0 / (2 * law.mu)
    c = law.lam / (2 * law.mu * (2 * law.mu + 2 * law.lam))
    m = space.mass_k
    M0loc = np.zeros((nc, 3, nk, 3, nk))
    M0loc[:, 0, :, 0, :] = (a - c) * m
    M0loc[:, 1, :, 1, :] = (a - c) * m
    M0loc[:, 0, :, 1, :] = -c * m
    M0loc[:, 1, :, 0, :] = -c * m
    M0loc[:, 2, :, 2, :] = 2 * a * m
    M0 = _scatter(sidx.reshape(nc, -1), sidx.reshape(nc, -1),
                  M0loc.reshape(nc, 3 * nk, 3 * nk),
                  (layout.n_stress, layout.n_stress))

    # --- M1: (phi_0, div Phi) ----------------------------------------------
    B = np.einsum("cq,cqmd,cqi->cdmi", space.qw, space.dphi_k, space.phi_k1)
    M1loc = np.zeros((nc, 3, nk, 2, n1))
    M1loc[:, 0, :, 0, :] = B[:, 0]
    M1loc[:, 1, :, 1, :] = B[:, 1]
    M1loc[:, 2, :, 0, :] = B[:, 1]
    M1loc[:, 2, :, 1, :] = B[:, 0]
    M1 = _scatter(sidx.reshape(nc, -1), vidx.reshape(nc, -1),
                  M1loc.reshape(nc, 3 * nk, 2 * n1),
                  (layout.n_stress, layout.n_vel))

    # --- per-(cell, local edge) tables --------------------------------------
    Tk = space.Wk.transpose(0, 1, 3, 2)          # (nc, 3, nk, nb): <phi_m, chi_j>
    hE = mesh.h_E[mesh.cell_edges]               # (nc, 3)
    n_out = mesh.normals                         # (nc, 3, 2)
    eidx_cl = eidx_all[mesh.cell_edges]          # (nc, 3, 2, nb)
    interior = (layout.edge_slot[mesh.cell_edges] >= 0)  # (nc, 3)

    # --- M2: -<phi_b, Phi n> over interior edges -----------------------------
    M2loc = np.zeros((nc, 3, 3, nk, 2, nb))
    M2loc[:, :, 0, :, 0, :] = -n_out[:, :, 0, None, None] * Tk
    M2loc[:, :, 1, :, 1, :] = -n_out[:, :, 1, None, None] * Tk
    M2loc[:, :, 2, :, 0, :] = -n_out[:, :, 1, None, None] * Tk
    M2loc[:, :, 2, :, 1, :] = -n_out[:, :, 0, None, None] * Tk
    mask = interior.ravel()
    rows_s = np.broadcast_to(sidx[:, None, :, :], (nc, 3, 3, nk)).reshape(nc * 3, 3 * nk)
    cols_e = eidx_cl.reshape(nc * 3, 2 * nb)
    M2 = _scatter(rows_s[mask], cols_e[mask],
                  M2loc.reshape(nc * 3, 3 * nk, 2 * nb)[mask],
                  (layout.n_stress, layout.n_edge))

    # --- stabilization pieces ------------------------------------------------
    # W1 includes the arc-length factor h_E; PW holds the Qb-projection
    # coefficients of the P_{k+1} traces: Qb psi_i = sum_r PW[r, i] chi_r.
    PW = np.linalg.solve(space.edge_mass0[None, None, :, :],
                         space.W1 / hE[:, :, None, None])

    # M3 (all edges, boundary included): (1/h_E) <Qb psi_j, Qb psi_i>_E
    M3cl = np.einsum("clri,rs,clsj->clij", PW, space.edge_mass0, PW)
    M3loc = np.zeros((nc, 2, n1, 2, n1))
    M3loc[:, 0, :, 0, :] = M3cl.sum(axis=1)
    M3loc[:, 1, :, 1, :] = M3cl.sum(axis=1)
    M3 = _scatter(vidx.reshape(nc, -1), vidx.reshape(nc, -1),
                  M3loc.reshape(nc, 2 * n1, 2 * n1),
                  (layout.n_vel, layout.n_vel))

    # M4 (interior edges): -(1/h_E) <chi_j, psi_i>_E
    M4cl = -(space.W1 / hE[:, :, None, None]).transpose(0, 1, 3, 2)  # (nc,3,n1,nb)
    M4loc = np.zeros((nc, 3, 2, n1, 2, nb))
    M4loc[:, :, 0, :, 0, :] = M4cl
    M4loc[:, :, 1, :, 1, :] = M4cl
    rows_v = np.broadcast_to(vidx[:, None, :, :], (nc, 3, 2, n1)).reshape(nc * 3, 2 * n1)
    M4 = _scatter(rows_v[mask], cols_e[mask],
                  M4loc.reshape(nc * 3, 2 * n1, 2 * nb)[mask],
                  (layout.n_vel, layout.n_edge))

    # M5 (interior edges): -(1/h_E) <Qb psi_j, chi_i>_E, assembled through the
    # projection route; must equal M4^T up to round-off.
    M5cl = -np.einsum("rs,clsj->clrj", space.edge_mass0, PW)  # (nc,3,nb,n1)
    M5loc = np.zeros((nc, 3, 2, nb, 2, n1))
    M5loc[:, :, 0, :, 0, :] = M5cl
    M5loc[:, :, 1, :, 1, :] = M5cl
    M5 = _scatter(cols_e[mask], rows_v[mask],
                  M5loc.reshape(nc * 3, 2 * nb, 2 * n1)[mask],
                  (layout.n_edge, layout.n_vel))

    # M6 (interior edges): (1/h_E) <chi_j, chi_i>_E from each adjacent cell;
    # the h_E factors cancel, leaving the reference edge mass per adjacency.
    M6cl = np.broadcast_to(space.edge_mass0, (nc, 3, nb, nb))
    M6loc = np.zeros((nc, 3, 2, nb, 2, nb))
    M6loc[:, :, 0, :, 0, :] = M6cl
    M6loc[:, :, 1, :, 1, :] = M6cl
    M6 = _scatter(cols_e[mask], cols_e[mask],
                  M6loc.reshape(nc * 3, 2 * nb, 2 * nb)[mask],
                  (layout.n_edge, layout.n_edge))

    return SystemBlocks(layout=layout, law=law, M0=M0, M1=M1, M2=M2,
                        M3=M3, M4=M4, M5=M5, M6=M6)


@dataclass
class StepMatrix:
    """Backward-Euler per-step matrix with its reusable factorization."""

    A: sp.csc_matrix
    dt: float
    lu: object = field(repr=False)

    def solve(self, rhs):
        return self.lu.solve(rhs)


def assemble_step_matrix(blocks, dt):
    """Assemble and factorize the per-step matrix for time step dt.

    Row blocks:  (1/dt + 1) M0 | M1 | M2
                 -M1^T         | M3 | M4
                 -M2^T         | M5 | M6
    """
    if not dt > 0:
        raise ValueError("time step must be positive")
    A = sp.bmat([
        [(1.0 + 1.0 / dt) * blocks.M0, blocks.M1, blocks.M2],
        [-blocks.M1.T, blocks.M3, blocks.M4],
        [-blocks.M2.T, blocks.M5, blocks.M6],
    ], format="csc")
    try:
        lu = splu(A)
    except RuntimeError as exc:  # singular factorization: assembly bug
        raise SolverError(f"per-step matrix factorization failed: {exc}") from exc
    return StepMatrix(A=A, dt=dt, lu=lu)


def assemble_load(space, layout, f, t):
    """Moments (f(., t), phi_0) against the interior velocity basis.

    f maps (points (..., 2), t) to vectors (..., 2).  Stress and edge blocks
    of the returned vector are zero.
    """
    fv = np.asarray(f(space.qp, t), dtype=float)
    mom = np.einsum("cq,cqd,cqi->cdi", space.qw, fv, space.phi_k1)
    F = np.zeros(layout.total)
    F[layout.vel_slice] = mom.ravel()
    return F


def stabilization_energy(space, v0, vb):
    """Evaluate s(v, v) directly from coefficients, boundary edges included.

    v0: (nc, 2, n1) interior velocity coefficients; vb: (ne, 2, nb) trace
    coefficients on every edge (pass zeros on boundary edges for members of
    the constrained space).  Used as an oracle against the M3..M6 route.
    """
    mesh = space.mesh
    hE = mesh.h_E[mesh.cell_edges]
    PW = np.linalg.solve(space.edge_mass0[None, None, :, :],
                         space.W1 / hE[:, :, None, None])
    qtrace = np.einsum("clri,cdi->cldr", PW, v0)       # (nc, 3, 2, nb)
    diff = qtrace - vb[mesh.cell_edges]
    return float(np.einsum("cldr,rs,clds->", diff, space.edge_mass0, diff))
