"""Polynomial bases on cells and edges, quadrature, and L2 projections.

Cell bases are scaled monomials ((x - x_K)/h_K)^a ((y - y_K)/h_K)^b centered
at the cell centroid; edge bases are monomials s^j in the signed arc-length
parameter s in [-1/2, 1/2] (arc length divided by h_E, zero at the midpoint).
The scaling keeps local mass matrices uniformly conditioned under refinement.

Triangle quadrature is a collapsed (Duffy) tensor Gauss rule of any requested
exactness degree; edge quadrature is plain Gauss-Legendre.  Local mass systems
are solved by dense Cholesky.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def dim_P(k, where="cell"):
    """Dimension of P_k on a triangle ("cell") or an interval ("edge")."""
    if k < 0:
        raise ValueError("polynomial degree must be >= 0")
    if where == "cell":
        return (k + 1) * (k + 2) // 2
    if where == "edge":
        return k + 1
    raise ValueError(f"unknown domain {where!r}")


@lru_cache(maxsize=None)
def _monomial_exponents(k):
    """Graded-lex exponent pairs (a, b) with a + b <= k."""
    exps = [(d - j, j) for d in range(k + 1) for j in range(d + 1)]
    return np.asarray(exps, dtype=np.int64)


def _powers(z, kmax):
    """Stack z^0 .. z^kmax along a new last axis."""
    out = np.ones(z.shape + (kmax + 1,))
    for p in range(1, kmax + 1):
        out[..., p] = out[..., p - 1] * z
    return out


@dataclass(frozen=True)
class CellBasis:
    """Scaled monomial basis of P_k on a triangle, in centroid-centered
    coordinates x_rel = (x - x_K)/h_K."""

    degree: int

    @property
    def dim(self):
        return dim_P(self.degree, "cell")

    @property
    def exponents(self):
        return _monomial_exponents(self.degree)

    def values(self, x_rel):
        """Basis values; x_rel shape (..., 2) -> (..., dim)."""
        a, b = self.exponents.T
        px = _powers(x_rel[..., 0], self.degree)
        py = _powers(x_rel[..., 1], self.degree)
        return px[..., a] * py[..., b]

    def gradients(self, x_rel, h=1.0):
        """Gradients w.r.t. physical coordinates of cells with diameter h.

        x_rel shape (..., 2); h broadcastable against x_rel[..., 0].
        Returns (..., dim, 2).
        """
        a, b = self.exponents.T
        px = _powers(x_rel[..., 0], self.degree)
        py = _powers(x_rel[..., 1], self.degree)
        am1 = np.maximum(a - 1, 0)
        bm1 = np.maximum(b - 1, 0)
        gx = a * px[..., am1] * py[..., b]
        gy = b * px[..., a] * py[..., bm1]
        g = np.stack([gx, gy], axis=-1)
        return g / np.asarray(h)[..., None, None]


@dataclass(frozen=True)
class EdgeBasis:
    """Monomials s^j on an edge, s in [-1/2, 1/2]."""

    degree: int

    @property
    def dim(self):
        return self.degree + 1

    def values(self, s):
        """s shape (...) -> (..., dim)."""
        return _powers(np.asarray(s, dtype=float), self.degree)


@dataclass(frozen=True)
class QuadratureRule:
    """Points/weights on the reference triangle {(0,0),(1,0),(0,1)}."""

    points: np.ndarray
    weights: np.ndarray
    degree: int  # every polynomial of total degree <= degree is exact


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Collapsed tensor-Gauss rule exact for P_degree on the reference triangle.

    The Duffy map x = u, y = (1-u) v turns the triangle into the unit square
    with Jacobian (1-u); an n-point Gauss rule per direction with
    2n - 1 >= degree + 1 integrates the transformed monomials exactly.
    """
    n = (degree + 3) // 2  # ceil((degree + 2)/2)
    u, wu = _gauss01(n)
    v, wv = _gauss01(n)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([uu.ravel(), ((1.0 - uu) * vv).ravel()])
    wts = (np.outer(wu * (1.0 - u), wv)).ravel()
    return QuadratureRule(points=pts, weights=wts, degree=2 * n - 2)


@lru_cache(maxsize=None)
def edge_gauss(n):
    """n-point Gauss rule on [-1/2, 1/2]; weights sum to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * x, 0.5 * w


class LocalSpace:
    """Batched per-cell/per-edge basis, quadrature and mass data for one mesh.

    Carries P_k (stress / weak-gradient range), P_{k+1} (interior velocity)
    and P_k(E) (trace) bases evaluated at all quadrature points, plus local
    mass matrices and their Cholesky factors.  All arrays are indexed by cell
    (nc), local edge (3), quadrature point, and basis function.

    Parameters
    ----------
    mesh : Mesh
    k : int
        Stress degree; velocity carries k+1. k >= 1 for the scheme, but any
        k >= 0 is accepted here (projections are degree-agnostic).
    cell_degree : int, optional
        Exactness of the cell rule; default 2(k+1)+2 (assembly grade).
    edge_points : int, optional
        Gauss points per edge; default k+3.
    with_edges : bool
        Skip edge/trace tables when False (error-norm evaluation only).
    """

    def __init__(self, mesh, k, cell_degree=None, edge_points=None, with_edges=True):
        self.mesh = mesh
        self.k = int(k)
        if cell_degree is None:
            cell_degree = 2 * (self.k + 1) + 2
        if edge_points is None:
            edge_points = self.k + 3
        self.cell_rule = triangle_rule(cell_degree)
        self.basis_k = CellBasis(self.k)
        self.basis_k1 = CellBasis(self.k + 1)
        self.edge_basis = EdgeBasis(self.k)
        self.nk = self.basis_k.dim
        self.n1 = self.basis_k1.dim

        p = mesh.cell_coords
        ref = self.cell_rule.points
        self.qp = (p[:, None, 0, :]
                   + np.multiply.outer(ref[:, 0], p[:, 1] - p[:, 0]).transpose(1, 0, 2)
                   + np.multiply.outer(ref[:, 1], p[:, 2] - p[:, 0]).transpose(1, 0, 2))
        self.qw = 2.0 * mesh.areas[:, None] * self.cell_rule.weights[None, :]

        ctr = mesh.centroids
        hK = mesh.h_K
        x_rel = (self.qp - ctr[:, None, :]) / hK[:, None, None]
        self.phi_k = self.basis_k.values(x_rel)
        self.phi_k1 = self.basis_k1.values(x_rel)
        self.dphi_k = self.basis_k.gradients(x_rel, hK[:, None])
        self.dphi_k1 = self.basis_k1.gradients(x_rel, hK[:, None])

        self.mass_k, self._linv_k = self._mass_and_factor(self.phi_k)
        self.mass_k1, self._linv_k1 = self._mass_and_factor(self.phi_k1)

        self.with_edges = bool(with_edges)
        if self.with_edges:
            self._build_edge_tables(edge_points)

    def _mass_and_factor(self, phi):
        mass = np.einsum("cq,cqi,cqj->cij", self.qw, phi, phi)
        try:
            L = np.linalg.cholesky(mass)
        except np.linalg.LinAlgError as exc:
            raise ValueError("degenerate cell: singular local mass matrix") from exc
        return mass, np.linalg.inv(L)

    def _build_edge_tables(self, edge_points):
        mesh = self.mesh
        s, w = edge_gauss(edge_points)
        self.edge_s = s
        self.edge_w = w
        self.chi = self.edge_basis.values(s)  # (nqe, k+1)
        self.edge_mass0 = np.einsum("q,qi,qj->ij", w, self.chi, self.chi)
        # physical edge mass is h_E * edge_mass0

        mid = mesh.edge_midpoints
        vec = mesh.edge_vectors
        self.edge_qp = mid[:, None, :] + np.multiply.outer(s, vec).transpose(1, 0, 2)

        pts = self.edge_qp[mesh.cell_edges]  # (nc, 3, nqe, 2)
        x_rel = (pts - mesh.centroids[:, None, None, :]) / mesh.h_K[:, None, None, None]
        self.tr_k = self.basis_k.values(x_rel)
        self.tr_k1 = self.basis_k1.values(x_rel)

        # arc-length weights per (cell, local edge, point)
        self.edge_qw = mesh.h_E[mesh.cell_edges][:, :, None] * w[None, None, :]
        # trace moments <chi_r, phi_m>_E and <chi_r, psi_i>_E
        self.Wk = np.einsum("clq,qr,clqm->clrm", self.edge_qw, self.chi, self.tr_k)
        self.W1 = np.einsum("clq,qr,clqi->clri", self.edge_qw, self.chi, self.tr_k1)

    # -- local mass solves (dense Cholesky, batched) --

    def solve_mass_k(self, b):
        return self._cho_solve(self._linv_k, b)

    def solve_mass_k1(self, b):
        return self._cho_solve(self._linv_k1, b)

    @staticmethod
    def _cho_solve(linv, b):
        """Solve M x = b given the inverse Cholesky factor of M.

        b has shape (nc, ..., n); the cell axis comes first.
        """
        y = np.einsum("cij,c...j->c...i", linv, b)
        return np.einsum("cji,c...j->c...i", linv, y)

    def basis(self, degree):
        if degree == self.k:
            return self.basis_k
        if degree == self.k + 1:
            return self.basis_k1
        return CellBasis(degree)


def project_cells(space, f, degree=None):
    """L2-project a scalar field onto P_degree on every cell (default P_k).

    f maps points of shape (..., 2) to values of shape (...).  Returns
    coefficients of shape (nc, dim).  The space's cell rule must integrate
    f * P_degree accurately; for non-polynomial f use a high-degree space.
    """
    k = space.k if degree is None else int(degree)
    vals = np.asarray(f(space.qp), dtype=float)
    if k == space.k:
        b = np.einsum("cq,cq,cqi->ci", space.qw, vals, space.phi_k)
        return space.solve_mass_k(b)
    if k == space.k + 1:
        b = np.einsum("cq,cq,cqi->ci", space.qw, vals, space.phi_k1)
        return space.solve_mass_k1(b)
    basis = CellBasis(k)
    x_rel = (space.qp - space.mesh.centroids[:, None, :]) / space.mesh.h_K[:, None, None]
    phi = basis.values(x_rel)
    mass = np.einsum("cq,cqi,cqj->cij", space.qw, phi, phi)
    b = np.einsum("cq,cq,cqi->ci", space.qw, vals, phi)
    return np.linalg.solve(mass, b)


def project_cell(space, f, cell, degree=None):
    """Single-cell convenience wrapper around project_cells."""
    return project_cells(space, f, degree)[cell]


def project_edges(space, f):
    """L2-project a scalar field onto P_k(E) for every edge; (ne, k+1)."""
    vals = np.asarray(f(space.edge_qp), dtype=float)
    mom = np.einsum("q,qr,eq->er", space.edge_w, space.chi, vals)
    return np.linalg.solve(space.edge_mass0, mom.T).T


def project_edge(space, f, edge):
    return project_edges(space, f)[edge]


def eval_cells(space, coeffs, degree=None, gradients=False):
    """Evaluate coefficient fields at the space's cell quadrature points.

    coeffs: (nc, ..., dim) with the basis axis last.  Returns values of shape
    (nc, nq, ...) or, with gradients=True, also (nc, nq, ..., 2).
    """
    k = space.k if degree is None else int(degree)
    if k == space.k:
        phi, dphi = space.phi_k, space.dphi_k
    elif k == space.k + 1:
        phi, dphi = space.phi_k1, space.dphi_k1
    else:
        basis = CellBasis(k)
        x_rel = (space.qp - space.mesh.centroids[:, None, :]) / space.mesh.h_K[:, None, None]
        phi = basis.values(x_rel)
        dphi = basis.gradients(x_rel, space.mesh.h_K[:, None])
    vals = np.einsum("cqi,c...i->cq...", phi, coeffs)
    if not gradients:
        return vals
    grads = np.einsum("cqid,c...i->cq...d", dphi, coeffs)
    return vals, grads


def cell_l2_norm(space, values_sq):
    """Integrate pointwise squared values (nc, nq) and take the square root."""
    return float(np.sqrt(np.einsum("cq,cq->", space.qw, values_sq)))
