"""Uniform triangular meshes of the unit square with full edge connectivity.

An M x M grid of squares is triangulated by one of three patterns:

    diagonal-ne  -- split along the (0,0)-(1,1) diagonal (2 triangles/square)
    diagonal-nw  -- split along the (1,0)-(0,1) diagonal (2 triangles/square)
    crisscross   -- split into 4 triangles around the square's center vertex

Vertices are deduplicated by integer lattice index, never by floating-point
comparison, so the connectivity is watertight by construction.  Every edge is
stored once with its vertex pair ordered (lo, hi) by vertex index; that order
fixes the global 1D parameter direction shared by both adjacent cells.
"""

from dataclasses import dataclass

import numpy as np

PATTERNS = ("diagonal-ne", "diagonal-nw", "crisscross")


@dataclass(frozen=True)
class Mesh:
    """Immutable triangulation of [0,1]^2.

    Attributes
    ----------
    vertices : (nv, 2) float
    cells : (nc, 3) int
        Vertex triples, counterclockwise.
    edges : (ne, 2) int
        Vertex pairs (lo, hi); lo < hi fixes the edge's parameter direction.
    edge_cells : (ne, 2) int
        Adjacent cell indices; second entry is -1 for boundary edges.
    cell_edges : (nc, 3) int
        Global edge index of local edges ((v0,v1), (v1,v2), (v2,v0)).
    cell_edge_signs : (nc, 3) int
        +1 where the cell's local edge direction matches the global (lo, hi)
        direction, -1 otherwise.
    normals : (nc, 3, 2) float
        Unit outward normal per (cell, local edge).
    h_K : (nc,) float -- cell diameters (longest edge).
    h_E : (ne,) float -- edge lengths.
    """

    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    edge_cells: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    normals: np.ndarray
    h_K: np.ndarray
    h_E: np.ndarray

    def __post_init__(self):
        for a in (self.vertices, self.cells, self.edges, self.edge_cells,
                  self.cell_edges, self.cell_edge_signs, self.normals,
                  self.h_K, self.h_E):
            a.flags.writeable = False

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def is_boundary_edge(self):
        return self.edge_cells[:, 1] < 0

    @property
    def interior_edges(self):
        return np.flatnonzero(~self.is_boundary_edge)

    @property
    def cell_coords(self):
        """(nc, 3, 2) vertex coordinates per cell."""
        return self.vertices[self.cells]

    @property
    def centroids(self):
        return self.cell_coords.mean(axis=1)

    @property
    def areas(self):
        p = self.cell_coords
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def edge_midpoints(self):
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @property
    def edge_vectors(self):
        """(ne, 2) vector from lo to hi vertex; length h_E."""
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]


def _cells_for_pattern(M, pattern):
    """Cell connectivity (ccw) and, for crisscross, the center vertices."""
    nv_grid = (M + 1) * (M + 1)
    vid = lambda i, j: j * (M + 1) + i

    cells = []
    centers = []
    for j in range(M):
        for i in range(M):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            if pattern == "diagonal-ne":
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
            elif pattern == "diagonal-nw":
                cells.append((v00, v10, v01))
                cells.append((v10, v11, v01))
            else:  # crisscross
                c = nv_grid + j * M + i
                centers.append((i, j))
                cells.append((v00, v10, c))
                cells.append((v10, v11, c))
                cells.append((v11, v01, c))
                cells.append((v01, v00, c))
    return np.asarray(cells, dtype=np.int64), centers


def build_uniform_mesh(M, pattern="diagonal-ne"):
    """Build an M x M uniform triangular mesh of the unit square.

    Parameters
    ----------
    M : int
        Number of squares per side; M >= 1.
    pattern : str
        One of ``diagonal-ne`` (default), ``diagonal-nw``, ``crisscross``.

    Returns
    -------
    Mesh
    """
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    pattern = str(pattern).lower()
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}; choose from {PATTERNS}")

    ii, jj = np.meshgrid(np.arange(M + 1), np.arange(M + 1), indexing="xy")
    verts = np.column_stack([(ii / M).ravel(), (jj / M).ravel()])

    cells, centers = _cells_for_pattern(M, pattern)
    if centers:
        cij = np.asarray(centers, dtype=np.float64)
        verts = np.vstack([verts, np.column_stack([(cij[:, 0] + 0.5) / M,
                                                   (cij[:, 1] + 0.5) / M])])

    mesh = _connect(verts, cells)
    _validate(mesh)
    return mesh


def _connect(vertices, cells):
    """Derive edges, adjacency, normals and sizes from vertices/cells."""
    nc = cells.shape[0]
    local = np.stack([cells, np.roll(cells, -1, axis=1)], axis=2)  # (nc,3,2) a->b

    lo = local.min(axis=2)
    hi = local.max(axis=2)
    keys = lo.astype(np.int64) * vertices.shape[0] + hi
    uniq, inv = np.unique(keys.ravel(), return_inverse=True)
    cell_edges = inv.reshape(nc, 3).astype(np.int64)
    ne = uniq.shape[0]

    edges = np.column_stack([uniq // vertices.shape[0], uniq % vertices.shape[0]])
    cell_edge_signs = np.where(local[:, :, 0] == edges[cell_edges, 0], 1, -1)

    edge_cells = np.full((ne, 2), -1, dtype=np.int64)
    order = np.argsort(cell_edges.ravel(), kind="stable")
    flat_cells = np.repeat(np.arange(nc), 3)[order]
    flat_edges = cell_edges.ravel()[order]
    first = np.ones(flat_edges.shape[0], dtype=bool)
    first[1:] = flat_edges[1:] != flat_edges[:-1]
    edge_cells[flat_edges[first], 0] = flat_cells[first]
    edge_cells[flat_edges[~first], 1] = flat_cells[~first]

    pa = vertices[local[:, :, 0]]
    pb = vertices[local[:, :, 1]]
    d = pb - pa
    lengths = np.hypot(d[:, :, 0], d[:, :, 1])
    # ccw cell: outward normal of edge a->b is the direction rotated by -90 deg
    normals = np.stack([d[:, :, 1], -d[:, :, 0]], axis=2) / lengths[:, :, None]

    h_E = np.hypot(*(vertices[edges[:, 1]] - vertices[edges[:, 0]]).T)
    h_K = lengths.max(axis=1)

    return Mesh(vertices=vertices, cells=cells, edges=edges, edge_cells=edge_cells,
                cell_edges=cell_edges, cell_edge_signs=cell_edge_signs,
                normals=normals, h_K=h_K, h_E=h_E)


def _validate(mesh):
    areas = mesh.areas
    if not np.all(areas > 0):
        raise ValueError("mesh has non-ccw or degenerate cells")
    if abs(areas.sum() - 1.0) > 1e-12:
        raise ValueError("cell areas do not sum to 1")
    counts = (mesh.edge_cells >= 0).sum(axis=1)
    if not np.all((counts == 1) | (counts == 2)):
        raise ValueError("broken edge-cell adjacency")
    # Euler relation for a simply connected planar triangulation
    if mesh.n_vertices - mesh.n_edges + (mesh.n_cells + 1) != 2:
        raise ValueError("Euler relation violated")
    mids = mesh.vertices[mesh.edges[mesh.cell_edges]].mean(axis=2)
    out = np.einsum("cld,cld->cl", mesh.normals, mids - mesh.centroids[:, None, :])
    if not np.all(out > 0):
        raise ValueError("non-outward normal detected")


def mesh_stats(mesh):
    """Return (h, min_angle_deg): max cell diameter and smallest cell angle."""
    p = mesh.cell_coords
    angles = []
    for loc in range(3):
        a = p[:, loc]
        b = p[:, (loc + 1) % 3]
        c = p[:, (loc + 2) % 3]
        u, v = b - a, c - a
        cosang = np.einsum("cd,cd->c", u, v) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return float(mesh.h_K.max()), float(np.min(angles))


def write_vtk(mesh, path, cell_data=None, title="wgmaxwell mesh"):
    """Dump the mesh as a legacy ASCII VTK unstructured grid.

    cell_data, if given, is a dict name -> array of shape (nc,) (scalars)
    or (nc, 2) / (nc, 3) (vectors; 2D vectors are padded with a zero z).
    """
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    lines += [f"{x:.16g} {y:.16g} 0.0" for x, y in mesh.vertices]
    lines.append(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += ["5"] * mesh.n_cells

    if cell_data:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, values in cell_data.items():
            values = np.asarray(values, dtype=float)
            if values.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines += [f"{v:.16g}" for v in values]
            else:
                if values.shape[1] == 2:
                    values = np.column_stack([values, np.zeros(len(values))])
                lines.append(f"VECTORS {name} double")
                lines += [f"{a:.16g} {b:.16g} {c:.16g}" for a, b, c in values]

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
