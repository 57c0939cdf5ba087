"""Simplicial complexes in dimensions 2 and 3.

Provides the oriented face lattice, built-in polyhedral domain generators of
varying topology, uniform (red / Bey) and adaptive (newest-vertex bisection)
refinement, per-cell and per-face geometry, and an ASCII mesh file format.

Face ids are assigned by lexicographic order of the sorted vertex tuples, so
all derived objects (dof numberings, incidence matrices) are reproducible.
"""

from __future__ import annotations

from itertools import combinations
from math import factorial

import numpy as np

from .errors import MeshError, MeshParseError, UnsupportedOperationError

GENERATORS = ("square", "l_shape", "square_annulus", "cube", "cube_with_tunnel")


def _subset_columns(m: int, size: int):
    """Increasing `size`-subsets of range(m), lexicographic."""
    return list(combinations(range(m), size))


def _row_ids(table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Ids of `rows` inside the lexicographically sorted unique `table`.

    Raises MeshError if some row is absent (signals a broken lattice).
    """
    cat = np.vstack([table, rows])
    uq, inv = np.unique(cat, axis=0, return_inverse=True)
    if uq.shape[0] != table.shape[0]:
        raise MeshError("face lookup failed: row not present in face table")
    return inv[table.shape[0]:]


class SimplicialComplex:
    """Conforming simplicial mesh with its full face lattice.

    Attributes
    ----------
    dim : int, ambient/topological dimension (2 or 3)
    vertices : (nv, dim) float array
    cells : (nc, dim+1) int array, positive signed volume in stored order
    faces : dict k -> (nf_k, k+1) int array of sorted vertex tuples
    cell_faces : dict k -> (nc, C(dim+1, k+1)) face ids per cell
    facet_signs : (nc, dim+1) orientation of each facet in the cell boundary
    boundary : dict k -> (nf_k,) bool array
    parent_cells : (nc,) int array or None; set by the refinement routines
    """

    def __init__(self, dim, vertices, cells, faces, cell_faces, facet_signs,
                 boundary, parent_cells=None):
        self.dim = dim
        self.vertices = vertices
        self.cells = cells
        self.faces = faces
        self.cell_faces = cell_faces
        self.facet_signs = facet_signs
        self.boundary = boundary
        self.parent_cells = parent_cells
        self._geometry = None
        for arr in [vertices, cells, facet_signs, *faces.values(),
                    *cell_faces.values(), *boundary.values()]:
            arr.setflags(write=False)

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    def n_faces(self, k):
        return self.faces[k].shape[0]

    def euler_characteristic(self):
        return sum((-1) ** k * self.n_faces(k) for k in range(self.dim + 1))

    def geometry(self):
        if self._geometry is None:
            self._geometry = MeshGeometry(self)
        return self._geometry

    def __repr__(self):
        counts = ", ".join(f"{self.n_faces(k)} k={k}" for k in range(self.dim + 1))
        return f"SimplicialComplex(dim={self.dim}, faces: {counts})"


def _signed_volumes(vertices, cells):
    E = vertices[cells[:, 1:]] - vertices[cells[:, :1]]
    return np.linalg.det(E) / factorial(cells.shape[1] - 1)


def _check_hanging_vertices(vertices, facets_one_cell, h_scale):
    """Detect vertices lying in the relative interior of boundary-claimed facets.

    A hanging vertex always produces a facet that claims to be boundary (one
    incident cell) with the vertex inside it, so only those facets are tested.
    Candidate vertices are narrowed with a KD-tree.
    """
    if facets_one_cell.shape[0] == 0:
        return
    from scipy.spatial import cKDTree

    tree = cKDTree(vertices)
    tol = 1e-10 * h_scale
    for facet in facets_one_cell:
        pts = vertices[facet]
        center = pts.mean(axis=0)
        radius = np.linalg.norm(pts - center, axis=1).max() * (1.0 + 1e-9)
        cand = [v for v in tree.query_ball_point(center, radius + tol)
                if v not in facet]
        if not cand:
            continue
        p0 = pts[0]
        E = pts[1:] - p0
        d = vertices[cand] - p0
        coef, *_ = np.linalg.lstsq(E.T, d.T, rcond=None)
        resid = d - coef.T @ E
        lam_rest = coef.T
        lam0 = 1.0 - lam_rest.sum(axis=1)
        inside = ((np.linalg.norm(resid, axis=1) < tol)
                  & (lam0 > 1e-8) & np.all(lam_rest > 1e-8, axis=1))
        if np.any(inside):
            v = cand[int(np.nonzero(inside)[0][0])]
            raise MeshError(
                f"non-conforming mesh: vertex {v} hangs on facet {tuple(facet)}")


def build_complex(cells, coords) -> SimplicialComplex:
    """Build the full face lattice of a conforming simplicial mesh.

    Cells with negative signed volume are reordered (first two vertices
    swapped); zero-volume cells and non-conforming connectivity raise
    MeshError.
    """
    vertices = np.ascontiguousarray(np.asarray(coords, dtype=float))
    cells = np.ascontiguousarray(np.asarray(cells, dtype=np.int64))
    if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
        raise MeshError("vertex coordinates must be an (nv, 2) or (nv, 3) array")
    dim = vertices.shape[1]
    if cells.ndim != 2 or cells.shape[1] != dim + 1:
        raise MeshError(f"cells must have {dim + 1} vertices in dimension {dim}")
    if cells.min(initial=0) < 0 or cells.max(initial=-1) >= len(vertices):
        raise MeshError("cell vertex id out of range")
    if np.any(np.sort(cells, axis=1)[:, :-1] == np.sort(cells, axis=1)[:, 1:]):
        raise MeshError("degenerate cell: repeated vertex")

    vols = _signed_volumes(vertices, cells)
    scale = np.abs(vols).max(initial=0.0)
    if np.any(np.abs(vols) <= 1e-13 * max(scale, 1.0)):
        bad = int(np.argmin(np.abs(vols)))
        raise MeshError(f"degenerate cell {bad}: zero volume")
    flip = vols < 0
    if np.any(flip):
        cells = cells.copy()
        cells[flip, 0], cells[flip, 1] = cells[flip, 1].copy(), cells[flip, 0].copy()

    sorted_cells = np.sort(cells, axis=1)
    if np.unique(sorted_cells, axis=0).shape[0] != cells.shape[0]:
        raise MeshError("non-conforming mesh: duplicate cell")

    faces = {}
    cell_faces = {}
    for k in range(dim + 1):
        cols = _subset_columns(dim + 1, k + 1)
        subs = sorted_cells[:, cols].reshape(-1, k + 1)
        table, inv = np.unique(subs, axis=0, return_inverse=True)
        faces[k] = table
        cell_faces[k] = inv.reshape(cells.shape[0], len(cols))

    # conformity: every facet belongs to exactly 1 or 2 cells
    facet_count = np.bincount(cell_faces[dim - 1].ravel(),
                              minlength=faces[dim - 1].shape[0])
    if facet_count.max(initial=0) > 2:
        f = int(np.argmax(facet_count))
        raise MeshError(
            f"non-conforming mesh: facet {tuple(faces[dim - 1][f])} shared by "
            f"{facet_count[f]} cells")

    h = np.linalg.norm(vertices[cells[:, 1]] - vertices[cells[:, 0]], axis=1).max()
    _check_hanging_vertices(vertices, faces[dim - 1][facet_count == 1], h)

    # boundary flags: facets in one cell; lower faces by subset closure
    boundary = {dim - 1: facet_count == 1, dim: np.zeros(cells.shape[0], dtype=bool)}
    bfacets = faces[dim - 1][boundary[dim - 1]]
    for k in range(dim - 1):
        flags = np.zeros(faces[k].shape[0], dtype=bool)
        if bfacets.shape[0]:
            cols = _subset_columns(dim, k + 1)
            subs = bfacets[:, cols].reshape(-1, k + 1)
            flags[_row_ids(faces[k], subs)] = True
        boundary[k] = flags

    # orientation of facet j (sorted order, omitting sorted position j) in the
    # boundary of the stored, positively oriented cell
    order = np.argsort(cells, axis=1)
    inv_count = np.zeros(cells.shape[0], dtype=np.int64)
    for a in range(dim + 1):
        for b in range(a + 1, dim + 1):
            inv_count += order[:, a] > order[:, b]
    parity = np.where(inv_count % 2, -1, 1).astype(np.int8)
    alt = np.array([(-1) ** j for j in range(dim + 1)], dtype=np.int8)
    facet_signs = parity[:, None] * alt[None, :]

    return SimplicialComplex(dim, vertices, cells, faces, cell_faces,
                             facet_signs, boundary)


class MeshGeometry:
    """Per-cell and per-facet metric data with a fixed normal side convention.

    Facet normals point from the lower incident cell id to the higher one and
    outward on the boundary.
    """

    def __init__(self, mesh: SimplicialComplex):
        n = mesh.dim
        V, C = mesh.vertices, mesh.cells
        self.volumes = np.abs(_signed_volumes(V, C))

        P = V[C]                                        # (nc, n+1, n)
        pair_cols = _subset_columns(n + 1, 2)
        d = np.stack([np.linalg.norm(P[:, a] - P[:, b], axis=1)
                      for a, b in pair_cols], axis=1)
        self.h = d.max(axis=1)

        facets = mesh.faces[n - 1]
        F = V[facets]
        if n == 2:
            e = F[:, 1] - F[:, 0]
            self.facet_measures = np.linalg.norm(e, axis=1)
            raw = np.stack([e[:, 1], -e[:, 0]], axis=1)
        else:
            e1, e2 = F[:, 1] - F[:, 0], F[:, 2] - F[:, 0]
            raw = np.cross(e1, e2)
            self.facet_measures = 0.5 * np.linalg.norm(raw, axis=1)
            raw = 0.5 * raw
        normals = raw / np.linalg.norm(raw, axis=1, keepdims=True)

        # incident cells per facet, lower id first
        nfacets = facets.shape[0]
        ids = mesh.cell_faces[n - 1].ravel()
        cells_rep = np.repeat(np.arange(mesh.n_cells), n + 1)
        order = np.lexsort((cells_rep, ids))
        ids_s, cells_s = ids[order], cells_rep[order]
        starts = np.searchsorted(ids_s, np.arange(nfacets))
        fc = np.full((nfacets, 2), -1, dtype=np.int64)
        fc[:, 0] = cells_s[starts]
        nxt = starts + 1
        has2 = (nxt < ids_s.size) & (ids_s[np.minimum(nxt, ids_s.size - 1)]
                                     == np.arange(nfacets))
        fc[has2, 1] = cells_s[nxt[has2]]
        self.facet_cells = fc

        # inradius = n * volume / total facet area
        area_sum = self.facet_measures[mesh.cell_faces[n - 1]].sum(axis=1)
        self.inradii = n * self.volumes / area_sum
        self.shape_ratios = self.h / self.inradii

        cell_centroids = P.mean(axis=1)
        face_centroids = F.mean(axis=1)
        ref = np.where((fc[:, 1] >= 0)[:, None],
                       cell_centroids[np.maximum(fc[:, 1], 0)] - cell_centroids[fc[:, 0]],
                       face_centroids - cell_centroids[fc[:, 0]])
        sign = np.sign(np.einsum("ij,ij->i", normals, ref))
        self.normals = normals * sign[:, None]

        for arr in (self.volumes, self.h, self.facet_measures, self.normals,
                    self.facet_cells, self.inradii, self.shape_ratios):
            arr.setflags(write=False)


def element_patch(mesh: SimplicialComplex, K: int) -> set:
    """Cells sharing at least one vertex with cell K (K included)."""
    if not 0 <= K < mesh.n_cells:
        raise MeshError(f"invalid cell id {K}")
    verts = set(mesh.cells[K])
    hit = np.isin(mesh.cells, list(verts)).any(axis=1)
    return set(np.nonzero(hit)[0].tolist())


def vertex_to_cells(mesh: SimplicialComplex):
    """List of incident cell ids per vertex."""
    out = [[] for _ in range(mesh.n_vertices)]
    for c, cell in enumerate(mesh.cells):
        for v in cell:
            out[v].append(c)
    return out


# ---------------------------------------------------------------------------
# generators

def _mesh_from_unit_squares(squares, res):
    """Triangulate a union of unit squares, each split into a res x res grid.

    Every small square is cut along its lower-left -> upper-right diagonal;
    cells are stored with the diagonal as their first two vertices so that
    newest-vertex bisection starts from the longest edge.
    """
    idx = {}
    coords = []

    def vid(ix, iy):
        key = (ix, iy)
        if key not in idx:
            idx[key] = len(coords)
            coords.append((ix / res, iy / res))
        return idx[key]

    cells = []
    for (a, b) in squares:
        for i in range(res):
            for j in range(res):
                x0, y0 = a * res + i, b * res + j
                v00 = vid(x0, y0)
                v10 = vid(x0 + 1, y0)
                v01 = vid(x0, y0 + 1)
                v11 = vid(x0 + 1, y0 + 1)
                cells.append((v00, v11, v10))
                cells.append((v00, v11, v01))
    return build_complex(cells, coords)


_KUHN_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def _mesh_from_unit_cubes(cubes, res):
    """Kuhn triangulation (6 tets per small cube) of a union of unit cubes."""
    idx = {}
    coords = []

    def vid(ix, iy, iz):
        key = (ix, iy, iz)
        if key not in idx:
            idx[key] = len(coords)
            coords.append((ix / res, iy / res, iz / res))
        return idx[key]

    cells = []
    for (a, b, c) in cubes:
        for i in range(res):
            for j in range(res):
                for k in range(res):
                    o = np.array([a * res + i, b * res + j, c * res + k])
                    for perm in _KUHN_PERMS:
                        p = [o.copy()]
                        for ax in perm:
                            q = p[-1].copy()
                            q[ax] += 1
                            p.append(q)
                        cells.append(tuple(vid(*pt) for pt in p))
    return build_complex(cells, coords)


def generate(domain_name: str, resolution: int) -> SimplicialComplex:
    """Generate a conforming mesh of a named polyhedral domain.

    square            [0,1]^2
    l_shape           [0,2]^2 minus the open square (1,2)^2
    square_annulus    [0,3]^2 minus the open square (1,2)^2
    cube              [0,1]^3
    cube_with_tunnel  [0,3]^3 minus the open prism (1,2)^2 x (0,3)
    """
    if resolution < 1:
        raise MeshError("resolution must be >= 1")
    r = int(resolution)
    if domain_name == "square":
        return _mesh_from_unit_squares([(0, 0)], r)
    if domain_name == "l_shape":
        return _mesh_from_unit_squares([(0, 0), (1, 0), (0, 1)], r)
    if domain_name == "square_annulus":
        squares = [(a, b) for a in range(3) for b in range(3) if (a, b) != (1, 1)]
        return _mesh_from_unit_squares(squares, r)
    if domain_name == "cube":
        return _mesh_from_unit_cubes([(0, 0, 0)], r)
    if domain_name == "cube_with_tunnel":
        cubes = [(a, b, c) for a in range(3) for b in range(3) for c in range(3)
                 if not (a == 1 and b == 1)]
        return _mesh_from_unit_cubes(cubes, r)
    raise MeshError(f"unknown domain name {domain_name!r}; "
                    f"choose one of {', '.join(GENERATORS)}")


# ---------------------------------------------------------------------------
# refinement

def _edge_midpoints(mesh):
    """New vertex table: one midpoint per edge, id = n_vertices + edge id."""
    edges = mesh.faces[1]
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    return np.vstack([mesh.vertices, mids])


def refine_uniform(mesh: SimplicialComplex) -> SimplicialComplex:
    """Red refinement: 4 congruent children per triangle, 8 per tetrahedron
    (Bey's rule with the fixed m02-m13 octahedron diagonal)."""
    coords = _edge_midpoints(mesh)
    nv = mesh.n_vertices
    eid = {tuple(e): nv + i for i, e in enumerate(mesh.faces[1])}

    def mid(a, b):
        return eid[(a, b) if a < b else (b, a)]

    new_cells = []
    parents = []
    if mesh.dim == 2:
        for c, (v0, v1, v2) in enumerate(mesh.cells):
            m01, m12, m02 = mid(v0, v1), mid(v1, v2), mid(v0, v2)
            new_cells += [(v0, m01, m02), (m01, v1, m12),
                          (m02, m12, v2), (m01, m12, m02)]
            parents += [c] * 4
    else:
        for c, (v0, v1, v2, v3) in enumerate(mesh.cells):
            m01, m02, m03 = mid(v0, v1), mid(v0, v2), mid(v0, v3)
            m12, m13, m23 = mid(v1, v2), mid(v1, v3), mid(v2, v3)
            new_cells += [
                (v0, m01, m02, m03), (m01, v1, m12, m13),
                (m02, m12, v2, m23), (m03, m13, m23, v3),
                (m01, m02, m03, m13), (m01, m02, m12, m13),
                (m02, m03, m13, m23), (m02, m12, m13, m23),
            ]
            parents += [c] * 8
    out = build_complex(new_cells, coords)
    out.parent_cells = np.asarray(parents, dtype=np.int64)
    out.parent_cells.setflags(write=False)
    return out


def refine_bisect(mesh: SimplicialComplex, marked) -> SimplicialComplex:
    """Newest-vertex bisection of the marked triangles with conformity closure.

    The refinement edge of a triangle is the edge formed by its first two
    stored vertices; generated meshes start with the longest edge there and
    the rule is maintained across bisections.
    """
    if mesh.dim != 2:
        raise UnsupportedOperationError("adaptive bisection is 2-D only")
    marked = set(int(m) for m in marked)
    if not marked:
        raise MeshError("marked set must be non-empty")
    if any(m < 0 or m >= mesh.n_cells for m in marked):
        raise MeshError("marked cell id out of range")

    edges = mesh.faces[1]
    eidx = {tuple(e): i for i, e in enumerate(edges)}

    def eid(a, b):
        return eidx[(a, b) if a < b else (b, a)]

    cell_edges = np.empty((mesh.n_cells, 3), dtype=np.int64)
    for c, (v0, v1, v2) in enumerate(mesh.cells):
        cell_edges[c] = [eid(v0, v1), eid(v1, v2), eid(v0, v2)]

    # closure: a cell with any marked edge must also bisect its refinement edge
    want = np.zeros(edges.shape[0], dtype=bool)
    for c in marked:
        want[cell_edges[c, 0]] = True
    changed = True
    while changed:
        changed = False
        hit = want[cell_edges].any(axis=1) & ~want[cell_edges[:, 0]]
        if np.any(hit):
            want[cell_edges[hit, 0]] = True
            changed = True

    nv = mesh.n_vertices
    coords = _edge_midpoints(mesh)
    used = np.zeros(coords.shape[0], dtype=bool)
    used[:nv] = True

    def mid(a, b):
        m = nv + eid(a, b)
        used[m] = True
        return m

    new_cells = []
    parents = []

    def bisect(tri, c, depth):
        v0, v1, v2 = tri
        e_ref = eid(v0, v1)
        if not want[e_ref]:
            new_cells.append(tri)
            parents.append(c)
            return
        m = mid(v0, v1)
        for child in ((v2, v0, m), (v1, v2, m)):
            if depth == 0 and (want[eid(child[0], child[1])]):
                bisect(child, c, depth + 1)
            else:
                new_cells.append(child)
                parents.append(c)

    for c, tri in enumerate(mesh.cells):
        bisect(tuple(tri), c, 0)

    keep = np.nonzero(used)[0]
    remap = -np.ones(coords.shape[0], dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    out = build_complex([[remap[v] for v in tri] for tri in new_cells], coords[keep])
    out.parent_cells = np.asarray(parents, dtype=np.int64)
    out.parent_cells.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# file I/O

def write_mesh(mesh: SimplicialComplex, path):
    """Write the ASCII mesh format (17 significant digits)."""
    with open(path, "w") as fh:
        fh.write(f"feecmesh 1 {mesh.dim}\n")
        fh.write(f"vertices {mesh.n_vertices}\n")
        for v in mesh.vertices:
            fh.write(" ".join(f"{x:.17g}" for x in v) + "\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for c in mesh.cells:
            fh.write(" ".join(str(int(x)) for x in c) + "\n")


def read_mesh(path) -> SimplicialComplex:
    """Read the ASCII mesh format written by write_mesh."""
    with open(path) as fh:
        lines = fh.read().splitlines()

    def tokens(i, what):
        if i >= len(lines):
            raise MeshParseError(f"unexpected end of file: missing {what}", line=i + 1)
        return lines[i].split()

    head = tokens(0, "header")
    if len(head) != 3 or head[0] != "feecmesh" or head[1] != "1":
        raise MeshParseError("expected header 'feecmesh 1 <dim>'", line=1)
    try:
        dim = int(head[2])
    except ValueError:
        raise MeshParseError(f"bad dimension {head[2]!r}", line=1) from None
    if dim not in (2, 3):
        raise MeshParseError(f"unsupported dimension {dim} (only 2 and 3)", line=1)

    sec = tokens(1, "vertices section")
    if len(sec) != 2 or sec[0] != "vertices":
        raise MeshParseError("expected 'vertices <N>'", line=2)
    nv = int(sec[1])
    coords = np.empty((nv, dim))
    for i in range(nv):
        t = tokens(2 + i, f"vertex {i}")
        if len(t) != dim:
            raise MeshParseError(f"expected {dim} coordinates", line=3 + i)
        try:
            coords[i] = [float(x) for x in t]
        except ValueError:
            raise MeshParseError("bad coordinate", line=3 + i) from None

    row = 2 + nv
    sec = tokens(row, "cells section")
    if len(sec) != 2 or sec[0] != "cells":
        raise MeshParseError("expected 'cells <M>'", line=row + 1)
    nc = int(sec[1])
    cells = np.empty((nc, dim + 1), dtype=np.int64)
    for i in range(nc):
        t = tokens(row + 1 + i, f"cell {i}")
        if len(t) != dim + 1:
            raise MeshParseError(f"expected {dim + 1} vertex ids", line=row + 2 + i)
        try:
            cells[i] = [int(x) for x in t]
        except ValueError:
            raise MeshParseError("bad vertex id", line=row + 2 + i) from None
    return build_complex(cells, coords)
