"""Global lowest-order finite element de Rham complex.

Degree-k cochain spaces carry one degree of freedom per k-subsimplex (Whitney
forms); essential spaces drop every boundary k-subsimplex, which makes
vanishing boundary traces and zero boundary jump terms structural.  The
exterior derivative is the signed incidence matrix between face tables, and
all global orientations derive from increasing vertex ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial

import numpy as np
import scipy.sparse as sp

from .errors import FormDegreeError
from .exterior import axis_tuples, interior_product_terms, n_components
from .forms import PolyForm, whitney_basis
from .mesh import SimplicialComplex, _row_ids
from .quadrature import simplex_rule


@dataclass(frozen=True)
class CochainSpace:
    """Degree-k finite element space over a mesh, natural or essential flavor."""
    mesh: SimplicialComplex
    k: int
    bc: str
    dof_of_face: np.ndarray     # (n_faces_k,) dof index or -1 when excluded
    face_of_dof: np.ndarray     # (ndof,) face ids

    @property
    def ndof(self) -> int:
        return self.face_of_dof.shape[0]

    def __repr__(self):
        return (f"CochainSpace(k={self.k}, bc={self.bc!r}, "
                f"ndof={self.ndof})")


@dataclass
class CochainVec:
    space: CochainSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.ndof,):
            raise ValueError("coefficient vector length does not match space")


@dataclass(frozen=True)
class SparseOperator:
    row_space: CochainSpace
    col_space: CochainSpace
    matrix: sp.csr_matrix


def make_space(mesh: SimplicialComplex, k: int, bc: str = "natural") -> CochainSpace:
    if not 0 <= k <= mesh.dim:
        raise FormDegreeError(f"cochain degree {k} invalid in dimension {mesh.dim}")
    if bc not in ("natural", "essential"):
        raise ValueError(f"unknown boundary condition flavor {bc!r}")
    nfaces = mesh.n_faces(k)
    keep = np.ones(nfaces, dtype=bool)
    if bc == "essential":
        keep = ~mesh.boundary[k]
    face_of_dof = np.nonzero(keep)[0]
    dof_of_face = -np.ones(nfaces, dtype=np.int64)
    dof_of_face[face_of_dof] = np.arange(face_of_dof.size)
    dof_of_face.setflags(write=False)
    face_of_dof.setflags(write=False)
    return CochainSpace(mesh, k, bc, dof_of_face, face_of_dof)


# ---------------------------------------------------------------------------
# vectorized Whitney tables (shared by assembly and the estimators)

def _batched_wedge_dets(G: np.ndarray, rows, cols_k: int):
    """det of G[:, rows, :][:, :, I] for every increasing cols_k-subset I.

    G is (nc, n+1, n); rows is a tuple of cols_k local vertex indices.
    Returns (nc, C(n, cols_k)).
    """
    nc, _, n = G.shape
    if cols_k == 0:
        return np.ones((nc, 1))
    out = np.empty((nc, n_components(n, cols_k)))
    sub = G[:, rows, :]
    for i, I in enumerate(axis_tuples(n, cols_k)):
        out[:, i] = np.linalg.det(sub[:, :, I])
    return out


class WhitneyTables:
    """Per-mesh, per-degree vectorized Whitney form data.

    Local dofs follow the lexicographic (k+1)-subsets of each cell's sorted
    vertex tuple, matching mesh.cell_faces[k] column order.
    """

    def __init__(self, mesh: SimplicialComplex, k: int):
        self.mesh = mesh
        self.k = k
        n = mesh.dim
        V = mesh.vertices
        C = np.sort(mesh.cells, axis=1)
        self.sorted_cells = C
        P = V[C]                                   # (nc, n+1, n)
        A = np.concatenate([np.ones((C.shape[0], n + 1, 1)), P], axis=2)
        Cinv = np.linalg.inv(A)                    # rows: 1/x, cols: lambda_j
        self.bary_const = Cinv[:, 0, :]            # (nc, n+1)
        self.grads = np.transpose(Cinv[:, 1:, :], (0, 2, 1))  # (nc, n+1, n)
        self.vols = np.abs(np.linalg.det(P[:, 1:] - P[:, :1])) / factorial(n)

        self.subsets = list(combinations(range(n + 1), k + 1))
        # wedge dets of k gradients, for every k-subset of local vertices
        self._wedge_k = {S: _batched_wedge_dets(self.grads, S, k)
                         for S in combinations(range(n + 1), k)}

    def barycentric(self, X: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of points X[i] w.r.t. cells[i]: (m, n+1)."""
        return (self.bary_const[cells] +
                np.einsum("cjd,cd->cj", self.grads[cells], X))

    def values_at_bary(self, lam: np.ndarray) -> np.ndarray:
        """Whitney values at shared barycentric points lam (q, n+1).

        Returns (nc, ndof_loc, ncomp, q).
        """
        n = self.mesh.dim
        k = self.k
        nc = self.sorted_cells.shape[0]
        q = lam.shape[0]
        out = np.zeros((nc, len(self.subsets), n_components(n, k), q))
        fact = factorial(k)
        for a, rho in enumerate(self.subsets):
            for j in range(k + 1):
                S = rho[:j] + rho[j + 1:]
                out[:, a] += ((-1) ** j * fact) * np.einsum(
                    "ci,q->ciq", self._wedge_k[S], lam[:, rho[j]])
        return out

    def values_at_points(self, cells: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Whitney values at per-row points: cells (m,), X (m, q, n).

        Returns (m, ndof_loc, ncomp, q).
        """
        n = self.mesh.dim
        k = self.k
        m, q = X.shape[0], X.shape[1]
        lam = (self.bary_const[cells][:, None, :] +
               np.einsum("cjd,cqd->cqj", self.grads[cells], X))
        out = np.zeros((m, len(self.subsets), n_components(n, k), q))
        fact = factorial(k)
        for a, rho in enumerate(self.subsets):
            for j in range(k + 1):
                S = rho[:j] + rho[j + 1:]
                out[:, a] += ((-1) ** j * fact) * np.einsum(
                    "ci,cq->ciq", self._wedge_k[S][cells], lam[:, :, rho[j]])
        return out

    def d_constants(self) -> np.ndarray:
        """Constant components of d(w_rho): (nc, ndof_loc, C(n, k+1))."""
        n, k = self.mesh.dim, self.k
        if k >= n:
            raise FormDegreeError("d of top-degree Whitney forms")
        nc = self.sorted_cells.shape[0]
        out = np.empty((nc, len(self.subsets), n_components(n, k + 1)))
        for a, rho in enumerate(self.subsets):
            out[:, a] = factorial(k + 1) * _batched_wedge_dets(self.grads, rho, k + 1)
        return out

    def delta_constants(self) -> np.ndarray:
        """Constant components of delta(w_rho): (nc, ndof_loc, C(n, k-1)).

        delta of a lowest-order Whitney form is constant, via the identity
        delta(f * omega_const) = -iota_{grad f} omega_const; the PolyForm
        codifferential cross-checks this in the test suite.
        """
        n, k = self.mesh.dim, self.k
        if k == 0:
            raise FormDegreeError("codifferential of 0-forms")
        nc = self.sorted_cells.shape[0]
        const = np.zeros((nc, len(self.subsets), n_components(n, k - 1)))
        terms = interior_product_terms(n, k)
        fact = factorial(k)
        for a, rho in enumerate(self.subsets):
            for j in range(k + 1):
                S = rho[:j] + rho[j + 1:]
                wj = self._wedge_k[S]
                g = self.grads[:, rho[j], :]
                sgn = (-1) ** j * fact
                for (out_i, axis, in_i, s) in terms:
                    const[:, a, out_i] += -s * sgn * g[:, axis] * wj[:, in_i]
        return const


_tables_cache: dict = {}


def whitney_tables(mesh: SimplicialComplex, k: int) -> WhitneyTables:
    key = (id(mesh), k)
    tab = _tables_cache.get(key)
    if tab is None or tab.mesh is not mesh:
        tab = WhitneyTables(mesh, k)
        _tables_cache[key] = tab
    return tab


# ---------------------------------------------------------------------------
# operators

def d_matrix(space: CochainSpace) -> SparseOperator:
    """Exterior derivative V_h^k -> V_h^{k+1}: the signed incidence matrix of
    the face lattice under the increasing-vertex-id orientation."""
    mesh, k = space.mesh, space.k
    if k >= mesh.dim:
        raise FormDegreeError("d of the top-degree space")
    row_space = make_space(mesh, k + 1, space.bc)
    hi = mesh.faces[k + 1]
    cols = list(combinations(range(k + 2), k + 1))
    subs = hi[:, cols].reshape(-1, k + 1)
    sub_ids = _row_ids(mesh.faces[k], subs).reshape(hi.shape[0], k + 2)
    # omitting sorted position j flips sign by (-1)^j; subset at column
    # position a omits position (k+1-a) in lexicographic subset order
    signs = np.array([(-1) ** (k + 1 - a) for a in range(k + 2)], dtype=float)

    rows = np.repeat(row_space.dof_of_face, k + 2)
    colv = space.dof_of_face[sub_ids].ravel()
    vals = np.tile(signs, hi.shape[0])
    keep = (rows >= 0) & (colv >= 0)
    mat = sp.coo_matrix((vals[keep], (rows[keep], colv[keep])),
                        shape=(row_space.ndof, space.ndof)).tocsr()
    return SparseOperator(row_space, space, mat)


def _local_dof_ids(space: CochainSpace):
    """Global dof index per (cell, local subset): (nc, ndof_loc), -1 excluded."""
    return space.dof_of_face[space.mesh.cell_faces[space.k]]


def mass_matrix(space: CochainSpace) -> SparseOperator:
    """L2 Gram matrix of the global Whitney basis."""
    mesh, k = space.mesh, space.k
    tab = whitney_tables(mesh, k)
    pts, wts = simplex_rule(mesh.dim)
    lam0 = 1.0 - pts.sum(axis=1, keepdims=True)
    lam = np.hstack([lam0, pts])
    W = tab.values_at_bary(lam)                       # (nc, nl, ncomp, q)
    scale = factorial(mesh.dim) * tab.vols            # (nc,)
    local = np.einsum("caiq,cbiq,q,c->cab", W, W, wts, scale)

    dofs = _local_dof_ids(space)                      # (nc, nl)
    nl = dofs.shape[1]
    rows = np.repeat(dofs, nl, axis=1).ravel()
    colv = np.tile(dofs, (1, nl)).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (colv >= 0)
    mat = sp.coo_matrix((vals[keep], (rows[keep], colv[keep])),
                        shape=(space.ndof, space.ndof)).tocsr()
    return SparseOperator(space, space, mat)


def load_vector(space: CochainSpace, field) -> np.ndarray:
    """Element-wise quadrature of <f, w_i> for an analytic k-form field."""
    mesh, k = space.mesh, space.k
    tab = whitney_tables(mesh, k)
    pts, wts = simplex_rule(mesh.dim)
    lam = np.hstack([1.0 - pts.sum(axis=1, keepdims=True), pts])
    X = np.einsum("qj,cjd->cqd", lam, mesh.vertices[tab.sorted_cells])
    F = field(X.reshape(-1, mesh.dim)).reshape(X.shape[0], lam.shape[0], -1)
    W = tab.values_at_bary(lam)
    scale = factorial(mesh.dim) * tab.vols
    local = np.einsum("caiq,cqi,q,c->ca", W, F, wts, scale)

    out = np.zeros(space.ndof)
    dofs = _local_dof_ids(space)
    np.add.at(out, dofs[dofs >= 0], local[dofs >= 0])
    return out


def canonical_interpolate(space: CochainSpace, field) -> CochainVec:
    """Canonical interpolation: dof i = integral of the trace of the analytic
    form over the i-th k-subsimplex (in increasing-vertex orientation)."""
    mesh, k = space.mesh, space.k
    faces = mesh.faces[k][space.face_of_dof]
    S = mesh.vertices[faces]                          # (nf, k+1, n)
    pts, wts = simplex_rule(k)
    lam = np.hstack([1.0 - pts.sum(axis=1, keepdims=True), pts])
    X = np.einsum("qj,fjd->fqd", lam, S)
    vals = field(X.reshape(-1, mesh.dim)).reshape(S.shape[0], lam.shape[0], -1)
    if k == 0:
        return CochainVec(space, vals[:, 0, 0])
    T = np.transpose(S[:, 1:] - S[:, :1], (0, 2, 1))  # (nf, n, k)
    dets = np.stack([np.linalg.det(T[:, I, :])
                     for I in axis_tuples(mesh.dim, k)], axis=1)
    return CochainVec(space, np.einsum("q,fqi,fi->f", wts, vals, dets))


def reconstruct(space: CochainSpace, vec, K: int) -> PolyForm:
    """Element-local reconstruction sum_i v_i w_i on cell K (exact PolyForm)."""
    values = vec.values if isinstance(vec, CochainVec) else np.asarray(vec)
    mesh, k = space.mesh, space.k
    verts = np.sort(mesh.cells[K])
    basis = whitney_basis(mesh.vertices[verts], k)
    dofs = _local_dof_ids(space)[K]
    out = PolyForm.zero(mesh.dim, k)
    for b, dof in zip(basis, dofs):
        if dof >= 0 and values[dof] != 0.0:
            out = out + values[dof] * b
    return out


def evaluate_cochain(space: CochainSpace, values: np.ndarray, cells: np.ndarray,
                     X: np.ndarray) -> np.ndarray:
    """Sampled components of the reconstruction: cells (m,), X (m, q, n) ->
    (m, q, ncomp)."""
    tab = whitney_tables(space.mesh, space.k)
    W = tab.values_at_points(cells, X)                 # (m, nl, ncomp, q)
    dofs = _local_dof_ids(space)[cells]
    coeff = np.where(dofs >= 0, values[np.maximum(dofs, 0)], 0.0)
    return np.einsum("ma,maiq->mqi", coeff, W)
