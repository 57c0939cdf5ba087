"""Discrete harmonic forms, Hodge decomposition, subspace gaps, and the mixed
Hodge Laplacian solver.

The harmonic space of degree k is ker(D^k) intersected with the M_k-orthogonal
complement of range(D^{k-1}).  Its dimension equals the Betti numbers of the
domain for natural boundary conditions and the dual pattern for essential
ones.  The mixed saddle-point system follows the discrete weak form with the
first block row negated, which makes the matrix symmetric indefinite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .derham import (CochainSpace, CochainVec, d_matrix, load_vector,
                     make_space, mass_matrix)
from .errors import RankAmbiguityError, SolverError

RANK_TOL = 1e-9
DENSE_NULLSPACE_LIMIT = 6000
DENSE_SOLVE_LIMIT = 2000


@dataclass(frozen=True)
class HarmonicBasis:
    """M_k-orthonormal basis of the discrete harmonic space."""
    space: CochainSpace
    vectors: np.ndarray          # (ndof, M)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class MixedSolution:
    """Solution triple of the discrete mixed Hodge Laplacian."""
    k: int
    bc: str
    sigma: CochainVec | None
    u: CochainVec
    p: np.ndarray                # coefficients over the harmonic basis
    harmonic: HarmonicBasis
    residual: float
    system_size: int

    def p_cochain(self) -> CochainVec:
        return CochainVec(self.u.space, self.harmonic.vectors @ self.p)


@dataclass
class HodgeParts:
    """M_k-orthogonal splitting of a cochain into exact, harmonic, and
    kernel-complement parts."""
    b_part: np.ndarray
    h_part: np.ndarray
    zperp_part: np.ndarray


class SpaceOperators:
    """Assembled operators for one (mesh, k, bc) triple."""

    def __init__(self, mesh, k: int, bc: str):
        self.mesh = mesh
        self.k = k
        self.bc = bc
        self.space = make_space(mesh, k, bc)
        self.mass = mass_matrix(self.space).matrix
        self.space_dn = make_space(mesh, k - 1, bc) if k > 0 else None
        self.d_dn = d_matrix(self.space_dn).matrix if k > 0 else None
        self.mass_dn = mass_matrix(self.space_dn).matrix if k > 0 else None
        self.d_up = d_matrix(self.space).matrix if k < mesh.dim else None
        self.mass_up = (mass_matrix(make_space(mesh, k + 1, bc)).matrix
                        if k < mesh.dim else None)


def _deterministic_signs(Q: np.ndarray) -> np.ndarray:
    """Flip column signs so the entry of largest magnitude is positive."""
    if Q.size == 0:
        return Q
    idx = np.argmax(np.abs(Q), axis=0)
    s = np.sign(Q[idx, np.arange(Q.shape[1])])
    s[s == 0] = 1.0
    return Q * s


def _m_orthonormalize(Q: np.ndarray, M: sp.spmatrix) -> np.ndarray:
    if Q.shape[1] == 0:
        return Q
    G = Q.T @ (M @ Q)
    R = np.linalg.cholesky(G)
    return _deterministic_signs(Q @ np.linalg.inv(R).T)


def harmonic_basis(ops: SpaceOperators, rank_tol: float = RANK_TOL) -> HarmonicBasis:
    """M_k-orthonormal basis of ker D^k  intersect  (range D^{k-1})^perp_M.

    Uses a dense SVD of the stacked constraint matrix at moderate size and a
    sparse shift-invert eigensolver on its normal matrix beyond that.  Raises
    RankAmbiguityError when singular values fall within a factor 10 of the
    rank cutoff on either side.
    """
    ndof = ops.space.ndof
    blocks = []
    if ops.d_up is not None:
        blocks.append(ops.d_up)
    if ops.d_dn is not None:
        blocks.append((ops.d_dn.T @ ops.mass).tocsr())
    if not blocks:
        raise SolverError("no constraints: mesh dimension 0?")
    S = sp.vstack(blocks).tocsr()

    if ndof <= DENSE_NULLSPACE_LIMIT:
        dense = S.toarray()
        svals = sla.svd(dense, compute_uv=False)
        smax = svals[0] if svals.size else 0.0
        cut = rank_tol * max(smax, 1.0)
        _guard_ambiguity(svals, cut)
        null_dim = int(np.sum(svals < cut)) + max(ndof - len(svals), 0)
        if null_dim == 0:
            Q = np.zeros((ndof, 0))
        else:
            _, _, Vt = sla.svd(dense, full_matrices=True)
            Q = Vt[ndof - null_dim:, :].T
    else:
        A = (S.T @ S).tocsc()
        smax = float(np.sqrt(spla.eigsh(A, k=1, which="LM",
                                        return_eigenvectors=False,
                                        v0=np.ones(ndof))[0]))
        cut = rank_tol * max(smax, 1.0)
        guess = 8
        while True:
            shift = -(cut ** 2)
            vals, vecs = spla.eigsh(A, k=min(guess, ndof - 1), sigma=shift,
                                    which="LM", v0=np.ones(ndof))
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
            svals = np.sqrt(np.maximum(vals, 0.0))
            if svals[-1] >= cut or guess >= ndof - 1:
                break
            guess *= 2
        _guard_ambiguity(svals, cut)
        Q = vecs[:, svals < cut]
    return HarmonicBasis(ops.space, _m_orthonormalize(Q, ops.mass))


def _guard_ambiguity(svals, cut):
    s = np.asarray(svals)
    amb = s[(s > cut / 10.0) & (s < cut * 10.0)]
    if amb.size:
        raise RankAmbiguityError(
            f"singular values {amb} lie within 10x of the rank cutoff {cut:g}; "
            "tighten the tolerance or inspect both candidate dimensions")


def rank_based_harmonic_dim(ops: SpaceOperators, rank_tol: float = RANK_TOL) -> int:
    """Independent oracle: ndof - rank(D^k) - rank(D^{k-1})."""
    ndof = ops.space.ndof
    r = 0
    for D in (ops.d_up, ops.d_dn):
        if D is not None and min(D.shape) > 0:
            svals = sla.svd(D.toarray(), compute_uv=False)
            r += int(np.sum(svals > rank_tol * max(svals[0], 1.0)))
    return ndof - r


# ---------------------------------------------------------------------------
# mixed solver

def _solve_symmetric(A: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    if n < DENSE_SOLVE_LIMIT:
        try:
            lu, piv = sla.lu_factor(A.toarray())
            return sla.lu_solve((lu, piv), rhs)
        except (sla.LinAlgError, ValueError) as exc:
            raise SolverError(f"dense factorization failed: {exc}") from exc
    try:
        return spla.splu(A.tocsc()).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc


def solve_hodge_laplacian(mesh, k: int, bc: str, f, ops: SpaceOperators | None = None,
                          harmonic: HarmonicBasis | None = None) -> MixedSolution:
    """Solve the discrete mixed system for the degree-k Hodge Laplacian.

        <sigma, tau> - <d tau, u)            = 0
        <d sigma, v> + <du, dv> + <v, p>     = <f, v>
        <u, q>                               = 0

    The sigma block is omitted for k = 0 and the <du, dv> block for k = n.
    The assembled matrix is symmetrized by negating the first block row and
    must reach a relative algebraic residual of 1e-10.
    """
    ops = ops or SpaceOperators(mesh, k, bc)
    harmonic = harmonic or harmonic_basis(ops)
    Q = harmonic.vectors
    M = ops.mass
    n_u = ops.space.ndof
    n_s = ops.space_dn.ndof if k > 0 else 0
    n_p = Q.shape[1]

    b_u = load_vector(ops.space, f)

    MQ = M @ Q if n_p else np.zeros((n_u, 0))
    stiff = (ops.d_up.T @ ops.mass_up @ ops.d_up).tocsr() if ops.d_up is not None \
        else sp.csr_matrix((n_u, n_u))
    if k > 0:
        B = (M @ ops.d_dn).tocsr()          # <d sigma, v> pairing, (n_u, n_s)
        A = sp.bmat([[-ops.mass_dn, B.T, sp.csr_matrix((n_s, n_p))],
                     [B, stiff, sp.csr_matrix(MQ)],
                     [sp.csr_matrix((n_p, n_s)), sp.csr_matrix(MQ.T),
                      sp.csr_matrix((n_p, n_p))]], format="csr")
        rhs = np.concatenate([np.zeros(n_s), b_u, np.zeros(n_p)])
    else:
        A = sp.bmat([[stiff, sp.csr_matrix(MQ)],
                     [sp.csr_matrix(MQ.T), sp.csr_matrix((n_p, n_p))]],
                    format="csr")
        rhs = np.concatenate([b_u, np.zeros(n_p)])

    x = _solve_symmetric(A, rhs)

    sigma = x[:n_s]
    u = x[n_s:n_s + n_u]
    p = x[n_s + n_u:]

    scale = max(np.linalg.norm(b_u), 1e-300)
    res = [stiff @ u + (MQ @ p if n_p else 0.0) - b_u]
    if k > 0:
        res[0] = res[0] + B @ sigma
        res.append(ops.mass_dn @ sigma - B.T @ u)
    if n_p:
        res.append(MQ.T @ u)
    rel = float(np.sqrt(sum(np.dot(r, r) for r in res)) / scale)
    if rel > 1e-10:
        raise SolverError(
            f"mixed solve residual {rel:.3e} exceeds 1e-10 "
            "(possible harmonic-space mis-dimension)")

    return MixedSolution(
        k=k, bc=bc,
        sigma=CochainVec(ops.space_dn, sigma) if k > 0 else None,
        u=CochainVec(ops.space, u), p=p, harmonic=harmonic,
        residual=rel, system_size=A.shape[0])


# ---------------------------------------------------------------------------
# Hodge decomposition of a cochain

def hodge_decompose(ops: SpaceOperators, harmonic: HarmonicBasis,
                    v: np.ndarray) -> HodgeParts:
    """Split v into exact, harmonic, and kernel-complement parts (M_k-orthogonal)."""
    v = np.asarray(v, dtype=float)
    M = ops.mass
    Q = harmonic.vectors
    h = Q @ (Q.T @ (M @ v)) if Q.shape[1] else np.zeros_like(v)
    if ops.d_dn is None:
        b = np.zeros_like(v)
    else:
        D = ops.d_dn
        N = (D.T @ M @ D).tocsr()
        rhs = D.T @ (M @ v)
        phi = _solve_consistent_spsd(N, rhs)
        b = D @ phi
    return HodgeParts(b_part=b, h_part=h, zperp_part=v - b - h)


def _solve_consistent_spsd(N: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Minimum-residual solve of a consistent symmetric PSD system."""
    if N.shape[0] == 0:
        return np.zeros(0)
    if N.shape[0] < DENSE_SOLVE_LIMIT:
        sol, *_ = np.linalg.lstsq(N.toarray(), rhs, rcond=None)
        return sol
    sol, info = spla.minres(N, rhs, rtol=1e-13, maxiter=20 * N.shape[0])
    if info != 0:
        raise SolverError(f"minres did not converge (info={info})")
    return sol


# ---------------------------------------------------------------------------
# subspace gaps

def _orthonormalize_cols(A: np.ndarray, M) -> np.ndarray:
    G = A.T @ (M @ A) if M is not None else A.T @ A
    try:
        R = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise SolverError("rank-deficient basis matrix in subspace_gap") from None
    return A @ np.linalg.inv(R).T


def subspace_gap(A: np.ndarray, B: np.ndarray, M=None):
    """One-sided deviations and gap between the column spans of A and B.

    delta(A, B) = sup_{x in A, |x|_M = 1} dist_M(x, B); by the equal-dimension
    lemma the two deviations coincide when dim A = dim B.
    Returns (delta_ab, delta_ba, gap).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    QA = _orthonormalize_cols(A, M)
    QB = _orthonormalize_cols(B, M)

    def one_sided(X, Y):
        if X.shape[1] == 0:
            return 0.0
        if Y.shape[1] < X.shape[1]:
            return 1.0
        C = Y.T @ (M @ X) if M is not None else Y.T @ X
        svals = np.linalg.svd(C, compute_uv=False)
        smin = svals[X.shape[1] - 1] if svals.size >= X.shape[1] else 0.0
        return float(np.sqrt(max(1.0 - min(smin, 1.0) ** 2, 0.0)))

    dab = one_sided(QA, QB)
    dba = one_sided(QB, QA)
    return dab, dba, max(dab, dba)
