"""Element-local polynomial differential forms on affine simplices.

Forms are stored against Cartesian monomials (total degree <= 2) and strictly
increasing axis tuples, so the Euclidean Hodge star and the codifferential are
constant sign/permutation operations.  At this polynomial degree every
derivative multiplier is a power of two, so d(d(omega)) and delta(delta(omega))
cancel exactly in floating point; the zero coefficients are pruned, making the
results identically the zero form.
"""

from __future__ import annotations

import numpy as np

from .errors import FormDegreeError
from .exterior import (axis_index, axis_tuples, merge_sign, n_components,
                       pullback_matrix, star_table)
from .quadrature import map_rule, simplex_rule

MAX_POLY_DEGREE = 2


def _mono_mul(e1: tuple, e2: tuple) -> tuple:
    return tuple(a + b for a, b in zip(e1, e2))


class PolyForm:
    """Polynomial differential k-form in n ambient dimensions.

    coeffs maps (monomial exponents, increasing axis tuple) -> coefficient.
    Instances are immutable; all operations return new forms.
    """

    __slots__ = ("n", "k", "coeffs")

    def __init__(self, n: int, k: int, coeffs=None):
        if not 0 <= k <= n:
            raise FormDegreeError(f"form degree {k} invalid in dimension {n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        clean = {}
        for (exps, axes), c in (coeffs or {}).items():
            if c == 0.0:
                continue
            if sum(exps) > MAX_POLY_DEGREE:
                raise FormDegreeError(
                    f"polynomial degree {sum(exps)} exceeds the supported cap "
                    f"{MAX_POLY_DEGREE}")
            if tuple(sorted(set(axes))) != tuple(axes):
                raise FormDegreeError(f"axis tuple {axes} not strictly increasing")
            clean[(tuple(exps), tuple(axes))] = float(c)
        object.__setattr__(self, "coeffs", clean)

    def __setattr__(self, *a):
        raise AttributeError("PolyForm is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n, k):
        return cls(n, k, {})

    @classmethod
    def constant(cls, n, axes, value=1.0):
        return cls(n, len(axes), {((0,) * n, tuple(axes)): value})

    @classmethod
    def scalar(cls, n, poly):
        """0-form from a dict exponents -> coefficient."""
        return cls(n, 0, {(e, ()): c for e, c in poly.items()})

    @classmethod
    def affine_scalar(cls, n, const, grad):
        coeffs = {((0,) * n, ()): const}
        for i, g in enumerate(grad):
            e = [0] * n
            e[i] = 1
            coeffs[(tuple(e), ())] = g
        return cls(n, 0, coeffs)

    @classmethod
    def volume(cls, n):
        return cls.constant(n, tuple(range(n)))

    # -- algebra ------------------------------------------------------------

    def _like(self, k, coeffs):
        return PolyForm(self.n, k, coeffs)

    def __add__(self, other):
        if (other.n, other.k) != (self.n, self.k):
            raise FormDegreeError("cannot add forms of different type")
        out = dict(self.coeffs)
        for key, c in other.coeffs.items():
            out[key] = out.get(key, 0.0) + c
        return self._like(self.k, out)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self._like(self.k, {key: -c for key, c in self.coeffs.items()})

    def __mul__(self, scalar):
        s = float(scalar)
        return self._like(self.k, {key: s * c for key, c in self.coeffs.items()})

    __rmul__ = __mul__

    def is_zero(self):
        return not self.coeffs

    @property
    def poly_degree(self):
        return max((sum(e) for (e, _) in self.coeffs), default=0)

    def d(self):
        """Exterior derivative."""
        if self.k >= self.n:
            raise FormDegreeError("d of a top-degree form")
        out = {}
        for (exps, axes), c in self.coeffs.items():
            for j, e in enumerate(exps):
                if e == 0:
                    continue
                s, merged = merge_sign((j,), axes)
                if s == 0:
                    continue
                de = list(exps)
                de[j] -= 1
                key = (tuple(de), merged)
                out[key] = out.get(key, 0.0) + s * c * e
        return self._like(self.k + 1, out)

    def star(self):
        """Euclidean Hodge star: omega wedge mu = <star omega, mu> vol."""
        table = star_table(self.n, self.k)
        idx = axis_index(self.n, self.k)
        out = {}
        for (exps, axes), c in self.coeffs.items():
            s, comp = table[idx[axes]]
            out[(exps, comp)] = s * c
        return self._like(self.n - self.k, out)

    def delta(self):
        """Codifferential, defined through star(delta w) = (-1)^k d(star w)."""
        if self.k == 0:
            raise FormDegreeError("codifferential of a 0-form")
        n, k = self.n, self.k
        sign = (-1) ** (k + (k - 1) * (n - k + 1))
        return sign * self.star().d().star()

    def wedge(self, other):
        if other.n != self.n:
            raise FormDegreeError("wedge of forms in different dimensions")
        if self.k + other.k > self.n:
            raise FormDegreeError("wedge degree exceeds ambient dimension")
        out = {}
        for (e1, a1), c1 in self.coeffs.items():
            for (e2, a2), c2 in other.coeffs.items():
                s, merged = merge_sign(a1, a2)
                if s == 0:
                    continue
                key = (_mono_mul(e1, e2), merged)
                out[key] = out.get(key, 0.0) + s * c1 * c2
        return PolyForm(self.n, self.k + other.k, out)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Component values at points (m, n) -> (m, C(n, k))."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        idx = axis_index(self.n, self.k)
        out = np.zeros((P.shape[0], n_components(self.n, self.k)))
        for (exps, axes), c in self.coeffs.items():
            mono = np.ones(P.shape[0])
            for j, e in enumerate(exps):
                if e:
                    mono = mono * P[:, j] ** e
            out[:, idx[axes]] += c * mono
        return out


# convenience wrappers matching the operation names

def d(omega: PolyForm) -> PolyForm:
    return omega.d()


def star(omega: PolyForm) -> PolyForm:
    return omega.star()


def codifferential(omega: PolyForm) -> PolyForm:
    return omega.delta()


def wedge(omega: PolyForm, mu: PolyForm) -> PolyForm:
    return omega.wedge(mu)


# ---------------------------------------------------------------------------
# integration on simplices

def inner_product(omega: PolyForm, mu: PolyForm, vertices) -> float:
    """L2 inner product over the simplex `vertices` ((n+1) x n)."""
    if (omega.n, omega.k) != (mu.n, mu.k):
        raise FormDegreeError("inner product of forms of different type")
    X, W = map_rule(np.asarray(vertices, dtype=float))
    a = omega.evaluate(X)
    b = mu.evaluate(X)
    return float(np.einsum("q,qi,qi->", W, a, b))


def norm_on_element(omega: PolyForm, vertices) -> float:
    return float(np.sqrt(max(inner_product(omega, omega, vertices), 0.0)))


# ---------------------------------------------------------------------------
# faces, frames, traces

def gram_schmidt_frame(face_vertices: np.ndarray, normal=None) -> np.ndarray:
    """Orthonormal frame of an (n-1)-face: Gram-Schmidt on the edge vectors,
    first edge first; the last axis is flipped, if needed, so that
    det [frame | normal] > 0."""
    F = np.asarray(face_vertices, dtype=float)
    E = F[1:] - F[0]
    cols = []
    for e in E:
        v = e.copy()
        for t in cols:
            v -= (v @ t) * t
        v /= np.linalg.norm(v)
        cols.append(v)
    T = np.stack(cols, axis=1)
    if normal is not None:
        if np.linalg.det(np.hstack([T, np.asarray(normal).reshape(-1, 1)])) < 0:
            T[:, -1] = -T[:, -1]
    return T


class FaceForm:
    """A polynomial form expressed in an orthonormal frame of an (n-1)-face."""

    __slots__ = ("form", "origin", "frame", "vertices_frame", "face_id")

    def __init__(self, form: PolyForm, origin, frame, vertices_frame, face_id=None):
        self.form = form
        self.origin = np.asarray(origin, dtype=float)
        self.frame = np.asarray(frame, dtype=float)
        self.vertices_frame = np.asarray(vertices_frame, dtype=float)
        self.face_id = face_id

    def d(self):
        return FaceForm(self.form.d(), self.origin, self.frame,
                        self.vertices_frame, self.face_id)

    def norm(self) -> float:
        return float(np.sqrt(max(inner_product_on_face(self, self), 0.0)))


def inner_product_on_face(phi: FaceForm, psi: FaceForm) -> float:
    X, W = map_rule(phi.vertices_frame)
    a = phi.form.evaluate(X)
    b = psi.form.evaluate(X)
    return float(np.einsum("q,qi,qi->", W, a, b))


def norm_on_face(phi: FaceForm) -> float:
    return phi.norm()


def _scalar_poly_mul(p: dict, q: dict) -> dict:
    out = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            key = _mono_mul(e1, e2)
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


def trace_to_face(omega: PolyForm, face_vertices, normal=None, frame=None,
                  face_id=None) -> FaceForm:
    """Pullback of omega under the inclusion of an (n-1)-face.

    The face frame defaults to the Gram-Schmidt frame oriented by `normal`;
    tests may pass any other orthonormal `frame` explicitly.
    """
    n, k = omega.n, omega.k
    if k > n - 1:
        raise FormDegreeError("trace of a top-degree form is not defined")
    F = np.asarray(face_vertices, dtype=float)
    origin = F[0]
    T = gram_schmidt_frame(F, normal) if frame is None else np.asarray(frame, float)

    m = n - 1
    # ambient coordinates as affine polynomials of the frame coordinates
    zero = (0,) * m
    unit = [tuple(1 if j == i else 0 for j in range(m)) for i in range(m)]
    coord_polys = []
    for i in range(n):
        p = {zero: origin[i]}
        for j in range(m):
            if T[i, j] != 0.0:
                p[unit[j]] = T[i, j]
        coord_polys.append(p)

    P = pullback_matrix(T, k)
    rows = axis_tuples(m, k)
    cols = axis_index(n, k)
    out = {}
    for (exps, axes), c in omega.coeffs.items():
        mono = {zero: 1.0}
        for i, e in enumerate(exps):
            for _ in range(e):
                mono = _scalar_poly_mul(mono, coord_polys[i])
        col = cols[axes]
        for a, J in enumerate(rows):
            w = P[a, col]
            if w == 0.0:
                continue
            for e, cm in mono.items():
                key = (e, J)
                out[key] = out.get(key, 0.0) + c * cm * w
    form = PolyForm(m, k, out)
    vertices_frame = (F - origin) @ T
    return FaceForm(form, origin, T, vertices_frame, face_id)


# ---------------------------------------------------------------------------
# Whitney forms

def barycentric_polys(vertices) -> list[PolyForm]:
    """Barycentric coordinates of a nondegenerate simplex as affine 0-forms."""
    V = np.asarray(vertices, dtype=float)
    n = V.shape[1]
    A = np.hstack([np.ones((n + 1, 1)), V])
    C = np.linalg.inv(A)          # column j = coefficients of lambda_j
    return [PolyForm.affine_scalar(n, C[0, j], C[1:, j]) for j in range(n + 1)]


def whitney_basis(vertices, k: int) -> list[PolyForm]:
    """Lowest-order Whitney k-forms of the simplex, one per (k+1)-subset of its
    vertices in lexicographic subset order (vertices taken as given).

    w_rho = k! sum_j (-1)^j lambda_rho(j) d lambda_rho(0) ^ ... omit j ... ^ d lambda_rho(k)
    """
    from itertools import combinations
    from math import factorial

    V = np.asarray(vertices, dtype=float)
    n = V.shape[1]
    if not 0 <= k <= n:
        raise FormDegreeError(f"Whitney degree {k} invalid in dimension {n}")
    lam = barycentric_polys(V)
    dlam = [l.d() for l in lam]
    basis = []
    for rho in combinations(range(n + 1), k + 1):
        acc = PolyForm.zero(n, k)
        for j in range(k + 1):
            term = lam[rho[j]]
            for i in range(k + 1):
                if i != j:
                    term = term.wedge(dlam[rho[i]])
            acc = acc + (-1) ** j * term
        basis.append(factorial(k) * acc)
    return basis


def dof_integral(values_fn, simplex_vertices) -> float:
    """Canonical degree of freedom: integral of the trace of a k-form over an
    oriented k-subsimplex given by its vertices in order.

    values_fn(X) returns (q, C(n, k)) component samples at points X.
    """
    S = np.asarray(simplex_vertices, dtype=float)
    k = S.shape[0] - 1
    n = S.shape[1]
    pts, wts = simplex_rule(k)
    lam0 = 1.0 - pts.sum(axis=1, keepdims=True)
    X = np.hstack([lam0, pts]) @ S
    vals = values_fn(X)
    if k == 0:
        return float(vals[0, 0])
    T = (S[1:] - S[0]).T            # columns = tangents
    dets = np.array([np.linalg.det(T[np.ix_(I, range(k))])
                     for I in axis_tuples(n, k)])
    return float(np.einsum("q,qi,i->", wts, vals, dets))


def induced_orientation_sign(n: int, normal_dot_outward: float) -> int:
    """Orientation of a face frame (det [frame | global normal] > 0) relative
    to the Stokes orientation of the cell boundary with outward normal."""
    s = 1 if normal_dot_outward > 0 else -1
    return s * (-1) ** (n - 1)
