"""Combinatorics of alternating indices.

Differential-form components are stored against strictly increasing tuples of
axis indices, ordered lexicographically.  This module provides the subset
tables, wedge merge signs, Euclidean Hodge-star sign/permutation tables, and
pullback minors shared by the polynomial and sampled-value code paths.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np


@lru_cache(maxsize=None)
def axis_tuples(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """All strictly increasing k-subsets of range(n), lexicographic order."""
    return tuple(combinations(range(n), k))


@lru_cache(maxsize=None)
def axis_index(n: int, k: int) -> dict:
    """Map from increasing k-subset to its position in axis_tuples(n, k)."""
    return {I: i for i, I in enumerate(axis_tuples(n, k))}


def n_components(n: int, k: int) -> int:
    return len(axis_tuples(n, k))


def merge_sign(I: tuple, J: tuple):
    """Sign of sorting the concatenation I+J, or (0, ()) if indices repeat.

    dx_I wedge dx_J = sign * dx_sorted(I+J).
    """
    if set(I) & set(J):
        return 0, ()
    merged = I + J
    inv = 0
    for a in range(len(merged)):
        for b in range(a + 1, len(merged)):
            if merged[a] > merged[b]:
                inv += 1
    return (-1) ** inv, tuple(sorted(merged))


@lru_cache(maxsize=None)
def star_table(n: int, k: int) -> tuple:
    """Per increasing k-subset I: (sign, complement Ic) with star dx_I = sign * dx_Ic.

    The sign realizes dx_I wedge dx_Ic = sign * vol, which is the convention
    omega wedge mu = <star omega, mu> vol for the Euclidean metric.
    """
    out = []
    for I in axis_tuples(n, k):
        Ic = tuple(i for i in range(n) if i not in I)
        s, _ = merge_sign(I, Ic)
        out.append((s, Ic))
    return tuple(out)


def star_sign_power(n: int, k: int) -> int:
    """Sign of star(star(omega)) for a k-form in n dimensions: (-1)^(k(n-k))."""
    return (-1) ** (k * (n - k))


@lru_cache(maxsize=None)
def star_permutation(n: int, k: int):
    """Arrays (perm, signs): star maps component i of a k-form to component
    perm[i] of the (n-k)-form with factor signs[i]."""
    idx = axis_index(n, n - k)
    perm = np.empty(n_components(n, k), dtype=np.intp)
    signs = np.empty(n_components(n, k))
    for i, (s, Ic) in enumerate(star_table(n, k)):
        perm[i] = idx[Ic]
        signs[i] = s
    perm.setflags(write=False)
    signs.setflags(write=False)
    return perm, signs


def star_components(values: np.ndarray, n: int, k: int) -> np.ndarray:
    """Apply the Euclidean Hodge star to sampled k-form components.

    values has the component axis last, ordered per axis_tuples(n, k).
    """
    perm, signs = star_permutation(n, k)
    out = np.empty(values.shape[:-1] + (n_components(n, n - k),), dtype=values.dtype)
    out[..., perm] = values * signs
    return out


def pullback_matrix(T: np.ndarray, k: int) -> np.ndarray:
    """Matrix P of the pullback along the linear map with column frame T (n x m).

    For a k-form with ambient components omega_I, the pulled-back components on
    the m-dimensional frame are (tr omega)_J = sum_I P[J, I] omega_I, where
    P[J, I] = det T[I, J] (rows I, columns J).
    """
    n, m = T.shape
    rows = axis_tuples(m, k)
    cols = axis_tuples(n, k)
    P = np.empty((len(rows), len(cols)))
    for a, J in enumerate(rows):
        for b, I in enumerate(cols):
            P[a, b] = np.linalg.det(T[np.ix_(I, J)]) if k else 1.0
    return P


def interior_product_terms(n: int, k: int):
    """Expansion of the interior product iota_v on k-form components.

    Returns a list of (out_index, axis, in_index, sign) with
    (iota_v omega)_{out} += sign * v[axis] * omega_{in}.
    """
    terms = []
    idx_out = axis_index(n, k - 1)
    for i, I in enumerate(axis_tuples(n, k)):
        for pos, axis in enumerate(I):
            J = I[:pos] + I[pos + 1:]
            terms.append((idx_out[J], axis, i, (-1) ** pos))
    return terms
