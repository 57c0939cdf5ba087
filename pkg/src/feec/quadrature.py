"""Quadrature rules on reference simplices.

Element and triangle-face integrals use fully symmetric Grundmann-Moller rules
whose weights are generated as exact rationals; segment integrals use
Gauss-Legendre.  The rules shipped here are exact to polynomial degree 7,
which exceeds the degree-4 (elements) and degree-6 (faces) requirements of
every discrete integrand in the package; analytic data integrands are not
polynomial, so for those the rule degree is an approximation by design.

Reference weights sum to 1/m! (the volume of the unit m-simplex).  Mapping to
a physical simplex multiplies weights by m! * measure(simplex).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import factorial

import numpy as np


def _compositions(total: int, parts: int):
    """All tuples of `parts` nonnegative integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


@lru_cache(maxsize=None)
def grundmann_moeller(dim: int, s: int):
    """GM rule of degree 2s+1 on the unit simplex {x >= 0, sum x <= 1}.

    Returns (points (q, dim), weights (q,)), weights summing to 1/dim!.
    Weights are computed with Fraction arithmetic before conversion to float.
    """
    d = 2 * s + 1
    bary, wts = [], []
    for i in range(s + 1):
        w = Fraction((-1) ** i * (d + dim - 2 * i) ** d,
                     4 ** s * factorial(i) * factorial(d + dim - i))
        for beta in _compositions(s - i, dim + 1):
            lam = tuple(Fraction(2 * b + 1, d + dim - 2 * i) for b in beta)
            bary.append(lam)
            wts.append(w)
    points = np.array([[float(l) for l in lam[1:]] for lam in bary])
    weights = np.array([float(w) for w in wts])
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


@lru_cache(maxsize=None)
def gauss_segment(npts: int):
    """Gauss-Legendre rule on [0, 1]; exact to degree 2*npts - 1."""
    x, w = np.polynomial.legendre.leggauss(npts)
    points = ((x + 1.0) / 2.0).reshape(-1, 1)
    weights = w / 2.0
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


@lru_cache(maxsize=None)
def simplex_rule(m: int):
    """Reference rule on the unit m-simplex, exact to degree >= 7 for m <= 3."""
    if m == 0:
        return np.zeros((1, 0)), np.ones(1)
    if m == 1:
        return gauss_segment(4)
    return grundmann_moeller(m, 3)


def barycentric(points: np.ndarray) -> np.ndarray:
    """Reference-simplex coordinates -> barycentric coordinates (q, m+1)."""
    lam0 = 1.0 - points.sum(axis=1, keepdims=True)
    return np.hstack([lam0, points])


def simplex_measure(vertices: np.ndarray) -> float:
    """m-dimensional measure of a simplex with m+1 vertices in R^n (m <= n)."""
    E = vertices[1:] - vertices[0]
    m = E.shape[0]
    if m == 0:
        return 1.0
    if E.shape[1] == m:
        return abs(np.linalg.det(E)) / factorial(m)
    gram = E @ E.T
    return float(np.sqrt(max(np.linalg.det(gram), 0.0))) / factorial(m)


def map_rule(vertices: np.ndarray, rule=None):
    """Map a reference rule onto the physical simplex `vertices` ((m+1) x n).

    Returns (points (q, n), weights (q,)) with weights summing to the
    simplex measure.
    """
    m = vertices.shape[0] - 1
    pts, wts = simplex_rule(m) if rule is None else rule
    lam = barycentric(pts)
    X = lam @ vertices
    W = wts * (factorial(m) * simplex_measure(vertices))
    return X, W
