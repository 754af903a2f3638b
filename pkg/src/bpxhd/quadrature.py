"""Grundmann-Moeller cubature on the d-simplex.

Rules are returned in barycentric form: ``points`` has shape (q, d+1) and
``weights`` sums to one, so ``|K| * sum(w * f(x(points)))`` approximates the
integral over any simplex K.  The rule with parameter s is exact for total
degree 2s+1.  Some weights are negative for s >= 1.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = ["grundmann_moller", "simplex_rule", "integrate"]


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative ints summing to ``total``."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


@lru_cache(maxsize=None)
def _gm_exact(s, d):
    # exact rational points/weights relative to the simplex volume
    deg = 2 * s + 1
    table = {}
    for i in range(s + 1):
        w = Fraction((-1) ** i * (deg + d - 2 * i) ** deg,
                     2 ** (2 * s) * math.factorial(i) * math.factorial(deg + d - i))
        w *= math.factorial(d)
        denom = deg + d - 2 * i
        for beta in _compositions(s - i, d + 1):
            pt = tuple(Fraction(2 * b + 1, denom) for b in beta)
            table[pt] = table.get(pt, Fraction(0)) + w
    return tuple(sorted(table.items()))


def grundmann_moller(s: int, d: int):
    """Rule of parameter ``s`` (exact to degree 2s+1) on the d-simplex.

    Returns ``(points, weights)`` with barycentric points of shape (q, d+1).
    """
    if s < 0 or d < 0:
        raise ValueError("s and d must be nonnegative")
    if d == 0:
        return np.ones((1, 1)), np.ones(1)
    items = _gm_exact(s, d)
    pts = np.array([[float(c) for c in p] for p, _ in items])
    wts = np.array([float(w) for _, w in items])
    return pts, wts


def simplex_rule(degree: int, d: int):
    """Cheapest Grundmann-Moeller rule exact for polynomials of ``degree``."""
    s = max(0, degree // 2)
    return grundmann_moller(s, d)


def integrate(f, vertices, degree=3):
    """Integrate a vectorized ``f(x)`` (x of shape (q, d)) over one simplex."""
    from .simplex import simplex_measure

    vertices = np.asarray(vertices, dtype=float)
    k = vertices.shape[0] - 1
    bary, w = simplex_rule(degree, k)
    x = bary @ vertices
    return simplex_measure(vertices) * np.dot(w, f(x))
