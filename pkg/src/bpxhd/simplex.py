"""Exact geometry of d-simplices in R^d.

Vertices are stored as a ``(d+1, d)`` array.  All measures are dimension
generic: k-dimensional content of a k-simplex embedded in R^d is computed
from the Gram determinant of its edge matrix.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateGeometryError

__all__ = [
    "Simplex",
    "AffineMap",
    "simplex_measure",
    "reference_simplex",
    "regular_simplex",
    "freudenthal_simplex",
    "volume",
    "diameter",
    "inradius",
    "faces",
    "face_measures",
    "heights",
    "shape_ratio",
    "affine_map",
]

# volume < DEGENERACY_TOL * diameter**d is treated as degenerate
DEGENERACY_TOL = 1e-14


def simplex_measure(points) -> float:
    """k-dimensional measure of the k-simplex spanned by ``k+1`` points.

    A single point has measure 1 by convention.
    """
    points = np.asarray(points, dtype=float)
    k = points.shape[0] - 1
    if k == 0:
        return 1.0
    E = (points[1:] - points[0]).T
    if E.shape[0] == E.shape[1]:
        return abs(np.linalg.det(E)) / math.factorial(k)
    g = np.linalg.det(E.T @ E)
    return math.sqrt(max(g, 0.0)) / math.factorial(k)


@dataclass(frozen=True)
class AffineMap:
    """``x = matrix @ xhat + offset``, mapping the reference simplex onto a simplex."""

    matrix: np.ndarray
    offset: np.ndarray

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def __call__(self, xhat):
        xhat = np.asarray(xhat, dtype=float)
        return xhat @ self.matrix.T + self.offset

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.solve(self.matrix, (x - self.offset).T).T


class Simplex:
    """A nondegenerate d-simplex in R^d with cached geometric scalars.

    Parameters
    ----------
    vertices : array_like, shape (d+1, d)
    check : bool
        Raise :class:`DegenerateGeometryError` for (near) zero volume.
    """

    def __init__(self, vertices, check=True):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
            raise ValueError(
                f"expected (d+1, d) vertex array, got shape {v.shape}")
        v.setflags(write=False)
        self._vertices = v
        if check:
            h = self.diameter
            if not self.volume > DEGENERACY_TOL * h ** self.dim:
                raise DegenerateGeometryError(
                    f"degenerate {self.dim}-simplex: volume={self.volume:.3e}")

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def dim(self) -> int:
        return self._vertices.shape[1]

    def __repr__(self):
        return f"Simplex(dim={self.dim}, vertices={self._vertices.tolist()})"

    @cached_property
    def edge_matrix(self) -> np.ndarray:
        """Columns are ``v_i - v_0`` for i = 1..d."""
        return (self._vertices[1:] - self._vertices[0]).T

    @cached_property
    def volume(self) -> float:
        return abs(np.linalg.det(self.edge_matrix)) / math.factorial(self.dim)

    @cached_property
    def diameter(self) -> float:
        v = self._vertices
        diff = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())

    @cached_property
    def face_measures(self) -> np.ndarray:
        """(d-1)-measure of face i, the face opposite vertex i."""
        v = self._vertices
        return np.array([simplex_measure(np.delete(v, i, axis=0))
                         for i in range(self.dim + 1)])

    @cached_property
    def inradius(self) -> float:
        return self.dim * self.volume / self.face_measures.sum()

    @cached_property
    def heights(self) -> np.ndarray:
        """Distance from vertex i to the hyperplane of the opposite face."""
        return self.dim * self.volume / self.face_measures

    @property
    def shape_ratio(self) -> float:
        return self.diameter / self.inradius

    def faces(self) -> list[np.ndarray]:
        """Vertex arrays of the d+1 faces; face i omits vertex i."""
        v = self._vertices
        return [np.delete(v, i, axis=0) for i in range(self.dim + 1)]

    @cached_property
    def affine_map(self) -> AffineMap:
        return AffineMap(self.edge_matrix.copy(), self._vertices[0].copy())

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """Row i is the (constant) gradient of the barycentric coordinate lambda_i."""
        Binv = np.linalg.inv(self.edge_matrix)
        g = np.empty((self.dim + 1, self.dim))
        g[1:] = Binv
        g[0] = -Binv.sum(axis=0)
        return g

    def barycentric(self, x) -> np.ndarray:
        """Barycentric coordinates of point(s) ``x`` (shape (..., d) -> (..., d+1))."""
        x = np.asarray(x, dtype=float)
        lam = np.linalg.solve(self.edge_matrix,
                              (x - self._vertices[0]).reshape(-1, self.dim).T).T
        out = np.concatenate([1.0 - lam.sum(axis=1, keepdims=True), lam], axis=1)
        return out.reshape(x.shape[:-1] + (self.dim + 1,))

    def edge_lengths_sq(self) -> np.ndarray:
        """Sorted squared edge lengths."""
        v = self._vertices
        return np.sort([((v[i] - v[j]) ** 2).sum()
                        for i, j in itertools.combinations(range(self.dim + 1), 2)])


def reference_simplex(d: int) -> Simplex:
    """Vertices ``0, e_1, ..., e_d``."""
    return Simplex(np.vstack([np.zeros(d), np.eye(d)]))


def regular_simplex(d: int, edge: float = 1.0) -> Simplex:
    """Regular d-simplex with the given edge length."""
    # scaled standard basis of R^{d+1}, then rotated into the hyperplane sum=const
    P = np.eye(d + 1) * edge / math.sqrt(2.0)
    centered = P - P.mean(axis=0)
    # orthonormal basis of the hyperplane orthogonal to the ones vector
    q, _ = np.linalg.qr(np.vstack([np.ones(d + 1), np.eye(d + 1)[:d]]).T)
    return Simplex(centered @ q[:, 1:])


def freudenthal_simplex(perm) -> Simplex:
    """Kuhn simplex of the unit cube: ``v_k = e_{p_0} + ... + e_{p_{k-1}}``.

    ``perm`` lists the axes in order of decreasing coordinate, so the simplex
    is ``{1 > x_{p_0} > x_{p_1} > ... > x_{p_{d-1}} > 0}``.
    """
    perm = list(perm)
    d = len(perm)
    v = np.zeros((d + 1, d))
    for k, axis in enumerate(perm):
        v[k + 1] = v[k]
        v[k + 1, axis] = 1.0
    return Simplex(v)


def _as_simplex(s) -> Simplex:
    return s if isinstance(s, Simplex) else Simplex(s)


def volume(s) -> float:
    return _as_simplex(s).volume


def diameter(s) -> float:
    return _as_simplex(s).diameter


def inradius(s) -> float:
    return _as_simplex(s).inradius


def faces(s) -> list[np.ndarray]:
    return _as_simplex(s).faces()


def face_measures(s) -> np.ndarray:
    return _as_simplex(s).face_measures


def heights(s) -> np.ndarray:
    return _as_simplex(s).heights


def shape_ratio(s) -> float:
    return _as_simplex(s).shape_ratio


def affine_map(s) -> AffineMap:
    return _as_simplex(s).affine_map
