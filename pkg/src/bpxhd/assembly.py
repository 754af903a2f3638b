"""P1 mass, stiffness and boundary-mass matrices on Freudenthal meshes.

Global matrices are ``scipy.sparse.csr_matrix`` objects assembled from
COO triplets; duplicates are summed by scipy in a fixed input order, so
results are reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import Mesh
from .simplex import Simplex, reference_simplex

__all__ = [
    "reference_mass", "reference_stiffness", "local_mass", "local_stiffness",
    "local_boundary_mass", "local_trace_mass", "DofMap", "assemble",
    "load_vector", "nodal_gradient_bound", "write_matrix_market",
    "read_matrix_market",
]

KINDS = ("mass", "stiffness", "boundary_mass")


def reference_mass(d: int) -> np.ndarray:
    """``I + 1 1^T`` of size d+1 (the reference mass up to |tau|/((d+1)(d+2)))."""
    return np.eye(d + 1) + np.ones((d + 1, d + 1))


def reference_stiffness(d: int) -> np.ndarray:
    """``[[d, -1^T], [-1, I]]``, the reference stiffness up to |tau|."""
    K = np.eye(d + 1)
    K[0, 0] = d
    K[0, 1:] = K[1:, 0] = -1.0
    return K


def _simplex(s) -> Simplex:
    return s if isinstance(s, Simplex) else Simplex(s)


def local_mass(s) -> np.ndarray:
    s = _simplex(s)
    d = s.dim
    return s.volume / ((d + 1) * (d + 2)) * reference_mass(d)


def local_stiffness(s) -> np.ndarray:
    s = _simplex(s)
    g = s.barycentric_gradients
    return s.volume * (g @ g.T)


def local_boundary_mass(s, face: int) -> np.ndarray:
    """Mass matrix of the traces of the local basis on face ``face``.

    The row and column of the opposite vertex ``face`` are zero.
    """
    s = _simplex(s)
    d = s.dim
    if not 0 <= face <= d:
        raise IndexError(f"face index {face} out of range for a {d}-simplex")
    area = s.face_measures[face]
    M = np.zeros((d + 1, d + 1))
    keep = np.delete(np.arange(d + 1), face)
    M[np.ix_(keep, keep)] = area / (d * (d + 1)) * reference_mass(d - 1)
    return M


def local_trace_mass(s) -> np.ndarray:
    """Boundary mass over the whole of the element boundary."""
    s = _simplex(s)
    return sum(local_boundary_mass(s, f) for f in range(s.dim + 1))


@dataclass(frozen=True)
class DofMap:
    """Free (interior) degrees of freedom of a mesh."""

    full_to_free: np.ndarray
    free_ids: np.ndarray

    @classmethod
    def from_mesh(cls, m: Mesh) -> "DofMap":
        free = m.interior_vertex_ids
        f2f = np.full(m.num_vertices, -1, dtype=np.int64)
        f2f[free] = np.arange(free.size)
        return cls(f2f, free)

    @property
    def free_count(self) -> int:
        return int(self.free_ids.size)

    def extend(self, x_free) -> np.ndarray:
        """Zero-extend a free-dof vector to all vertices."""
        x_free = np.asarray(x_free)
        out = np.zeros((self.full_to_free.size,) + x_free.shape[1:], dtype=x_free.dtype)
        out[self.free_ids] = x_free
        return out

    def restrict(self, x_full) -> np.ndarray:
        return np.asarray(x_full)[self.free_ids]


class _LocalCache:
    """Local matrices of the d! element shapes of a mesh."""

    def __init__(self, m: Mesh):
        self.mesh = m

    @cached_property
    def mass(self):
        return np.array([local_mass(s) for s in self.mesh.perm_simplices])

    @cached_property
    def stiffness(self):
        return np.array([local_stiffness(s) for s in self.mesh.perm_simplices])

    @cached_property
    def boundary(self):
        d = self.mesh.dim
        return np.array([[local_boundary_mass(s, f) for f in range(d + 1)]
                         for s in self.mesh.perm_simplices])


_CACHE: dict = {}


def _local(m: Mesh) -> _LocalCache:
    key = (m.dim, m.grid_n)
    if key not in _CACHE:
        _CACHE[key] = _LocalCache(m)
    return _CACHE[key]


def _scatter(conn, blocks, size):
    k = conn.shape[1]
    rows = np.repeat(conn, k, axis=1).ravel()
    cols = np.tile(conn, (1, k)).ravel()
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble(m: Mesh, kind: str = "stiffness", bc: str = "full") -> sp.csr_matrix:
    """Global P1 matrix of ``kind`` in {mass, stiffness, boundary_mass}.

    ``bc="dirichlet"`` keeps only rows/columns of interior vertices, in the
    order of :class:`DofMap`.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if bc not in ("full", "dirichlet"):
        raise ValueError("bc must be 'full' or 'dirichlet'")
    loc = _local(m)
    if kind == "boundary_mass":
        bf = np.array(m.boundary_faces(), dtype=np.int64).reshape(-1, 2)
        perms = m.element_perm_ids[bf[:, 0]]
        blocks = loc.boundary[perms, bf[:, 1]]
        conn = m.elements[bf[:, 0]]
    else:
        local = loc.mass if kind == "mass" else loc.stiffness
        blocks = local[m.element_perm_ids]
        conn = m.elements
    A = _scatter(conn, blocks, m.num_vertices)
    if bc == "dirichlet":
        free = DofMap.from_mesh(m).free_ids
        A = A[free][:, free].tocsr()
    return A


def load_vector(m: Mesh, f, degree: int = 3, bc: str = "full") -> np.ndarray:
    """``b_a = int f phi_a`` by Grundmann-Moeller quadrature on each element."""
    from .quadrature import simplex_rule

    bary, w = simplex_rule(degree, m.dim)
    el = m.elements
    X = m.vertices[el]                              # (E, d+1, d)
    pts = np.einsum("qk,ekd->eqd", bary, X)         # (E, q, d)
    fv = np.asarray(f(pts.reshape(-1, m.dim)), dtype=float).reshape(pts.shape[:2])
    contrib = m.element_volume * np.einsum("q,eq,qk->ek", w, fv, bary)
    b = np.bincount(el.ravel(), weights=contrib.ravel(), minlength=m.num_vertices)
    if bc == "dirichlet":
        b = b[DofMap.from_mesh(m).free_ids]
    return b


def nodal_gradient_bound(m: Mesh) -> float:
    """``max_a ||grad phi_a||_inf``, i.e. the largest reciprocal element height."""
    return float(max(1.0 / s.heights.min() for s in m.perm_simplices))


def write_matrix_market(A, target, comment: str = "") -> None:
    """Write a sparse matrix in MatrixMarket coordinate format."""
    A = sp.coo_matrix(A)
    symmetry = "symmetric" if abs(A - A.T).max() == 0 else "general"
    scipy.io.mmwrite(target, A, comment=comment, field="real", symmetry=symmetry)


def read_matrix_market(source) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(source))
