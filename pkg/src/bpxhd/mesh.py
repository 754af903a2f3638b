"""Freudenthal (Kuhn) triangulation of the unit cube.

Every cube of the uniform grid with ``n`` cells per axis is split into d!
simplices, one per permutation ``p`` of the axes::

    v_0 = c,  v_k = v_{k-1} + e_{p_{k-1}} / n

so the simplex is the set of points whose fractional cell coordinates are
ordered ``f_{p_0} >= f_{p_1} >= ... >= f_{p_{d-1}}``.  Permutations are
enumerated lexicographically and identified by their Lehmer rank; element
``cube_rank * d! + perm_id``.  Vertices are ranked lexicographically by their
integer grid coordinates (axis 0 most significant).
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceededError, DomainError
from .simplex import Simplex

__all__ = ["Mesh", "build", "locate", "vertex_patch", "boundary_faces",
           "nestedness_check", "default_budget", "lehmer_rank", "permutations"]

DEFAULT_BUDGET = 2_000_000


def default_budget() -> int:
    """Vertex budget; the ``BPXHD_BUDGET`` environment variable overrides it."""
    env = os.environ.get("BPXHD_BUDGET")
    if env:
        return int(float(env))
    return DEFAULT_BUDGET


def permutations(d: int) -> np.ndarray:
    """All permutations of ``range(d)`` in lexicographic order, shape (d!, d)."""
    return np.array(list(itertools.permutations(range(d))), dtype=np.int64).reshape(-1, d)


def lehmer_rank(perms) -> np.ndarray:
    """Lexicographic rank of each row of ``perms``."""
    perms = np.atleast_2d(np.asarray(perms, dtype=np.int64))
    d = perms.shape[1]
    rank = np.zeros(perms.shape[0], dtype=np.int64)
    for i in range(d):
        smaller = (perms[:, i + 1:] < perms[:, i:i + 1]).sum(axis=1)
        rank += smaller * math.factorial(d - 1 - i)
    return rank


class Mesh:
    """Freudenthal triangulation of ``[0, 1]^d`` with ``n`` cells per axis.

    The object is immutable; derived tables (element connectivity, faces,
    patches) are computed lazily and cached.
    """

    def __init__(self, d: int, n: int, budget: int | None = None):
        if int(d) != d or d < 1:
            raise ValueError(f"dimension must be a positive integer, got {d}")
        if int(n) != n or n < 1:
            raise ValueError(f"grid resolution must be a positive integer, got {n}")
        self.dim = int(d)
        self.grid_n = int(n)
        self.budget = default_budget() if budget is None else int(budget)
        if self.num_vertices > self.budget:
            raise BudgetExceededError(
                f"mesh d={d}, n={n} has {self.num_vertices} vertices, "
                f"budget is {self.budget}", size=self.num_vertices, budget=self.budget)

    def __repr__(self):
        return f"Mesh(d={self.dim}, n={self.grid_n})"

    # -- sizes -------------------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return (self.grid_n + 1) ** self.dim

    @property
    def num_cubes(self) -> int:
        return self.grid_n ** self.dim

    @property
    def num_perms(self) -> int:
        return math.factorial(self.dim)

    @property
    def num_elements(self) -> int:
        return self.num_cubes * self.num_perms

    @property
    def mesh_size(self) -> float:
        """Element diameter ``sqrt(d) / n`` (all elements are congruent)."""
        return math.sqrt(self.dim) / self.grid_n

    h = mesh_size

    @property
    def element_volume(self) -> float:
        return 1.0 / (self.num_perms * self.num_cubes)

    # -- vertices ----------------------------------------------------------
    @cached_property
    def strides(self) -> np.ndarray:
        d, n = self.dim, self.grid_n
        return (n + 1) ** np.arange(d - 1, -1, -1, dtype=np.int64)

    def vertex_ids(self, grid) -> np.ndarray:
        """Rank of integer grid coordinates, shape (..., d) -> (...)."""
        return np.asarray(grid, dtype=np.int64) @ self.strides

    def grid_coords(self, ids=None) -> np.ndarray:
        if ids is None:
            ids = np.arange(self.num_vertices, dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        out = np.empty(ids.shape + (self.dim,), dtype=np.int64)
        rem = ids.copy()
        for i, s in enumerate(self.strides):
            out[..., i], rem = np.divmod(rem, s)
        return out

    @cached_property
    def vertices(self) -> np.ndarray:
        v = self.grid_coords() / self.grid_n
        v.setflags(write=False)
        return v

    @cached_property
    def boundary_vertex_flags(self) -> np.ndarray:
        g = self.grid_coords()
        flags = ((g == 0) | (g == self.grid_n)).any(axis=1)
        flags.setflags(write=False)
        return flags

    @property
    def boundary_vertex_ids(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_vertex_flags)

    @property
    def interior_vertex_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_vertex_flags)

    # -- elements ----------------------------------------------------------
    @cached_property
    def perms(self) -> np.ndarray:
        return permutations(self.dim)

    @cached_property
    def _perm_offsets(self) -> np.ndarray:
        # vertex-id offsets of v_0..v_d relative to the cube corner, per perm
        steps = self.strides[self.perms]
        return np.concatenate(
            [np.zeros((self.num_perms, 1), dtype=np.int64), np.cumsum(steps, axis=1)], axis=1)

    def cube_multi_index(self, cube_ids) -> np.ndarray:
        cube_ids = np.asarray(cube_ids, dtype=np.int64)
        out = np.empty(cube_ids.shape + (self.dim,), dtype=np.int64)
        rem = cube_ids.copy()
        for i in range(self.dim):
            s = self.grid_n ** (self.dim - 1 - i)
            out[..., i], rem = np.divmod(rem, s)
        return out

    def cube_rank(self, multi) -> np.ndarray:
        s = self.grid_n ** np.arange(self.dim - 1, -1, -1, dtype=np.int64)
        return np.asarray(multi, dtype=np.int64) @ s

    def element_cube_perm(self, eids):
        """``(cube multi-index, perm id)`` for element ids."""
        cube, perm = np.divmod(np.asarray(eids, dtype=np.int64), self.num_perms)
        return self.cube_multi_index(cube), perm

    def element_vertices(self, eids) -> np.ndarray:
        """Vertex ids of the given elements, shape (..., d+1)."""
        multi, perm = self.element_cube_perm(eids)
        base = self.vertex_ids(multi)
        return base[..., None] + self._perm_offsets[perm]

    @cached_property
    def elements(self) -> np.ndarray:
        """Connectivity table, shape (num_elements, d+1)."""
        cubes = self.cube_multi_index(np.arange(self.num_cubes, dtype=np.int64))
        base = self.vertex_ids(cubes)
        el = (base[:, None, None] + self._perm_offsets[None]).reshape(-1, self.dim + 1)
        el.setflags(write=False)
        return el

    @cached_property
    def element_perm_ids(self) -> np.ndarray:
        return np.tile(np.arange(self.num_perms, dtype=np.int64), self.num_cubes)

    def element_simplex(self, eid) -> Simplex:
        return Simplex(self.vertices[self.element_vertices(int(eid))])

    @cached_property
    def perm_simplices(self) -> list[Simplex]:
        """The d! distinct element shapes (translates cover the mesh)."""
        out = []
        for p in range(self.num_perms):
            out.append(Simplex(self.vertices[self._perm_offsets[p]]))
        return out

    # -- patches -----------------------------------------------------------
    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Vertex-by-element incidence matrix (CSR)."""
        E = self.num_elements
        rows = self.elements.ravel()
        cols = np.repeat(np.arange(E, dtype=np.int64), self.dim + 1)
        data = np.ones(rows.size, dtype=np.int8)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.num_vertices, E))

    def vertex_patch(self, a: int) -> np.ndarray:
        """Sorted ids of the elements containing vertex ``a``."""
        inc = self.incidence
        return np.sort(inc.indices[inc.indptr[a]:inc.indptr[a + 1]])

    @cached_property
    def element_to_neighbors(self) -> sp.csr_matrix:
        """Elements whose closures meet (the element patch), as a boolean CSR."""
        inc = self.incidence.astype(np.int32)
        adj = (inc.T @ inc).tocsr()
        adj.data[:] = 1
        return adj.astype(bool)

    # -- faces -------------------------------------------------------------
    @cached_property
    def _face_table(self):
        d = self.dim
        el = self.elements
        local = np.array([np.delete(np.arange(d + 1), i) for i in range(d + 1)])
        fv = np.sort(el[:, local], axis=2).reshape(-1, d)
        uniq, inverse, counts = np.unique(fv, axis=0, return_inverse=True, return_counts=True)
        return uniq, inverse.reshape(self.num_elements, d + 1), counts

    @property
    def faces(self) -> np.ndarray:
        """Global face table: sorted vertex ids, lexicographically ordered."""
        return self._face_table[0]

    @property
    def element_faces(self) -> np.ndarray:
        """Global face id of local face i (opposite local vertex i)."""
        return self._face_table[1]

    @property
    def face_multiplicity(self) -> np.ndarray:
        return self._face_table[2]

    @cached_property
    def boundary_face_flags(self) -> np.ndarray:
        """Per global face: does it lie on the boundary of the cube."""
        g = self.grid_coords(self.faces)  # (F, d, dim)
        lo = (g == 0).all(axis=1)
        hi = (g == self.grid_n).all(axis=1)
        return (lo | hi).any(axis=1)

    def boundary_faces(self) -> list[tuple[int, int]]:
        """``(element id, local face index)`` for every face on the cube boundary."""
        on = self.boundary_face_flags[self.element_faces]
        eids, loc = np.nonzero(on)
        return list(zip(eids.tolist(), loc.tolist()))

    @property
    def expected_boundary_face_count(self) -> int:
        d, n = self.dim, self.grid_n
        return 2 * d * n ** (d - 1) * math.factorial(d - 1)

    # -- point location ----------------------------------------------------
    def locate(self, x):
        """Element id and barycentric coordinates of point(s) in ``[0,1]^d``.

        Points on shared faces go to the lowest-id element containing them.
        Returns ``(eids, bary)`` with shapes (m,) and (m, d+1) for input (m, d),
        or a scalar id and (d+1,) array for a single point.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates")
        if np.any(x < 0.0) or np.any(x > 1.0) or not np.all(np.isfinite(x)):
            raise DomainError("point outside the unit cube")
        n = self.grid_n
        t = x * n
        cube = np.floor(t).astype(np.int64)
        # lowest cube: points on an internal grid plane belong to the cell below
        on_plane = (t == cube) & (cube > 0)
        cube = np.where(on_plane | (cube >= n), cube - 1, cube)
        f = t - cube
        perm = np.argsort(-f, axis=1, kind="stable")
        fs = np.take_along_axis(f, perm, axis=1)
        bary = np.empty((x.shape[0], self.dim + 1))
        bary[:, 0] = 1.0 - fs[:, 0]
        bary[:, 1:-1] = fs[:, :-1] - fs[:, 1:]
        bary[:, -1] = fs[:, -1]
        eids = self.cube_rank(cube) * self.num_perms + lehmer_rank(perm)
        if single:
            return int(eids[0]), bary[0]
        return eids, bary

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "n": self.grid_n,
            "num_vertices": self.num_vertices,
            "num_elements": self.num_elements,
            "boundary_vertex_ids": self.boundary_vertex_ids.tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def iter_element_rows(self):
        """Rows ``elem_id, cube_index..., perm_id``."""
        for eid in range(self.num_elements):
            multi, perm = self.element_cube_perm(eid)
            yield [eid, *multi.tolist(), int(perm)]

    def write_elements_csv(self, fh=None) -> str | None:
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["elem_id"] + [f"cube_{i}" for i in range(self.dim)] + ["perm_id"])
        for row in self.iter_element_rows():
            w.writerow(row)
        return fh.getvalue() if own else None


def build(d: int, n: int, budget: int | None = None) -> Mesh:
    return Mesh(d, n, budget=budget)


def locate(m: Mesh, x):
    return m.locate(x)


def vertex_patch(m: Mesh, a: int) -> np.ndarray:
    return m.vertex_patch(a)


def boundary_faces(m: Mesh):
    return m.boundary_faces()


def nestedness_check(coarse: Mesh, fine: Mesh, tol: float = 1e-12) -> bool:
    """True iff each fine element lies inside exactly one coarse element."""
    if coarse.dim != fine.dim:
        raise ValueError("meshes have different dimensions")
    if fine.grid_n % coarse.grid_n:
        return False
    el = fine.elements
    centroids = fine.vertices[el].mean(axis=1)
    eids, bary = coarse.locate(centroids)
    # centroid strictly inside a single coarse element
    if np.any(bary <= tol):
        return False
    cverts = coarse.vertices[coarse.elements[eids]]  # (E, d+1, d)
    fverts = fine.vertices[el]
    B = np.transpose(cverts[:, 1:] - cverts[:, :1], (0, 2, 1))
    lam = np.linalg.solve(B, np.transpose(fverts - cverts[:, :1], (0, 2, 1)))
    lam0 = 1.0 - lam.sum(axis=1)
    return bool(lam.min() >= -tol and lam0.min() >= -tol)
