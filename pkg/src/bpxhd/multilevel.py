"""Nested dyadic Freudenthal hierarchy: transfer operators and L2 projections.

Level ``l`` (1-based) is the mesh with ``n = 2**l`` cells per axis and mesh
size ``h_l = sqrt(d) * 2**-l``.  All level vectors live on the free
(interior) vertices of their level.
"""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import DofMap, assemble
from .errors import BudgetExceededError, SolverError
from .krylov import pcg
from .mesh import Mesh, default_budget, nestedness_check

__all__ = ["prolongation_matrix", "Hierarchy", "build_hierarchy"]

DIRECT_LIMIT = 20_000
MASS_CG_TOL = 1e-12


def prolongation_matrix(coarse: Mesh, fine: Mesh, free: bool = True) -> sp.csr_matrix:
    """Matrix of the inclusion of the coarse P1 space into the fine one.

    Row ``i`` holds the coarse basis functions evaluated at fine vertex ``i``.
    With ``free=True`` rows and columns are restricted to interior vertices.
    """
    if coarse.dim != fine.dim or fine.grid_n % coarse.grid_n:
        raise ValueError("meshes are not nested")
    eids, bary = coarse.locate(fine.vertices)
    cols = coarse.element_vertices(eids)
    rows = np.repeat(np.arange(fine.num_vertices), coarse.dim + 1)
    vals = bary.ravel()
    keep = np.abs(vals) > 1e-14
    P = sp.csr_matrix((vals[keep], (rows[keep], cols.ravel()[keep])),
                      shape=(fine.num_vertices, coarse.num_vertices))
    if free:
        P = P[fine.interior_vertex_ids][:, coarse.interior_vertex_ids].tocsr()
    P.sort_indices()
    return P


class _MassSolver:
    """Exact solves with one level's mass matrix."""

    def __init__(self, M, direct_limit=DIRECT_LIMIT, tol=MASS_CG_TOL):
        self.M = M
        self.n = M.shape[0]
        self.tol = tol
        self._lu = spla.splu(M.tocsc()) if 0 < self.n <= direct_limit else None
        self._dinv = 1.0 / M.diagonal() if self.n else None

    def __call__(self, b):
        if self.n == 0:
            return np.zeros_like(b)
        if self._lu is not None:
            return self._lu.solve(np.asarray(b, dtype=float))
        if b.ndim == 2:
            return np.column_stack([self(b[:, j]) for j in range(b.shape[1])])
        x, rep = pcg(self.M, b, pre=lambda r: self._dinv * r, tol=self.tol, maxit=1000)
        if not rep.converged:
            raise SolverError(f"mass CG stalled at {rep.relative_residual:.2e}")
        return x


class Hierarchy:
    """Levels ``1..J`` of nested Freudenthal meshes of the unit cube."""

    def __init__(self, d: int, J: int, budget: int | None = None,
                 direct_limit: int = DIRECT_LIMIT):
        if int(d) != d or d < 1 or int(J) != J or J < 1:
            raise ValueError("need integers d >= 1 and J >= 1")
        self.dim = int(d)
        self.J = int(J)
        self.budget = default_budget() if budget is None else int(budget)
        self.direct_limit = direct_limit
        for l in range(1, self.J + 1):
            nv = (2 ** l + 1) ** self.dim
            if nv > self.budget:
                raise BudgetExceededError(
                    f"level {l} (n={2 ** l}) needs {nv} vertices, budget is {self.budget}",
                    level=l, size=nv, budget=self.budget)
        self.meshes = [Mesh(self.dim, 2 ** l, budget=self.budget) for l in range(1, self.J + 1)]

    def __repr__(self):
        return f"Hierarchy(d={self.dim}, J={self.J})"

    def _check(self, l):
        if not 1 <= l <= self.J:
            raise IndexError(f"level {l} outside 1..{self.J}")

    def mesh(self, l: int) -> Mesh:
        self._check(l)
        return self.meshes[l - 1]

    def h(self, l: int) -> float:
        return math.sqrt(self.dim) * 2.0 ** (-l)

    h_of = h

    @property
    def gamma(self) -> float:
        """``h_l`` behaves like ``gamma**(2l)`` with ``gamma = 2**-1/2``."""
        return 2.0 ** -0.5

    @cached_property
    def dof_maps(self) -> list[DofMap]:
        return [DofMap.from_mesh(m) for m in self.meshes]

    def num_free(self, l: int) -> int:
        self._check(l)
        return (2 ** l - 1) ** self.dim

    @cached_property
    def prolongations(self) -> list[sp.csr_matrix]:
        """``prolongations[l-1]`` maps level l to level l+1 (free dofs)."""
        return [prolongation_matrix(self.meshes[i], self.meshes[i + 1])
                for i in range(self.J - 1)]

    @cached_property
    def stiffness(self) -> list[sp.csr_matrix]:
        return [assemble(m, "stiffness", "dirichlet") for m in self.meshes]

    @cached_property
    def mass(self) -> list[sp.csr_matrix]:
        return [assemble(m, "mass", "dirichlet") for m in self.meshes]

    @cached_property
    def mass_solvers(self) -> list[_MassSolver]:
        return [_MassSolver(M, self.direct_limit) for M in self.mass]

    def mass_solve(self, l: int, b):
        self._check(l)
        return self.mass_solvers[l - 1](b)

    # -- transfers ---------------------------------------------------------
    def prolong(self, l: int, x):
        """Level l coefficients to level l+1."""
        if not 1 <= l < self.J:
            raise IndexError(f"cannot prolong from level {l} (J={self.J})")
        return self.prolongations[l - 1] @ x

    def restrict(self, l: int, r):
        """Level l+1 dual vector to level l (transpose of :meth:`prolong`)."""
        if not 1 <= l < self.J:
            raise IndexError(f"cannot restrict to level {l} (J={self.J})")
        return self.prolongations[l - 1].T @ r

    def prolong_to_fine(self, l: int, x):
        """Apply ``I_{l->J}`` factor by factor."""
        self._check(l)
        for k in range(l, self.J):
            x = self.prolong(k, x)
        return x

    def restrict_from_fine(self, l: int, r):
        """Apply ``I_{l->J}^T``."""
        self._check(l)
        for k in range(self.J - 1, l - 1, -1):
            r = self.restrict(k, r)
        return r

    def level_l2_project(self, l: int, v):
        """Coefficients on level l of the L2 projection of a level-J function."""
        self._check(l)
        b = self.restrict_from_fine(l, self.mass[-1] @ v)
        return self.mass_solve(l, b)

    def project_fine(self, l: int, v):
        """``Q_l v`` expressed in level-J coefficients."""
        return self.prolong_to_fine(l, self.level_l2_project(l, v))

    # -- consistency checks -----------------------------------------------
    def galerkin_defect(self, l: int, kind: str = "stiffness") -> float:
        """``max |P^T A_{l+1} P - A_l|`` entrywise."""
        mats = self.stiffness if kind == "stiffness" else self.mass
        P = self.prolongations[l - 1]
        D = (P.T @ mats[l] @ P - mats[l - 1]).tocoo()
        return float(np.abs(D.data).max()) if D.nnz else 0.0

    def composite_galerkin_defect(self, l: int) -> float:
        """``max |I_{l->J}^T M_J I_{l->J} - M_l|``, using explicit products."""
        P = sp.identity(self.num_free(l), format="csr")
        for k in range(l, self.J):
            P = self.prolongations[k - 1] @ P
        D = (P.T @ self.mass[-1] @ P - self.mass[l - 1]).tocoo()
        return float(np.abs(D.data).max()) if D.nnz else 0.0

    def is_nested(self) -> bool:
        return all(nestedness_check(a, b) for a, b in zip(self.meshes, self.meshes[1:]))


def build_hierarchy(d: int, J: int, budget: int | None = None) -> Hierarchy:
    return Hierarchy(d, J, budget=budget)
