"""Averaged Scott-Zhang quasi-interpolation and L2/H1 projections.

The nodal value at a vertex ``a`` is a measure-weighted average of
``int_K psi_{a,K} v`` over regions K: all elements of the vertex patch for an
interior vertex, and one boundary face per patch element for a boundary
vertex.  ``psi_{a,K}`` is the P1(K) function biorthogonal to the restricted
nodal basis, ``(k+1)/|K| * ((k+2) phi_a - 1)`` with k the dimension of K.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import DofMap, assemble, load_vector
from .errors import SolverError
from .mesh import Mesh
from .quadrature import simplex_rule
from .simplex import Simplex, simplex_measure

__all__ = [
    "dual_coefficients", "DualFunction", "dual_function", "dual_l1_norm",
    "AveragingSets", "build_averaging_sets", "interpolate", "evaluate_p1",
    "P1Function", "interp_error", "fe_error", "l2_project", "h1_project",
]


def dual_coefficients(k: int, measure: float, local: int) -> np.ndarray:
    """Coefficients of psi in the nodal basis of a k-simplex of given measure."""
    c = np.full(k + 1, -(k + 1) / measure)
    c[local] = (k + 1) ** 2 / measure
    return c


@dataclass(frozen=True)
class DualFunction:
    """Dual function of one vertex on one region (element or boundary face)."""

    vertex: int
    kind: str                 # "element" or "face"
    region: int
    region_vertices: np.ndarray
    points: np.ndarray        # coordinates of the region vertices
    local: int
    measure: float
    coefficients: np.ndarray

    @property
    def region_dim(self) -> int:
        return self.points.shape[0] - 1

    def __call__(self, bary) -> np.ndarray:
        """Evaluate at barycentric coordinates of the region."""
        return np.asarray(bary) @ self.coefficients

    def moments(self, degree: int = 2) -> np.ndarray:
        """``int_K psi phi_b`` for every region vertex b."""
        bary, w = simplex_rule(degree, self.region_dim)
        return self.measure * (w * self(bary)) @ bary

    def integral(self, degree: int = 1) -> float:
        bary, w = simplex_rule(degree, self.region_dim)
        return float(self.measure * np.dot(w, self(bary)))

    def l2_norm_sq(self, degree: int = 2) -> float:
        bary, w = simplex_rule(degree, self.region_dim)
        return float(self.measure * np.dot(w, self(bary) ** 2))

    def l1_norm(self) -> float:
        return dual_l1_norm(self.points, self.local)


def dual_l1_norm(points, local: int, degree: int = 1) -> float:
    """Exact L1 norm of the dual function of vertex ``local`` on a simplex.

    psi changes sign on the level set ``phi_a = 1/(k+2)``; the positive part
    lives on the homothetic copy of the simplex at vertex ``a`` with ratio
    ``(k+1)/(k+2)``.  Both pieces are integrated by quadrature.
    """
    points = np.asarray(points, dtype=float)
    k = points.shape[0] - 1
    meas = simplex_measure(points)
    c = dual_coefficients(k, meas, local)
    bary, w = simplex_rule(degree, k)
    total = meas * np.dot(w, bary @ c)
    ratio = (k + 1) / (k + 2)
    a = points[local]
    sub = a + ratio * (points - a)
    # barycentric coordinates (w.r.t. the full simplex) of the sub-simplex nodes
    sub_bary = np.eye(k + 1) * ratio
    sub_bary[:, local] += 1.0 - ratio
    pos = simplex_measure(sub) * np.dot(w, (bary @ sub_bary) @ c)
    return float(2.0 * pos - total)


def _region(m: Mesh, K: int, kind: str):
    if kind == "element":
        verts = m.element_vertices(int(K))
    elif kind == "face":
        verts = m.faces[int(K)]
    else:
        raise ValueError("kind must be 'element' or 'face'")
    return np.asarray(verts)


def dual_function(m: Mesh, a: int, K: int, kind: str = "element") -> DualFunction:
    verts = _region(m, K, kind)
    hit = np.flatnonzero(verts == a)
    if hit.size == 0:
        raise ValueError(f"vertex {a} is not a vertex of {kind} {K}")
    pts = m.vertices[verts]
    meas = simplex_measure(pts)
    local = int(hit[0])
    return DualFunction(int(a), kind, int(K), verts, pts, local, meas,
                        dual_coefficients(pts.shape[0] - 1, meas, local))


@dataclass
class AveragingSets:
    """Averaging regions of every vertex.

    Interior vertices average over all elements of their patch.  For boundary
    vertices ``face_vertex[i]`` averages over face ``face_id[i]`` (global id)
    with measure ``face_measure[i]``; ``face_element[i]`` is the patch element
    that contributed it.
    """

    mesh: Mesh
    face_vertex: np.ndarray
    face_id: np.ndarray
    face_element: np.ndarray
    face_measure: np.ndarray

    @cached_property
    def total_measure(self) -> np.ndarray:
        """``sum_{K in K_a} |K|`` per vertex."""
        m = self.mesh
        tot = np.zeros(m.num_vertices)
        interior = ~m.boundary_vertex_flags
        counts = np.diff(m.incidence.indptr)
        tot[interior] = counts[interior] * m.element_volume
        np.add.at(tot, self.face_vertex, self.face_measure)
        return tot

    def regions(self, a: int):
        """``[(kind, region id, weight), ...]`` for vertex ``a``."""
        m = self.mesh
        if not m.boundary_vertex_flags[a]:
            els = m.vertex_patch(a)
            w = m.element_volume / self.total_measure[a]
            return [("element", int(e), w) for e in els]
        sel = np.flatnonzero(self.face_vertex == a)
        tot = self.total_measure[a]
        return [("face", int(self.face_id[i]), self.face_measure[i] / tot) for i in sel]

    def weights(self, a: int) -> np.ndarray:
        return np.array([w for _, _, w in self.regions(a)])


def build_averaging_sets(m: Mesh, pick: str = "lowest") -> AveragingSets:
    """Select the averaging regions.

    For a boundary vertex ``a`` and each patch element owning a boundary face
    through ``a``, the face with the smallest global id is chosen
    (``pick="highest"`` takes the largest, for sensitivity checks).
    """
    if pick not in ("lowest", "highest"):
        raise ValueError("pick must be 'lowest' or 'highest'")
    d = m.dim
    bf = np.array(m.boundary_faces(), dtype=np.int64).reshape(-1, 2)
    eids, locs = bf[:, 0], bf[:, 1]
    gids = m.element_faces[eids, locs]
    el = m.elements[eids]
    # every (element, face, vertex-in-face) triple
    mask = np.ones((bf.shape[0], d + 1), dtype=bool)
    mask[np.arange(bf.shape[0]), locs] = False
    rows, cols = np.nonzero(mask)
    tri_e = eids[rows]
    tri_f = gids[rows]
    tri_a = el[rows, cols]
    order = np.lexsort((tri_f, tri_a, tri_e))
    tri_e, tri_f, tri_a = tri_e[order], tri_f[order], tri_a[order]
    first = np.ones(tri_e.size, dtype=bool)
    if pick == "lowest":
        first[1:] = (tri_e[1:] != tri_e[:-1]) | (tri_a[1:] != tri_a[:-1])
    else:
        first[:-1] = (tri_e[1:] != tri_e[:-1]) | (tri_a[1:] != tri_a[:-1])
    fe, ff, fa = tri_e[first], tri_f[first], tri_a[first]
    meas_by_face = np.array([simplex_measure(m.vertices[m.faces[f]]) for f in ff]) \
        if d > 1 else np.ones(ff.size)
    return AveragingSets(m, fa, ff, fe, meas_by_face)


def _element_points(m: Mesh, bary):
    X = m.vertices[m.elements]                     # (E, d+1, d)
    return np.einsum("qk,ekd->eqd", bary, X)


def interpolate(m: Mesh, v, degree: int = 3, sets: AveragingSets | None = None) -> np.ndarray:
    """Nodal values of the averaged Scott-Zhang interpolant of callable ``v``.

    ``v`` maps an (N, d) array of points to N values.
    """
    d = m.dim
    sets = build_averaging_sets(m) if sets is None else sets
    num = np.zeros(m.num_vertices)

    bary, w = simplex_rule(degree, d)
    pts = _element_points(m, bary)
    vals = np.asarray(v(pts.reshape(-1, d)), dtype=float).reshape(pts.shape[:2])
    # |K| int_K psi_{j,K} v  for every element and local vertex j
    psi = (d + 1) * ((d + 2) * bary - 1.0)            # (q, d+1), times 1/|K|
    mom = m.element_volume * np.einsum("q,eq,qj->ej", w, vals, psi)
    interior = ~m.boundary_vertex_flags
    el = m.elements
    keep = interior[el]
    np.add.at(num, el[keep], mom[keep])

    if sets.face_vertex.size:
        k = d - 1
        fb, fw = simplex_rule(degree, k)
        fverts = m.faces[sets.face_id]                 # (S, d)
        fx = np.einsum("qk,skd->sqd", fb, m.vertices[fverts])
        fvals = np.asarray(v(fx.reshape(-1, d)), dtype=float).reshape(fx.shape[:2])
        local = np.argmax(fverts == sets.face_vertex[:, None], axis=1)
        lam = fb[:, local].T                           # (S, q)
        integ = (k + 1) * np.einsum("q,sq,sq->s", fw, (k + 2) * lam - 1.0, fvals)
        np.add.at(num, sets.face_vertex, sets.face_measure * integ)
    return num / sets.total_measure


def evaluate_p1(m: Mesh, coeffs, x) -> np.ndarray:
    """Evaluate the P1 function with nodal values ``coeffs`` at points ``x``."""
    eids, bary = m.locate(np.atleast_2d(x))
    verts = m.element_vertices(eids)
    return np.einsum("ek,ek->e", np.asarray(coeffs)[verts], bary)


class P1Function:
    """Callable wrapper of a nodal coefficient vector on a mesh."""

    def __init__(self, m: Mesh, coeffs):
        self.mesh = m
        self.coeffs = np.asarray(coeffs, dtype=float)

    def __call__(self, x):
        return evaluate_p1(self.mesh, self.coeffs, x)

    def gradients(self) -> np.ndarray:
        """Per-element constant gradient, shape (E, d)."""
        return _element_gradients(self.mesh, self.coeffs)


def _element_gradients(m: Mesh, coeffs):
    grads = np.array([s.barycentric_gradients for s in m.perm_simplices])  # (P, d+1, d)
    g = grads[m.element_perm_ids]
    return np.einsum("ek,ekd->ed", np.asarray(coeffs)[m.elements], g)


def fe_error(m: Mesh, coeffs, v=None, grad_v=None, norm: str = "L2", degree: int = 6) -> float:
    """Error between a field and a P1 function, by element quadrature.

    ``norm="L2"`` needs ``v``; ``norm="H1"`` (the seminorm) needs ``grad_v``.
    """
    d = m.dim
    bary, w = simplex_rule(degree, d)
    pts = _element_points(m, bary)
    flat = pts.reshape(-1, d)
    coeffs = np.asarray(coeffs, dtype=float)
    if norm == "L2":
        if v is None:
            raise ValueError("L2 error needs the field v")
        uh = np.einsum("qk,ek->eq", bary, coeffs[m.elements])
        ex = np.asarray(v(flat), dtype=float).reshape(uh.shape)
        err = np.einsum("q,eq->", w, (ex - uh) ** 2)
    elif norm == "H1":
        if grad_v is None:
            raise ValueError("H1 error needs the analytic gradient grad_v")
        gh = _element_gradients(m, coeffs)              # (E, d)
        gx = np.asarray(grad_v(flat), dtype=float).reshape(pts.shape)
        err = np.einsum("q,eqd->", w, (gx - gh[:, None, :]) ** 2)
    else:
        raise ValueError("norm must be 'L2' or 'H1'")
    return float(np.sqrt(max(err, 0.0) * m.element_volume))


def interp_error(m: Mesh, v, grad_v=None, norm: str = "L2", degree: int = 6,
                 interp_degree: int = 3) -> float:
    """``||v - I_h v||`` in L2 or the H1 seminorm."""
    coeffs = interpolate(m, v, degree=interp_degree)
    return fe_error(m, coeffs, v=v, grad_v=grad_v, norm=norm, degree=degree)


def _direct_solve(A, b, tol=1e-10):
    x = spla.spsolve(A.tocsc(), b)
    res = np.linalg.norm(A @ x - b)
    if not np.isfinite(res) or res > tol * max(np.linalg.norm(b), 1e-300):
        raise SolverError(f"direct solve residual {res:.3e} too large")
    return x


def l2_project(m: Mesh, v, degree: int = 3) -> np.ndarray:
    """Nodal coefficients of the L2(Omega) projection of ``v`` onto V_h."""
    M = assemble(m, "mass")
    return _direct_solve(M, load_vector(m, v, degree=degree))


def h1_project(coarse: Mesh, fine: Mesh, v_free) -> np.ndarray:
    """H1_0 (Ritz) projection onto the coarse space of a fine free-dof vector."""
    from .multilevel import prolongation_matrix

    P = prolongation_matrix(coarse, fine, free=True)
    Af = assemble(fine, "stiffness", "dirichlet")
    Ac = assemble(coarse, "stiffness", "dirichlet")
    if P.shape[1] == 0:
        return np.zeros(0)
    return _direct_solve(Ac, P.T @ (Af @ np.asarray(v_free, dtype=float)))


def free_dofs(m: Mesh) -> DofMap:
    return DofMap.from_mesh(m)
