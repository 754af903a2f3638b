import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bpxhd.errors import BudgetExceededError, DomainError
from bpxhd.mesh import Mesh, boundary_faces, build, locate, nestedness_check, vertex_patch


def brute_locate(m, x, tol=1e-12):
    """All elements whose closure contains x, by solving for barycentrics directly."""
    hits = []
    for e in range(m.num_elements):
        v = m.vertices[m.elements[e]]
        T = np.vstack([v.T, np.ones(m.dim + 1)])
        lam = np.linalg.solve(T, np.append(x, 1.0))
        if lam.min() >= -tol:
            hits.append((e, lam))
    return hits


@pytest.mark.parametrize("d,n,ne,nv", [(1, 4, 4, 5), (3, 1, 6, 8), (2, 2, 8, 9), (3, 2, 48, 27)])
def test_build_counts(d, n, ne, nv):
    m = build(d, n)
    assert m.num_elements == ne and m.num_vertices == nv
    assert len(m.elements) == ne
    assert math.fsum(m.element_simplex(e).volume for e in range(ne)) == pytest.approx(1.0, abs=1e-12)
    assert m.mesh_size == pytest.approx(math.sqrt(d) / n)


@pytest.mark.parametrize("d,n", [(1, 3), (2, 3), (3, 2), (4, 1), (4, 2)])
def test_mesh_invariants(d, n):
    m = build(d, n)
    assert m.num_elements == n ** d * math.factorial(d)
    edges = [np.sort(m.element_simplex(e).edge_lengths_sq()) for e in range(m.num_elements)]
    assert np.abs(np.array(edges) - edges[0]).max() < 1e-12
    # conformity by hashing sorted vertex tuples
    counts = {}
    for row in m.elements:
        for i in range(d + 1):
            key = tuple(sorted(np.delete(row, i)))
            counts[key] = counts.get(key, 0) + 1
    bflags = m.boundary_vertex_flags
    for key, c in counts.items():
        assert c in (1, 2)
        if c == 1:
            assert bflags[list(key)].all()
    nb = sum(c == 1 for c in counts.values())
    assert nb == len(boundary_faces(m)) == 2 * d * n ** (d - 1) * math.factorial(d - 1)
    assert m.expected_boundary_face_count == nb


def test_boundary_face_examples():
    assert len(boundary_faces(build(1, 4))) == 2
    assert len(boundary_faces(build(2, 1))) == 4
    assert len(boundary_faces(build(3, 2))) == 48


def test_boundary_vertices():
    m = build(2, 3)
    g = m.grid_coords()
    on = ((g == 0) | (g == 3)).any(axis=1)
    assert np.array_equal(m.boundary_vertex_flags, on)
    assert m.interior_vertex_ids.size == 4


def test_vertex_ids_lexicographic():
    m = build(2, 2)
    assert np.allclose(m.vertices[:3], [[0, 0], [0, 0.5], [0, 1]])


def test_locate_example_2d():
    m = build(2, 1)
    e, lam = locate(m, np.array([0.7, 0.2]))
    v = m.vertices[m.elements[int(e)]]
    assert {tuple(p) for p in v} == {(0, 0), (1, 0), (1, 1)}
    assert np.allclose(lam @ v, [0.7, 0.2])
    assert lam.min() >= 0 and lam.sum() == pytest.approx(1)


def test_locate_example_3d_tie():
    m = build(3, 2)
    x = np.array([0.9, 0.1, 0.6])
    e, lam = locate(m, x)
    multi, _ = m.element_cube_perm(np.atleast_1d(e))
    assert tuple(multi[0]) == (1, 0, 1)
    hits = brute_locate(m, x)
    assert int(e) == min(h[0] for h in hits)
    assert np.allclose(lam @ m.vertices[m.elements[int(e)]], x)


def test_locate_vertex():
    m = build(2, 3)
    x = m.vertices[5]
    e, lam = locate(m, x)
    assert np.isclose(lam.max(), 1.0)
    assert 5 in m.elements[int(e)]


def test_locate_outside():
    with pytest.raises(DomainError):
        locate(build(2, 2), np.array([1.2, 0.5]))


@pytest.mark.parametrize("d,n", [(1, 5), (2, 3), (3, 2), (4, 1)])
def test_locate_matches_brute_force(d, n, rng):
    m = build(d, n)
    pts = rng.random((200, d))
    # include points on grid planes and diagonals
    pts[:20] = np.round(pts[:20] * n) / n
    pts[20:30, :] = pts[20:30, :1]
    eids, lam = m.locate(pts)
    for x, e, l in zip(pts, eids, lam):
        hits = brute_locate(m, x)
        assert int(e) == min(h[0] for h in hits)
        assert l.min() >= -1e-12 and l.sum() == pytest.approx(1)
        assert np.allclose(l @ m.vertices[m.elements[e]], x, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_locate_contains_point(d, n, seed):
    m = build(d, n)
    x = np.random.default_rng(seed).random((50, d))
    eids, lam = m.locate(x)
    assert lam.min() >= -1e-12
    recon = np.einsum("pi,pij->pj", lam, m.vertices[m.elements[eids]])
    assert np.allclose(recon, x, atol=1e-12)


def test_vertex_patch_examples():
    m1 = build(1, 4)
    assert len(vertex_patch(m1, 2)) == 2
    m2 = build(2, 3)
    for a in m2.interior_vertex_ids:
        assert len(vertex_patch(m2, a)) == 6
    m = build(2, 1)
    corner = 0
    patch = vertex_patch(m, corner)
    assert len(patch) == sum(corner in row for row in m.elements)


def test_patch_incidence_consistent():
    m = build(3, 2)
    for a in range(m.num_vertices):
        assert set(vertex_patch(m, a)) == {e for e in range(m.num_elements) if a in m.elements[e]}


@pytest.mark.parametrize("d", [2, 3])
def test_interior_patch_convex(d, rng):
    m = build(d, 2)
    a = int(m.interior_vertex_ids[0])
    patch = set(vertex_patch(m, a).tolist())
    verts = m.vertices[m.elements[list(patch)]]
    samples = []
    for v in verts:
        w = rng.dirichlet(np.ones(d + 1), 20)
        samples.append(w @ v)
    p = np.vstack(samples)
    i, j = rng.integers(0, len(p), (2, 300))
    mid = 0.5 * (p[i] + p[j])
    for x in mid:
        assert any(e in patch for e, _ in brute_locate(m, x, tol=1e-10))


@pytest.mark.parametrize("d,nc", [(1, 2), (2, 1), (3, 1), (2, 2), (4, 1)])
def test_nestedness(d, nc):
    assert nestedness_check(build(d, nc), build(d, 2 * nc))


def test_nestedness_mismatch():
    with pytest.raises(ValueError):
        nestedness_check(build(2, 1), build(3, 2))


def test_budget_guard():
    with pytest.raises(BudgetExceededError):
        Mesh(3, 10, budget=100)


def test_budget_env(monkeypatch):
    monkeypatch.setenv("BPXHD_BUDGET", "50")
    with pytest.raises(BudgetExceededError):
        Mesh(2, 10)


def test_serialization():
    m = build(2, 2)
    doc = json.loads(m.to_json())
    assert doc["dim"] == 2 and doc["num_vertices"] == 9 and doc["num_elements"] == 8
    assert doc["boundary_vertex_ids"] == m.boundary_vertex_ids.tolist()
    lines = m.write_elements_csv().strip().splitlines()
    assert lines[0].startswith("elem_id,cube_")
    assert len(lines) == 9
