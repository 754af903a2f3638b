import numpy as np
import pytest

from bpxhd.assembly import assemble
from bpxhd.errors import BudgetExceededError
from bpxhd.mesh import nestedness_check
from bpxhd.multilevel import Hierarchy, build_hierarchy, prolongation_matrix


@pytest.mark.parametrize("d,J,counts", [(1, 3, [1, 3, 7]), (2, 2, [1, 9]), (3, 2, [1, 27]),
                                        (2, 4, [1, 9, 49, 225])])
def test_free_dof_counts(d, J, counts):
    H = build_hierarchy(d, J)
    assert [H.num_free(l) for l in range(1, J + 1)] == counts
    assert [m.grid_n for m in H.meshes] == [2 ** l for l in range(1, J + 1)]


def test_level_sizes_and_gamma():
    H = build_hierarchy(3, 3)
    for l in range(1, 3):
        assert H.h(l + 1) / H.h(l) == 0.5
    assert H.h(1) == pytest.approx(np.sqrt(3) / 2)
    assert H.gamma ** 2 == pytest.approx(0.5)
    assert H.is_nested()
    for a, b in zip(H.meshes[:-1], H.meshes[1:]):
        assert nestedness_check(a, b)


def test_budget_names_level():
    with pytest.raises(BudgetExceededError) as exc:
        Hierarchy(3, 5, budget=1000)
    assert exc.value.level is not None and "level" in str(exc.value)


def test_prolongation_constants_full():
    H = build_hierarchy(2, 3)
    for l in range(1, 3):
        P = prolongation_matrix(H.mesh(l), H.mesh(l + 1), free=False)
        assert np.allclose(P @ np.ones(P.shape[1]), 1.0)


def test_prolong_1d_midpoints(rng):
    H = build_hierarchy(1, 3)
    v = rng.standard_normal(3)
    w = H.prolong(2, v)
    full = np.concatenate([[0], v, [0]])
    assert np.allclose(w[1::2], v)
    assert np.allclose(w[0::2], 0.5 * (full[:-1] + full[1:]))


@pytest.mark.parametrize("d,J", [(1, 4), (2, 3), (3, 3)])
def test_energy_invariance_and_galerkin(d, J, rng):
    H = build_hierarchy(d, J)
    for l in range(1, J):
        v = rng.standard_normal(H.num_free(l))
        w = H.prolong(l, v)
        assert w @ (H.stiffness[l] @ w) == pytest.approx(v @ (H.stiffness[l - 1] @ v), rel=1e-10)
        assert H.galerkin_defect(l, "stiffness") < 1e-10
        assert H.galerkin_defect(l, "mass") < 1e-10


@pytest.mark.parametrize("d,J", [(1, 4), (2, 3)])
def test_restrict_adjoint(d, J, rng):
    H = build_hierarchy(d, J)
    for l in range(1, J):
        v = rng.standard_normal(H.num_free(l))
        r = rng.standard_normal(H.num_free(l + 1))
        assert H.restrict(l, r) @ v == pytest.approx(r @ H.prolong(l, v), rel=1e-13)


def test_restrict_mass_ones():
    H = build_hierarchy(2, 3)
    for l in range(1, 3):
        fine = assemble(H.mesh(l + 1), "mass") @ np.ones(H.mesh(l + 1).num_vertices)
        coarse = assemble(H.mesh(l), "mass") @ np.ones(H.mesh(l).num_vertices)
        P = prolongation_matrix(H.mesh(l), H.mesh(l + 1), free=False)
        assert np.allclose(P.T @ fine, coarse)


def test_restrict_1d_stencil():
    H = build_hierarchy(1, 2)
    r = np.zeros(3)
    r[:] = 1
    assert H.restrict(1, r) == pytest.approx([2.0])     # 1/2 + 1 + 1/2


@pytest.mark.parametrize("d,J", [(1, 4), (2, 3)])
def test_l2_projection_properties(d, J, rng):
    H = build_hierarchy(d, J)
    v = rng.standard_normal(H.num_free(J))
    for l in range(1, J + 1):
        assert H.composite_galerkin_defect(l) < 1e-10
        vl = rng.standard_normal(H.num_free(l))
        assert np.allclose(H.level_l2_project(l, H.prolong_to_fine(l, vl)), vl, atol=1e-10)
        q = H.project_fine(l, v)
        assert np.allclose(H.project_fine(l, q), q, atol=1e-10)
        for k in range(1, l + 1):
            assert np.allclose(H.project_fine(k, q), H.project_fine(k, v), atol=1e-10)
    total = sum(H.project_fine(l, v) - (H.project_fine(l - 1, v) if l > 1 else 0)
                for l in range(1, J + 1))
    assert np.allclose(total, v, atol=1e-10)


def test_slice_norm_scaling(rng):
    """|v|_H1/||v|| on the detail slices range(Q_l - Q_{l-1}), l >= 2, scales like 1/h_l."""
    for d, J in [(1, 6), (2, 4)]:
        _slice_steps(d, J, rng)


def _slice_steps(d, J, rng):
    H = build_hierarchy(d, J)
    A, M = H.stiffness[-1], H.mass[-1]
    means = []
    for l in range(2, J + 1):
        vals = []
        for _ in range(50):
            v = rng.standard_normal(H.num_free(J))
            w = H.project_fine(l, v) - H.project_fine(l - 1, v)
            vals.append(np.sqrt((w @ A @ w) / (w @ M @ w)))
        means.append(np.mean(vals))
    steps = np.array(means[1:]) / np.array(means[:-1])
    assert np.all((steps >= 1.6) & (steps <= 2.4))
