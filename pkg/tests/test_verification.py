import csv
import io
import json
import math

import numpy as np
import pytest

from bpxhd.assembly import assemble
from bpxhd.mesh import build
from bpxhd.multilevel import build_hierarchy
from bpxhd.spectral import dense_generalized_eig
from bpxhd.verification import (CHECKS, check_bpx_sandwich, check_dual_norms, check_freudenthal,
                                check_inverse_ref, check_local_inverse, check_local_mass,
                                check_norm_equivalence, check_poincare, check_psc, check_scs,
                                check_trace_discrete, loglog_slope, reports_csv, reports_json,
                                rho_freudenthal, run_checks, scs_norm, sweep)


@pytest.mark.parametrize("d", range(1, 9))
def test_inverse_ref(d):
    r = check_inverse_ref(d)
    assert r.status == "pass"
    assert r.details["lambda_max"] == pytest.approx(d + 1, abs=1e-9)


def test_inverse_ref_values():
    assert check_inverse_ref(1).measured == pytest.approx(2 * math.sqrt(3))
    assert check_inverse_ref(2).measured == pytest.approx(6.0)
    assert check_inverse_ref(5).details["lambda_max"] == pytest.approx(6.0)


@pytest.mark.parametrize("d", range(1, 7))
def test_equality_claims_pass(d):
    assert check_local_mass(d).status == "pass"
    if d <= 5:
        assert all(r.status == "pass" for r in check_dual_norms(d))
        for n in (1, 2):
            assert all(r.status == "pass" for r in check_freudenthal(d, n))


def test_local_inverse_examples():
    r = check_local_inverse(build(1, 2))
    assert r.measured == pytest.approx(2 * math.sqrt(3) / 0.5)
    r2 = check_local_inverse(build(1, 4))
    assert r2.measured == pytest.approx(2 * r.measured, rel=1e-10)
    for d in (2, 3):
        a, b = check_local_inverse(build(d, 1)), check_local_inverse(build(d, 2))
        assert b.measured == pytest.approx(2 * a.measured, rel=1e-10)
    # constants lie in the stiffness kernel
    s = build(2, 1).perm_simplices[0]
    from bpxhd.assembly import local_stiffness
    assert np.abs(local_stiffness(s) @ np.ones(3)).max() < 1e-14


def test_trace_discrete_examples():
    m = build(1, 4)
    B = assemble(m, "boundary_mass").toarray()
    M = assemble(m, "mass").toarray()
    assert np.count_nonzero(B) == 2 and B[0, 0] == 1 and B[-1, -1] == 1
    lam = dense_generalized_eig(B, M)[-1]
    r = check_trace_discrete(m)[0]
    assert r.measured == pytest.approx(lam)
    v = np.zeros(m.num_vertices)
    v[2] = 1.0
    assert v @ B @ v == 0.0
    for d, n in [(1, 4), (2, 4), (3, 2)]:
        a = check_trace_discrete(build(d, n))[0].measured
        b = check_trace_discrete(build(d, 2 * n))[0].measured
        assert 1.7 <= b / a <= 2.4


def test_norm_equivalence_single_level():
    H = build_hierarchy(1, 1)
    lo, hi = check_norm_equivalence(1, 1)[:2]
    lam = dense_generalized_eig(H.stiffness[0].toarray(), H.h(1) ** -2 * H.mass[0].toarray())
    assert lo.measured == pytest.approx(lam[0]) and hi.measured == pytest.approx(lam[-1])
    H2 = build_hierarchy(2, 2)
    lo2, hi2 = check_norm_equivalence(2, 1)[:2]
    assert lo2.measured == pytest.approx(lo2.measured)


@pytest.mark.xfail(strict=True, reason="measured max/min of the norm-equivalence condition "
                   "number over J=2,3,4 in 1D is 1.52 (3.40, 4.67, 5.17): it keeps growing "
                   "slowly before levelling off")
def test_norm_equivalence_flat_in_j():
    ks = [check_norm_equivalence(1, J)[0].details["kappa"] for J in (2, 3, 4)]
    assert max(ks) / min(ks) <= 1.3


def test_norm_equivalence_bounds_finite():
    for d in (1, 2):
        reps = check_norm_equivalence(d, 3)
        assert all(math.isfinite(r.ratio) and r.ratio > 0 for r in reps)
        assert reps[0].measured <= reps[1].measured


def test_scs_examples():
    H = build_hierarchy(1, 3)
    r13, r12 = check_scs(1, 1, 3), check_scs(1, 1, 2)
    assert 0.55 <= r13.measured / r12.measured <= 0.85
    # l = k reduces to the global inverse inequality
    A = H.stiffness[-1].toarray()
    M = H.mass[-1].toarray()
    assert scs_norm(H, 3, 3) == pytest.approx(math.sqrt(dense_generalized_eig(A, M)[-1]))
    with pytest.raises(ValueError):
        scs_norm(H, 3, 2)


def test_scs_orthogonality_1d(rng):
    # in 1D a(v, w) = 0 when v is coarse and w vanishes at the coarse nodes
    H = build_hierarchy(1, 3)
    v = H.prolong_to_fine(1, rng.standard_normal(1))
    w = rng.standard_normal(7)
    w[1::2] = 0.0                  # fine nodes 1/4, 1/2, 3/4 are the level-2 nodes
    v2 = H.prolong_to_fine(2, rng.standard_normal(3))
    assert abs(v2 @ H.stiffness[-1] @ w) < 1e-12
    assert abs(v @ H.stiffness[-1] @ w) < 1e-12


def test_poincare():
    for d, n in [(1, 32), (2, 16)]:
        r = check_poincare(d, n)
        assert r.status == "pass" and r.measured >= 0.99 * r.reference


def test_psc_check():
    assert check_psc(1, 2, 20).status == "pass"


def test_sandwich_check():
    lo, hi = check_bpx_sandwich(1, 3)
    assert 0.4 <= lo.measured <= hi.measured <= 2.5


def test_bound_ratios_stable():
    reps = run_checks(["local_inverse", "trace_discrete", "scs", "norm_equiv", "bpx_sandwich"])
    groups = {}
    for r in reps:
        assert r.status == "recorded" and math.isfinite(r.ratio) and r.ratio > 0
        groups.setdefault((r.claim, r.d), []).append(r.ratio)
    for vals in groups.values():
        fitted = np.array(vals) / vals[0]
        assert fitted.max() <= 10 and fitted.min() >= 0.1


def test_report_serialization():
    reps = run_checks(["inverse_ref"], dmax=3)
    text = reports_csv(reps)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert text.splitlines()[0] == "claim,d,J,n,variant,measured,reference,ratio,status,seed"
    assert [r["status"] for r in rows] == ["pass"] * 3
    assert json.loads(reports_json(reps))[0]["claim"] == "inverse_ref"


def test_default_run_all_pass():
    reps = run_checks()
    assert not [r for r in reps if r.failed]
    assert {r.claim.split("_")[0] for r in reps} >= {"inverse", "freudenthal", "dual", "psc"}
    assert set(CHECKS) >= {"inverse_ref", "trace_discrete", "norm_equiv", "scs"}


def test_rho():
    assert rho_freudenthal(3) == pytest.approx(2 * math.sqrt(3) + 2 * math.sqrt(6))


def test_sweep_examples():
    res = sweep([1], [3], ["exact_mass"])
    assert 1 <= res.rows[0]["kappa"] <= 10
    base = sweep([2], [2, 4], ["none"])
    k = {r["J"]: r["kappa"] for r in base.rows}
    assert k[4] >= 16 * k[2]
    empty = sweep([1, 2], [], ["exact_mass"])
    assert empty.rows == [] and empty.csv().strip() == "d,J,variant,lambda_min,lambda_max,kappa,method"


def test_sweep_slope_and_failures():
    res = sweep([1, 2, 3], [2, 3], ["exact_mass", "diag"])
    assert len(res.rows) == 12
    for v, s in res.slopes.items():
        assert s["J"] == 3 and math.isfinite(s["slope"]) and s["slope"] <= 10
    bad = sweep([1], [2], ["nonsense"])
    assert bad.rows == [] and len(bad.failures) == 1


def test_loglog_slope():
    assert loglog_slope([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)
    assert math.isnan(loglog_slope([1], [1]))
