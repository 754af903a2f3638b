"""Numerical checks of the closed-form constants and scaling laws.

Each check returns :class:`ConstantReport` rows.  Equality claims carry a
tolerance and a pass/fail status; bound claims (whose absolute constants are
unknown) are ``recorded`` with the ratio of the measured value to the
reference expression evaluated with all absolute constants set to one.

For the Freudenthal family the shape parameter is
``rho = 2 sqrt(d) + (d-1) sqrt(2d)`` and the quasi-uniformity parameter is
``sigma = 1``.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .assembly import (assemble, local_boundary_mass, local_mass, local_stiffness,
                       local_trace_mass, reference_mass, reference_stiffness)
from .bpx import VARIANTS, BpxOperator, kappa, psc_infimum, psc_quadratic_form, telescoped_operator
from .interpolation import dual_coefficients, dual_l1_norm
from .mesh import Mesh, build, nestedness_check
from .multilevel import Hierarchy, build_hierarchy
from .quadrature import simplex_rule
from .simplex import Simplex, freudenthal_simplex, simplex_measure
from .spectral import DENSE_LIMIT, OperatorPair, dense_generalized_eig, lanczos_extremes

__all__ = [
    "ConstantReport", "rho_freudenthal", "check_inverse_ref", "check_freudenthal",
    "check_local_mass", "check_dual_norms", "check_local_inverse",
    "check_trace_discrete", "check_norm_equivalence", "check_scs", "check_poincare",
    "check_psc", "check_bpx_sandwich", "SweepResult", "sweep", "loglog_slope",
    "CHECKS", "run_checks", "reports_csv", "reports_json", "random_simplex",
]

CSV_FIELDS = ["claim", "d", "J", "n", "variant", "measured", "reference", "ratio",
              "status", "seed"]
EQ_TOL = 1e-9


@dataclass
class ConstantReport:
    claim: str
    d: int
    measured: float
    reference: float
    status: str = "recorded"
    J: int | None = None
    n: int | None = None
    variant: str = ""
    seed: int = 0
    tolerance: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.reference == 0:
            return math.inf if self.measured else 1.0
        return self.measured / self.reference

    @property
    def failed(self) -> bool:
        return self.status == "fail"

    def row(self) -> dict:
        return {"claim": self.claim, "d": self.d, "J": "" if self.J is None else self.J,
                "n": "" if self.n is None else self.n, "variant": self.variant,
                "measured": repr(float(self.measured)), "reference": repr(float(self.reference)),
                "ratio": repr(float(self.ratio)), "status": self.status, "seed": self.seed}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ratio"] = self.ratio
        return out


def _equality(claim, d, measured, reference, tol=EQ_TOL, **kw):
    ok = abs(measured - reference) <= tol
    return ConstantReport(claim, d, measured, reference, "pass" if ok else "fail",
                          tolerance=tol, **kw)


def rho_freudenthal(d: int) -> float:
    return 2.0 * math.sqrt(d) + (d - 1) * math.sqrt(2.0 * d)


def random_simplex(d: int, rng, min_quality: float = 1e-3) -> Simplex:
    """Random simplex in the unit cube, rejecting badly shaped draws."""
    while True:
        v = rng.random((d + 1, d))
        try:
            s = Simplex(v)
        except ValueError:
            continue
        if s.inradius / s.diameter > min_quality / d:
            return s


# -- reference element ------------------------------------------------------
def check_inverse_ref(d: int) -> ConstantReport:
    """``lambda_max(M_d^{-1} K_d) = d+1`` and the reference Rayleigh sup."""
    lam = dense_generalized_eig(reference_stiffness(d), reference_mass(d))
    lmax = lam[-1]
    sup = math.sqrt((d + 1) * (d + 2) * lmax)
    ref = (d + 1) * math.sqrt(d + 2)
    rep = _equality("inverse_ref", d, sup, ref)
    rep.details = {"lambda_max": float(lmax), "lambda_max_ref": d + 1}
    if abs(lmax - (d + 1)) > EQ_TOL:
        rep.status = "fail"
    return rep


def check_local_mass(d: int, seed: int = 0) -> ConstantReport:
    """Closed-form local mass and stiffness against quadrature on a random simplex."""
    rng = np.random.default_rng(seed)
    s = random_simplex(d, rng)
    bary, w = simplex_rule(2, d)
    Mq = s.volume * np.einsum("q,qi,qj->ij", w, bary, bary)
    g = s.barycentric_gradients
    # stiffness oracle: finite differences of the barycentric map
    eps = 1e-6
    x0 = s.vertices.mean(axis=0)
    G = np.empty((d + 1, d))
    for k in range(d):
        e = np.zeros(d)
        e[k] = eps
        G[:, k] = (s.barycentric(x0 + e) - s.barycentric(x0 - e)) / (2 * eps)
    Kq = s.volume * G @ G.T
    err_m = np.abs(local_mass(s) - Mq).max() / np.abs(Mq).max()
    err_k = np.abs(local_stiffness(s) - Kq).max() / np.abs(Kq).max()
    rep = _equality("mass_formula", d, float(err_m), 0.0, tol=1e-10, seed=seed)
    rep.details = {"stiffness_rel_err": float(err_k), "gradient_rows_sum": float(abs(g.sum(0)).max())}
    if err_k > 1e-7:
        rep.status = "fail"
    return rep


def check_freudenthal(d: int, n: int) -> list[ConstantReport]:
    m = build(d, n)
    out = []
    out.append(_equality("freudenthal_count", d, m.num_elements,
                         n ** d * math.factorial(d), tol=0, n=n))
    vol = math.fsum(s.volume for s in m.perm_simplices) * m.num_cubes
    out.append(_equality("freudenthal_volume", d, vol, 1.0, tol=1e-12, n=n))
    ref_edges = m.perm_simplices[0].edge_lengths_sq()
    spread = max(np.abs(s.edge_lengths_sq() - ref_edges).max() for s in m.perm_simplices)
    out.append(_equality("freudenthal_congruence", d, float(spread), 0.0, tol=1e-12, n=n))
    s = m.perm_simplices[0]
    out.append(_equality("freudenthal_shape_ratio", d, s.shape_ratio, rho_freudenthal(d),
                         tol=1e-10, n=n))
    unit = freudenthal_simplex(range(d))
    out.append(_equality("freudenthal_volume_unit", d, unit.volume, 1 / math.factorial(d)))
    out.append(_equality("freudenthal_diameter", d, unit.diameter, math.sqrt(d)))
    out.append(_equality("freudenthal_inradius", d, unit.inradius,
                         1 / (2 + (d - 1) * math.sqrt(2))))
    return out


def check_dual_norms(d: int, seed: int = 0, samples: int = 3) -> list[ConstantReport]:
    """L2 and L1 norms of dual functions on random simplices."""
    rng = np.random.default_rng(seed)
    worst_l2 = worst_l1 = 0.0
    bary, w = simplex_rule(2, d)
    ref_l1 = 2 * (d + 1) ** (d + 1) / (d + 2) ** d - 1
    for _ in range(samples):
        s = random_simplex(d, rng)
        for a in range(d + 1):
            c = dual_coefficients(d, s.volume, a)
            l2 = s.volume * np.dot(w, (bary @ c) ** 2)
            # compare in the scale-free form |K| ||psi||^2 = (d+1)^2
            worst_l2 = max(worst_l2, abs(l2 * s.volume - (d + 1) ** 2))
            worst_l1 = max(worst_l1, abs(dual_l1_norm(s.vertices, a) - ref_l1))
    return [
        ConstantReport("dual_l2", d, (d + 1) ** 2 + worst_l2, (d + 1) ** 2,
                       "pass" if worst_l2 <= EQ_TOL else "fail", seed=seed, tolerance=EQ_TOL),
        ConstantReport("dual_l1", d, ref_l1 + worst_l1, ref_l1,
                       "pass" if worst_l1 <= EQ_TOL else "fail", seed=seed, tolerance=EQ_TOL),
    ]


# -- bound-type claims --------------------------------------------------------
def check_local_inverse(m: Mesh) -> ConstantReport:
    """Largest ``|v|_H1 / ||v||_L2`` over one element, normalized by ``rho d^1.5 / h``."""
    d = m.dim
    sup = 0.0
    for s in m.perm_simplices:
        lam = dense_generalized_eig(local_stiffness(s), local_mass(s))
        sup = max(sup, math.sqrt(max(lam[-1], 0.0)))
    h = m.mesh_size
    ref = rho_freudenthal(d) * d ** 1.5 / h
    rep = ConstantReport("local_inverse", d, sup, ref, n=m.grid_n)
    rep.details = {"sup_times_h": sup * h}
    return rep


def check_trace_discrete(m: Mesh, seed: int = 0) -> list[ConstantReport]:
    """Global and per-element discrete trace constants."""
    d = m.dim
    h = m.mesh_size
    rho = rho_freudenthal(d)
    B = assemble(m, "boundary_mass")
    M = assemble(m, "mass")
    if m.num_vertices <= DENSE_LIMIT:
        sup2 = float(dense_generalized_eig(B, M)[-1])
        method = "dense"
    else:
        import scipy.sparse.linalg as spla
        lu = spla.splu(M.tocsc())
        sup2 = lanczos_extremes(OperatorPair(B, lu.solve, M.shape[0]), seed=seed).lambda_max
        method = "lanczos"
    glob = ConstantReport("trace_discrete", d, sup2, rho * d ** 2 / h, n=m.grid_n, seed=seed)
    glob.details = {"method": method, "sup2_times_h": sup2 * h}
    loc = 0.0
    for s in m.perm_simplices:
        lam = dense_generalized_eig(local_trace_mass(s), local_mass(s))
        loc = max(loc, float(lam[-1]))
    local = ConstantReport("trace_local", d, loc, rho * d ** 2 / h, n=m.grid_n)
    return [glob, local]


def _gamma():
    return 2.0 ** -0.5


def check_norm_equivalence(d: int, J: int) -> list[ConstantReport]:
    """Extremes of ``|v|_H1^2 / (A_hat v, v)`` and of the level-wise H1 sum form."""
    H = build_hierarchy(d, J)
    n = H.num_free(J)
    if n > DENSE_LIMIT:
        raise ValueError(f"norm equivalence check is dense; {n} unknowns exceed {DENSE_LIMIT}")
    A = H.stiffness[-1].toarray()
    G = telescoped_operator(H, -2)
    lam = dense_generalized_eig(A, G)
    rho, g = rho_freudenthal(d), _gamma()
    c_lo = rho ** -6 * d ** -10 * g ** 8 * (1 - g ** 2) * (1 - g ** 4)
    c_hi = rho ** 3.5 * d ** 6 / (g ** 2 * (1 - g))
    # sum_l |(Q_l - Q_{l-1}) v|_H1^2 as a matrix
    S = np.zeros_like(A)
    prev = np.zeros_like(A)
    MJ = H.mass[-1].toarray()
    for l in range(1, J + 1):
        Pl = H.prolong_to_fine(l, np.eye(H.num_free(l)))
        Ql = Pl @ np.linalg.solve(H.mass[l - 1].toarray(), Pl.T @ MJ)
        D = Ql - prev
        S += D.T @ A @ D
        prev = Ql
    lam_t = dense_generalized_eig(A, 0.5 * (S + S.T))
    t_lo = rho ** -5 * d ** -7 * g ** 4 * (1 - g ** 2) * (1 - g ** 4)
    t_hi = rho ** 1.5 * d ** 3 / (g ** 2 * (1 - g))
    out = [
        ConstantReport("norm_equiv_lower", d, float(lam[0]), c_lo, J=J, n=2 ** J),
        ConstantReport("norm_equiv_upper", d, float(lam[-1]), c_hi, J=J, n=2 ** J),
        ConstantReport("norm_equiv_thm_lower", d, float(lam_t[0]), t_lo, J=J, n=2 ** J),
        ConstantReport("norm_equiv_thm_upper", d, float(lam_t[-1]), t_hi, J=J, n=2 ** J),
    ]
    out[0].details = out[1].details = {"kappa": float(lam[-1] / lam[0])}
    return out


def scs_norm(H: Hierarchy, l: int, k: int) -> float:
    """``sup a(v, w) / (|v|_H1 ||w||_L2)`` over v in V_l, w in V_k (dense SVD)."""
    if not 1 <= l <= k <= H.J:
        raise ValueError("need 1 <= l <= k <= J")
    P = np.eye(H.num_free(l))
    for j in range(l, k):
        P = H.prolong(j, P)
    Ak = H.stiffness[k - 1].toarray()
    Al = H.stiffness[l - 1].toarray()
    Mk = H.mass[k - 1].toarray()
    La = sla.cholesky(Al, lower=True)
    Lm = sla.cholesky(Mk, lower=True)
    X = P.T @ Ak                                   # a(v, w) = x^T X y
    Y = sla.solve_triangular(La, X, lower=True)
    Y = sla.solve_triangular(Lm, Y.T, lower=True).T
    return float(np.linalg.svd(Y, compute_uv=False)[0])


def check_scs(d: int, l: int, k: int) -> ConstantReport:
    """Cross stiffness norm between levels, normalized by ``h_k^{-1}``."""
    H = build_hierarchy(d, k)
    s = scs_norm(H, l, k) * H.h(k)
    rho, g = rho_freudenthal(d), _gamma()
    rep = ConstantReport("scs", d, s, rho * d ** 1.5 * g ** (k - l), J=k, n=2 ** k)
    rep.details = {"l": l, "k": k}
    return rep


def check_poincare(d: int, n: int) -> ConstantReport:
    """Smallest nonzero Neumann eigenvalue against ``(pi / diam)^2``."""
    m = build(d, n)
    K = assemble(m, "stiffness").toarray()
    M = assemble(m, "mass").toarray()
    Z = sla.null_space((M @ np.ones(M.shape[0]))[None, :])
    lam = dense_generalized_eig(Z.T @ K @ Z, Z.T @ M @ Z)[0]
    ref = (math.pi / math.sqrt(d)) ** 2
    rep = ConstantReport("poincare", d, float(lam), ref, n=n)
    rep.status = "pass" if lam >= 0.99 * ref else "fail"
    return rep


def check_psc(d: int = 1, J: int = 2, samples: int = 20, seed: int = 0) -> ConstantReport:
    """Subspace-correction identity: ``<C^{-1} v, v>`` equals the decomposition infimum."""
    H = build_hierarchy(d, J)
    b = BpxOperator(H, "exact_mass")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        v = rng.standard_normal(H.num_free(J))
        q = psc_quadratic_form(b, v)
        inf = psc_infimum(H, v)
        worst = max(worst, abs(q - inf) / abs(inf))
    return ConstantReport("psc", d, worst, 0.0, "pass" if worst <= 1e-8 else "fail",
                          J=J, n=2 ** J, variant="exact_mass", seed=seed, tolerance=1e-8)


def check_bpx_sandwich(d: int, J: int) -> list[ConstantReport]:
    """Extremes of ``<C^{-1} v, v> / (A_hat v, v)``."""
    H = build_hierarchy(d, J)
    C = BpxOperator(H).dense()
    G = telescoped_operator(H, -2)
    Cinv = np.linalg.inv(C)
    lam = dense_generalized_eig(0.5 * (Cinv + Cinv.T), G)
    g2 = _gamma() ** 2
    return [ConstantReport("bpx_sandwich_lower", d, float(lam[0]), 1 - g2, J=J, n=2 ** J,
                           variant="exact_mass"),
            ConstantReport("bpx_sandwich_upper", d, float(lam[-1]), 1.0, J=J, n=2 ** J,
                           variant="exact_mass")]


# -- sweeps ------------------------------------------------------------------
def loglog_slope(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if x.size < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    seed: int = 0

    def csv(self) -> str:
        from .bpx import spectra_csv
        return spectra_csv(self.rows)

    def summary(self) -> dict:
        return {"seed": self.seed, "cells": len(self.rows), "failures": self.failures,
                "slopes": self.slopes, "envelope_exponent": 10}

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, **self.summary()}, indent=2, sort_keys=True)


def sweep(d_range, J_range, variants=("exact_mass",), seed: int = 0,
          dense_limit: int = DENSE_LIMIT, steps: int = 100) -> SweepResult:
    """Condition numbers of the preconditioned stiffness over a grid of (d, J, variant).

    ``J_range`` is either an iterable shared by all d or a mapping ``d -> iterable``.
    Failing cells are recorded and skipped.  For every variant a log-log slope of
    kappa against d is fitted at the largest J present for all d.
    """
    res = SweepResult(seed=seed)
    d_range = list(d_range)
    for d in d_range:
        Js = J_range.get(d, ()) if isinstance(J_range, dict) else J_range
        for J in Js:
            try:
                H = build_hierarchy(d, J)
                A = H.stiffness[-1]
                method = "dense" if A.shape[0] <= dense_limit else "lanczos"
                for v in variants:
                    pre = None if v == "none" else BpxOperator(H, v)
                    k = kappa(A, pre, method=method, steps=steps, seed=seed)
                    res.rows.append({"d": d, "J": J, "variant": k.variant,
                                     "lambda_min": k.lambda_min, "lambda_max": k.lambda_max,
                                     "kappa": k.kappa, "method": method})
            except Exception as exc:  # per-cell failures are recorded, sweep continues
                res.failures.append({"d": d, "J": J, "error": f"{type(exc).__name__}: {exc}"})
    for v in {r["variant"] for r in res.rows}:
        cells = [r for r in res.rows if r["variant"] == v]
        ds = sorted({r["d"] for r in cells})
        common = set.intersection(*({r["J"] for r in cells if r["d"] == d} for d in ds)) if ds else set()
        if len(ds) < 2 or not common:
            continue
        Jc = max(common)
        pts = sorted((r["d"], r["kappa"]) for r in cells if r["J"] == Jc)
        res.slopes[v] = {"J": Jc, "slope": loglog_slope(*zip(*pts)),
                         "d": [p[0] for p in pts], "kappa": [p[1] for p in pts]}
    return res


# -- registry -------------------------------------------------------------------
def _inverse_ref(dmax=6, **_):
    return [check_inverse_ref(d) for d in range(1, dmax + 1)]


def _freudenthal(dmax=5, **_):
    return [r for d in range(1, min(dmax, 5) + 1) for n in (1, 2) for r in check_freudenthal(d, n)]


def _mass(dmax=6, seed=0, **_):
    return [check_local_mass(d, seed) for d in range(1, dmax + 1)]


def _dual(dmax=5, seed=0, **_):
    return [r for d in range(1, min(dmax, 5) + 1) for r in check_dual_norms(d, seed)]


def _local_inverse(dmax=4, **_):
    return [check_local_inverse(build(d, 2)) for d in range(1, min(dmax, 4) + 1)]


def _trace(dmax=3, seed=0, **_):
    return [r for d in range(1, min(dmax, 3) + 1) for n in (4, 8)
            for r in check_trace_discrete(build(d, n), seed)]


def _norm_equiv(dmax=2, **_):
    return [r for d in range(1, min(dmax, 2) + 1) for J in (2, 3, 4)
            for r in check_norm_equivalence(d, J)]


def _scs(**_):
    return [check_scs(1, 1, k) for k in (1, 2, 3, 4)] + [check_scs(2, 1, k) for k in (1, 2, 3)]


def _poincare(**_):
    return [check_poincare(1, 32), check_poincare(2, 16)]


def _psc(seed=0, **_):
    return [check_psc(1, 2, 20, seed)]


def _sandwich(dmax=2, **_):
    return [r for d in range(1, min(dmax, 2) + 1) for r in check_bpx_sandwich(d, 3)]


CHECKS = {
    "inverse_ref": _inverse_ref,
    "freudenthal": _freudenthal,
    "mass_formula": _mass,
    "dual_norms": _dual,
    "local_inverse": _local_inverse,
    "trace_discrete": _trace,
    "norm_equiv": _norm_equiv,
    "scs": _scs,
    "poincare": _poincare,
    "psc": _psc,
    "bpx_sandwich": _sandwich,
}


def run_checks(only=None, dmax: int | None = None, seed: int = 0) -> list[ConstantReport]:
    """Run all registered checks, or those whose name is in ``only``."""
    names = list(CHECKS) if not only else [n for n in CHECKS if n in set(only)]
    kw = {"seed": seed}
    if dmax is not None:
        kw["dmax"] = dmax
    out = []
    for name in names:
        out.extend(CHECKS[name](**kw))
    for r in out:
        r.seed = seed if r.seed == 0 else r.seed
    return out


def reports_csv(reports, fh=None):
    own = fh is None
    fh = io.StringIO() if own else fh
    w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return fh.getvalue() if own else None


def reports_json(reports) -> str:
    return json.dumps([r.row() for r in reports], indent=2)
