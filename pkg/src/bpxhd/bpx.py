"""The BPX preconditioner ``C = sum_l h_l^2 I_l M_l^{-1} I_l^T`` and tools around it.

``I_l`` is the composite prolongation from level l to the finest level J.
Applied to a residual (dual vector) it realizes the operator
``B = sum_l h_l^2 Q_l``; ``C A`` has the spectrum of ``B A``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import SolverError
from .krylov import SolveReport, as_apply, pcg
from .multilevel import Hierarchy
from .spectral import (DENSE_LIMIT, OperatorPair, dense_matrix, dense_product_eig,
                       lanczos_extremes)

__all__ = [
    "VARIANTS", "BpxOperator", "apply_bpx", "pcg", "SolveReport", "KappaEstimate",
    "kappa", "psc_quadratic_form", "psc_infimum", "telescoped_operator",
    "spectra_csv",
]

VARIANTS = ("exact_mass", "lumped_mass", "diagonal")
_ALIASES = {"exact": "exact_mass", "lumped": "lumped_mass", "diag": "diagonal"}


def normalize_variant(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ValueError(f"unknown BPX variant {name!r}")
    return name


class BpxOperator:
    """Matrix-free BPX preconditioner on the free dofs of level J."""

    def __init__(self, hierarchy: Hierarchy, variant: str = "exact_mass"):
        self.hierarchy = hierarchy
        self.variant = normalize_variant(variant)
        H = hierarchy
        self.scales = np.array([H.h(l) ** 2 for l in range(1, H.J + 1)])
        if self.variant == "lumped_mass":
            self._dinv = [1.0 / np.asarray(M.sum(axis=1)).ravel() for M in H.mass]
        elif self.variant == "diagonal":
            self._dinv = [1.0 / M.diagonal() for M in H.mass]

    @property
    def shape(self):
        n = self.hierarchy.num_free(self.hierarchy.J)
        return (n, n)

    def _solve(self, l, r):
        if self.variant == "exact_mass":
            return self.hierarchy.mass_solve(l, r)
        dinv = self._dinv[l - 1]
        return dinv[:, None] * r if r.ndim == 2 else dinv * r

    def apply(self, r):
        """``sum_l h_l^2 I_l S_l I_l^T r`` for 1-D or column-stacked 2-D ``r``."""
        H = self.hierarchy
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.shape[0]:
            raise ValueError(f"expected {self.shape[0]} rows, got {r.shape[0]}")
        # restrict down the hierarchy, keeping each level's functional
        res = [None] * H.J
        res[-1] = r
        for l in range(H.J - 1, 0, -1):
            res[l - 1] = H.restrict(l, res[l])
        u = self.scales[0] * self._solve(1, res[0])
        for l in range(2, H.J + 1):
            u = H.prolong(l - 1, u) + self.scales[l - 1] * self._solve(l, res[l - 1])
        return u

    __call__ = apply

    def __matmul__(self, r):
        return self.apply(r)

    def as_linear_operator(self) -> spla.LinearOperator:
        return spla.LinearOperator(self.shape, matvec=self.apply, matmat=self.apply,
                                   dtype=float)

    def dense(self) -> np.ndarray:
        return dense_matrix(self.apply, self.shape[0])


def apply_bpx(b: BpxOperator, r):
    return b.apply(r)


@dataclass
class KappaEstimate:
    lambda_min: float
    lambda_max: float
    kappa: float
    method: str
    variant: str
    size: int
    residual_min: float = 0.0
    residual_max: float = 0.0
    steps: int = 0
    seed: int = 0

    def __iter__(self):
        yield self.lambda_min
        yield self.lambda_max
        yield self.kappa

    def to_dict(self):
        return asdict(self)


def kappa(A, b: BpxOperator | None = None, method: str = "dense",
          steps: int = 100, seed: int = 0, tol: float = 1e-6) -> KappaEstimate:
    """Extreme eigenvalues and condition number of ``C A`` (or of ``A`` alone).

    The Lanczos path starts with at least 100 steps and extends the run until
    the residual estimates of both extremes drop below ``tol``.
    """
    n = A.shape[0]
    variant = "none" if b is None else b.variant
    if method == "dense":
        if n > DENSE_LIMIT:
            raise ValueError(f"dense method limited to {DENSE_LIMIT} unknowns, got {n}")
        Ad = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
        if b is None:
            lam = sla.eigvalsh(Ad)
        else:
            lam = dense_product_eig(Ad, b.dense())
        return KappaEstimate(float(lam[0]), float(lam[-1]), float(lam[-1] / lam[0]),
                             "dense", variant, n)
    if method == "lanczos":
        pair = OperatorPair(A, None if b is None else b.apply, size=n)
        res = lanczos_extremes(pair, steps=max(steps, 100), seed=seed, tol=tol)
        return KappaEstimate(res.lambda_min, res.lambda_max, res.kappa, "lanczos",
                             variant, n, res.residual_min, res.residual_max,
                             res.steps, res.seed)
    raise ValueError("method must be 'dense' or 'lanczos'")


def psc_quadratic_form(b: BpxOperator, v, tol: float = 1e-14) -> float:
    """``<C^{-1} v, v>`` via an inner CG solve with C."""
    if b.variant != "exact_mass":
        raise ValueError("the subspace-correction identity needs the exact_mass variant")
    v = np.asarray(v, dtype=float)
    z, rep = pcg(b, v, tol=tol, maxit=10 * v.size + 100)
    if not rep.converged:
        raise SolverError(f"inner C-solve stalled at {rep.relative_residual:.2e}")
    return float(v @ z)


def psc_infimum(hierarchy: Hierarchy, v) -> float:
    """``min sum_l h_l^-2 ||v_l||^2`` over decompositions ``v = sum_l v_l``.

    Dense oracle: parametrize the affine set of stacked level coefficients by
    a particular least-squares solution plus a null-space basis, then
    minimize the quadratic exactly.
    """
    H = hierarchy
    v = np.asarray(v, dtype=float)
    blocks, weights = [], []
    for l in range(1, H.J + 1):
        n = H.num_free(l)
        I = np.eye(n)
        blocks.append(H.prolong_to_fine(l, I) if n else np.zeros((v.size, 0)))
        weights.append(H.h(l) ** -2 * H.mass[l - 1].toarray())
    P = np.hstack(blocks)
    G = sla.block_diag(*weights)
    c0, *_ = np.linalg.lstsq(P, v, rcond=None)
    N = sla.null_space(P)
    if N.shape[1]:
        z = np.linalg.solve(N.T @ G @ N, -(N.T @ G @ c0))
        c = c0 + N @ z
    else:
        c = c0
    return float(c @ G @ c)


def telescoped_operator(hierarchy: Hierarchy, power: int = -2) -> np.ndarray:
    """Dense ``M_J sum_l h_l^power (Q_l - Q_{l-1})`` in level-J coefficients.

    With ``power=-2`` this is the matrix of the multilevel norm; with
    ``power=2`` it is the matrix whose inverse is the telescoped
    preconditioner.
    """
    H = hierarchy
    n = H.num_free(H.J)
    MJ = H.mass[-1].toarray()
    prev = np.zeros((n, n))
    out = np.zeros((n, n))
    for l in range(1, H.J + 1):
        Pl = H.prolong_to_fine(l, np.eye(H.num_free(l)))
        Ml = H.mass[l - 1].toarray()
        Ql = Pl @ np.linalg.solve(Ml, Pl.T @ MJ) if Pl.shape[1] else np.zeros((n, n))
        out += H.h(l) ** power * (MJ @ (Ql - prev))
        prev = Ql
    return 0.5 * (out + out.T)


def spectra_csv(rows, fh=None):
    """CSV with columns ``d,J,variant,lambda_min,lambda_max,kappa,method``."""
    own = fh is None
    fh = io.StringIO() if own else fh
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["d", "J", "variant", "lambda_min", "lambda_max", "kappa", "method"])
    for r in rows:
        w.writerow([r["d"], r["J"], r["variant"], repr(float(r["lambda_min"])),
                    repr(float(r["lambda_max"])), repr(float(r["kappa"])), r["method"]])
    return fh.getvalue() if own else None
