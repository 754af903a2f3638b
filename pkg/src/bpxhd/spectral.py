"""Dense and Lanczos eigenvalue tools for symmetric pencils.

The dense path is the ground truth for small problems; Lanczos with full
reorthogonalization covers the rest.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NotSPDError, SolverError
from .krylov import as_apply

__all__ = [
    "dense_generalized_eig", "dense_product_eig", "OperatorPair",
    "LanczosResult", "lanczos_extremes", "dense_matrix",
]

DENSE_LIMIT = 3000


def _dense(A):
    if hasattr(A, "toarray"):
        return A.toarray()
    return np.asarray(A, dtype=float)


def dense_matrix(apply, n: int) -> np.ndarray:
    """Materialize a linear action by applying it to the identity."""
    return np.asarray(apply(np.eye(n)), dtype=float).reshape(n, n)


def dense_generalized_eig(A, B=None, vectors: bool = False, check: bool = True):
    """Ascending eigenvalues of ``A x = lambda B x`` with B SPD.

    Uses a Cholesky congruence and the symmetric LAPACK driver.  With
    ``check`` the residual of every pair is verified against ``1e-9 ||A||``.
    """
    A = _dense(A)
    if A.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense eigensolve limited to {DENSE_LIMIT} unknowns")
    A = 0.5 * (A + A.T)
    if B is None:
        B = np.eye(A.shape[0])
    B = _dense(B)
    B = 0.5 * (B + B.T)
    try:
        sla.cholesky(B, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("second matrix of the pencil is not SPD") from exc
    lam, V = sla.eigh(A, B)
    if check and lam.size:
        res = np.linalg.norm(A @ V - (B @ V) * lam, axis=0)
        scale = max(np.linalg.norm(A, 2), 1e-300) * np.linalg.norm(V, axis=0)
        if np.any(res > 1e-9 * scale):
            raise SolverError("dense eigenpair residual check failed")
    return (lam, V) if vectors else lam


def dense_product_eig(A, B) -> np.ndarray:
    """Ascending eigenvalues of ``B A`` for SPD ``A`` and symmetric ``B``.

    Computed as the spectrum of ``L^T B L`` where ``A = L L^T``.
    """
    A = 0.5 * (_dense(A) + _dense(A).T)
    B = 0.5 * (_dense(B) + _dense(B).T)
    try:
        L = sla.cholesky(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("operator is not SPD") from exc
    S = L.T @ B @ L
    return sla.eigvalsh(0.5 * (S + S.T))


@dataclass
class OperatorPair:
    """Actions of a symmetric ``A`` and an SPD ``B``; spectrum of ``B A``.

    ``apply_b=None`` means the identity.  For a pencil ``K x = lambda M x``
    pass ``apply_b`` as a solve with M.
    """

    apply_a: object
    apply_b: object = None
    size: int = 0

    def __post_init__(self):
        if not self.size:
            self.size = getattr(self.apply_a, "shape", (0,))[0]
        self.apply_a = as_apply(self.apply_a)
        self.apply_b = as_apply(self.apply_b) or (lambda x: np.array(x, dtype=float))

    def symmetry_defect(self, seed: int = 0) -> float:
        """Relative pairing error of both actions on a random pair."""
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((2, self.size))
        out = 0.0
        for f in (self.apply_a, self.apply_b):
            a, b = y @ f(x), x @ f(y)
            out = max(out, abs(a - b) / max(abs(a), abs(b), 1e-300))
        return out


@dataclass
class LanczosResult:
    lambda_min: float
    lambda_max: float
    residual_min: float
    residual_max: float
    steps: int
    seed: int
    ritz: np.ndarray = field(repr=False, default=None)
    alpha: np.ndarray = field(repr=False, default=None)
    beta: np.ndarray = field(repr=False, default=None)

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min

    def __iter__(self):
        yield self.lambda_min
        yield self.lambda_max
        yield (self.residual_min, self.residual_max)


def _lanczos_run(pair: OperatorPair, steps: int, rng):
    # Lanczos for T = A B, self-adjoint in the B inner product (x^T B y)
    n = pair.size
    m = min(steps, n)
    Q = np.zeros((n, m))
    Z = np.zeros((n, m))
    alpha = np.zeros(m)
    beta = np.zeros(m)
    r = rng.standard_normal(n)
    z = pair.apply_b(r)
    nrm = np.sqrt(r @ z)
    q, zq = r / nrm, z / nrm
    for j in range(m):
        Q[:, j], Z[:, j] = q, zq
        w = pair.apply_a(zq)
        alpha[j] = zq @ w
        # full reorthogonalization, two passes
        for _ in range(2):
            w -= Q[:, :j + 1] @ (Z[:, :j + 1].T @ w)
        zw = pair.apply_b(w)
        b2 = w @ zw
        if not np.isfinite(b2) or not np.isfinite(alpha[j]):
            return None
        scale = max(abs(alpha[: j + 1]).max(), 1e-300)
        if j + 1 < m and b2 <= (1e-12 * scale) ** 2:
            if b2 < -(1e-8 * scale) ** 2:
                return None                     # B indefinite along w
            # invariant Krylov subspace: Ritz values are exact eigenvalues
            return alpha[: j + 1], np.append(beta[:j], 0.0), j + 1, True
        beta[j] = np.sqrt(max(b2, 0.0))
        if j + 1 < m:
            q, zq = w / beta[j], zw / beta[j]
    return alpha, beta, m, m == n


def lanczos_extremes(pair: OperatorPair, steps: int = 100, seed: int = 0,
                     retries: int = 3, tol: float | None = None,
                     max_steps: int = 800) -> LanczosResult:
    """Extreme eigenvalues of ``B A`` by Lanczos with full reorthogonalization.

    Residual estimates are ``beta_m |s_{m,i}| / |theta_i|`` for the extreme
    Ritz pairs.  With ``tol`` given, the run is repeated from the same start
    vector with doubled step counts (up to ``max_steps``) until both
    estimates are below ``tol``.  Reaching an invariant subspace ends the run
    with exact Ritz values and zero residuals.  A breakdown (non-finite
    values or an indefinite B) restarts from a fresh seed; after ``retries``
    attempts :class:`SolverError` is raised.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    cap = min(pair.size, max(max_steps, steps))
    for attempt in range(retries):
        s = seed + attempt
        m_req = min(steps, pair.size)
        while True:
            res = _lanczos_once(pair, m_req, s)
            if res is None:
                break
            if tol is None or max(res.residual_min, res.residual_max) <= tol or m_req >= cap:
                return res
            m_req = min(2 * m_req, cap)
    raise SolverError(f"Lanczos broke down in {retries} attempts (seeds {seed}..{seed + retries - 1})")


def _lanczos_once(pair: OperatorPair, steps: int, seed: int):
    out = _lanczos_run(pair, steps, np.random.default_rng(seed))
    if out is None:
        return None
    alpha, beta, m, exact = out
    theta, S = sla.eigh_tridiagonal(alpha, beta[: m - 1])
    last = beta[m - 1] * np.abs(S[-1, :])
    if exact:
        last = np.zeros_like(last)
    rmin = last[0] / max(abs(theta[0]), 1e-300)
    rmax = last[-1] / max(abs(theta[-1]), 1e-300)
    return LanczosResult(float(theta[0]), float(theta[-1]), float(rmin), float(rmax),
                         m, seed, theta, alpha, beta)
