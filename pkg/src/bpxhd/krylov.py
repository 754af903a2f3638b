"""Preconditioned conjugate gradients."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import IndefiniteError

__all__ = ["SolveReport", "pcg", "as_apply"]


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    wall_time: float
    variant: str = "none"
    meta: dict = field(default_factory=dict)
    residual_history: list = field(default_factory=list)

    def to_dict(self, history: bool = False) -> dict:
        out = asdict(self)
        if not history:
            out.pop("residual_history")
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def as_apply(op):
    """Return a callable ``x -> op @ x`` for matrices, LinearOperators and callables."""
    if op is None:
        return None
    if callable(op) and not hasattr(op, "shape"):
        return op
    if hasattr(op, "apply"):
        return op.apply
    return lambda x: op @ x


def pcg(A, f, pre=None, tol: float = 1e-8, maxit: int = 10_000, x0=None,
        variant: str | None = None, meta: dict | None = None):
    """Solve ``A x = f`` by conjugate gradients preconditioned with ``pre``.

    Stops when the preconditioned residual norm ``sqrt(r^T B r)`` has dropped
    by ``tol`` relative to its initial value.  Raises
    :class:`IndefiniteError` if a search direction has ``p^T A p <= 0``.
    """
    t0 = time.perf_counter()
    apply_a = as_apply(A)
    apply_b = as_apply(pre) or (lambda r: r)
    f = np.asarray(f, dtype=float)
    x = np.zeros_like(f) if x0 is None else np.array(x0, dtype=float)
    r = f - apply_a(x) if x0 is not None else f.copy()
    z = apply_b(r)
    rz = float(r @ z)
    if rz < 0:
        raise IndefiniteError("preconditioner is not positive definite", step=0)
    norm0 = np.sqrt(rz)
    history = [1.0]
    if norm0 == 0.0:
        return x, SolveReport(0, 0.0, True, time.perf_counter() - t0,
                              variant or _name(pre), meta or {}, history)
    p = z.copy()
    it = 0
    rel = 1.0
    while it < maxit:
        it += 1
        Ap = apply_a(p)
        curv = float(p @ Ap)
        if curv <= 0.0:
            raise IndefiniteError(f"non-positive curvature {curv:.3e} at step {it}", step=it)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        z = apply_b(r)
        rz_new = float(r @ z)
        rel = np.sqrt(max(rz_new, 0.0)) / norm0
        history.append(rel)
        if rel <= tol:
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    rep = SolveReport(it, float(rel), bool(rel <= tol), time.perf_counter() - t0,
                      variant or _name(pre), meta or {}, history)
    return x, rep


def _name(pre):
    if pre is None:
        return "none"
    return getattr(pre, "variant", type(pre).__name__)
