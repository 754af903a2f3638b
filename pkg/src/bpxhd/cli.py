"""Command-line front door: ``python -m bpxhd <command> ...``.

Exit codes: 0 success, 2 resource budget exceeded, 3 numerical failure,
64 usage error.  The ``BPXHD_BUDGET`` environment variable overrides the
default vertex budget.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bpx import BpxOperator, kappa, normalize_variant, spectra_csv
from .errors import BudgetExceededError, SolverError
from .mesh import Mesh, default_budget
from .multilevel import build_hierarchy
from .spectral import DENSE_LIMIT
from .verification import CHECKS, reports_csv, reports_json, rho_freudenthal, run_checks, sweep

EXIT_OK, EXIT_RESOURCE, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 64
log = logging.getLogger("bpxhd")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    d: int | None = None
    n: int | None = None
    J: int | None = None
    variant: str = "exact_mass"
    method: str | None = None
    tol: float = 1e-8
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    budget: int | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))


def _variant(text):
    try:
        return normalize_variant(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p, grid=None):
    p.add_argument("-d", type=int, default=None, help="spatial dimension")
    if grid == "n":
        p.add_argument("-n", type=int, default=None, help="cells per axis")
    if grid == "J":
        p.add_argument("-J", type=int, default=None, help="finest level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--budget", type=int, default=None, help="vertex budget")


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bpxhd", description="BPX preconditioning on Freudenthal meshes of the unit cube.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    m = sub.add_parser("mesh-info", help="counts and shape data of a Freudenthal mesh")
    _common(m, "n")

    v = sub.add_parser("verify", help="run the constant checks")
    _common(v)
    v.add_argument("--only", action="append", default=None, help="check name (repeatable)")
    v.add_argument("--dmax", type=int, default=None)

    k = sub.add_parser("kappa", help="condition number of the (preconditioned) stiffness")
    _common(k, "J")
    k.add_argument("--variant", type=_variant, default="exact_mass",
                   help="exact|lumped|diag (or exact_mass, lumped_mass, diagonal)")
    k.add_argument("--method", choices=("dense", "lanczos"), default=None)
    k.add_argument("--no-precond", action="store_true")
    k.add_argument("--tol", type=float, default=1e-8, help="Lanczos residual tolerance")
    k.add_argument("--steps", type=int, default=100)

    s = sub.add_parser("sweep", help="kappa over a grid of dimensions and levels")
    _common(s)
    s.add_argument("--dims", type=int, nargs="+", default=[1, 2, 3])
    s.add_argument("--levels", type=int, nargs="+", default=[2, 3, 4])
    s.add_argument("--variant", type=_variant, action="append", default=None)
    s.add_argument("--method", choices=("dense", "lanczos"), default=None)
    return p


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _positive(name, value, minimum=1):
    if value is None or value < minimum:
        raise UsageError(f"{name} must be an integer >= {minimum}")


def cmd_mesh_info(args) -> int:
    _positive("-d", args.d)
    _positive("-n", args.n)
    m = Mesh(args.d, args.n, budget=args.budget)
    s = m.perm_simplices[0]
    info = {
        "d": m.dim, "n": m.grid_n, "num_vertices": m.num_vertices,
        "num_elements": m.num_elements, "num_boundary_vertices": int(m.boundary_vertex_ids.size),
        "num_boundary_faces": len(m.boundary_faces()), "h": m.mesh_size,
        "element_volume": m.element_volume, "shape_ratio": s.shape_ratio,
        "shape_ratio_formula": rho_freudenthal(m.dim),
    }
    if args.format == "json":
        _emit(json.dumps(info, indent=2) + "\n", args.out)
    else:
        _emit(",".join(info) + "\n" + ",".join(repr(v if isinstance(v, int) else float(v)) for v in info.values()) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    only = args.only
    if only:
        unknown = [o for o in only if o not in CHECKS]
        for o in unknown:
            log.warning("no check named %r; available: %s", o, ", ".join(CHECKS))
        if len(unknown) == len(only):
            log.warning("empty selection, nothing to run")
            _emit(reports_csv([]) if args.format == "csv" else "[]\n", args.out)
            return EXIT_OK
    reports = run_checks(only, dmax=args.dmax, seed=args.seed)
    _emit(reports_csv(reports) if args.format == "csv" else reports_json(reports) + "\n", args.out)
    failed = [r for r in reports if r.failed]
    for r in failed:
        log.error("check failed: %s d=%s measured=%r reference=%r", r.claim, r.d, r.measured, r.reference)
    return 1 if failed else EXIT_OK


def cmd_kappa(args) -> int:
    _positive("-d", args.d)
    _positive("-J", args.J)
    budget = args.budget if args.budget is not None else default_budget()
    size = (2 ** args.J - 1) ** args.d
    if args.method == "dense" and size > DENSE_LIMIT:
        raise UsageError(f"--method dense requested for {size} unknowns (dense limit {DENSE_LIMIT})")
    H = build_hierarchy(args.d, args.J, budget=budget)
    A = H.stiffness[-1]
    method = args.method or ("dense" if A.shape[0] <= DENSE_LIMIT else "lanczos")
    pre = None if args.no_precond else BpxOperator(H, args.variant)
    est = kappa(A, pre, method=method, steps=args.steps, seed=args.seed)
    row = {"d": args.d, "J": args.J, "variant": est.variant, "lambda_min": est.lambda_min,
           "lambda_max": est.lambda_max, "kappa": est.kappa, "method": method}
    if method == "lanczos" and max(est.residual_min, est.residual_max) > args.tol:
        log.warning("Lanczos residual estimates %.2e/%.2e exceed --tol %.1e",
                    est.residual_min, est.residual_max, args.tol)
    if not math.isfinite(est.kappa) or est.lambda_min <= 0:
        raise SolverError(f"non-positive or non-finite spectrum estimate: {row}")
    if args.format == "json":
        _emit(json.dumps({**est.to_dict(), "d": args.d, "J": args.J, "seed": args.seed},
                         indent=2, default=float) + "\n", args.out)
    else:
        _emit(spectra_csv([row]), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    variants = args.variant or ["exact_mass"]
    res = sweep(args.dims, args.levels, variants, seed=args.seed,
                dense_limit=0 if args.method == "lanczos" else
                (10 ** 12 if args.method == "dense" else DENSE_LIMIT))
    if args.out is None:
        _emit(res.csv() if args.format == "csv" else res.to_json() + "\n", None)
    else:
        base = Path(args.out)
        base.parent.mkdir(parents=True, exist_ok=True)
        stem = base.with_suffix("")
        Path(f"{stem}.csv").write_text(res.csv())
        Path(f"{stem}.json").write_text(res.to_json() + "\n")
        Path(f"{stem}_slopes.json").write_text(json.dumps(res.summary(), indent=2, sort_keys=True) + "\n")
    for f in res.failures:
        log.warning("cell d=%s J=%s failed: %s", f["d"], f["J"], f["error"])
    if not res.rows and res.failures:
        return EXIT_NUMERICAL
    return EXIT_OK


COMMANDS = {"mesh-info": cmd_mesh_info, "verify": cmd_verify, "kappa": cmd_kappa, "sweep": cmd_sweep}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        if args.verbose:
            log.setLevel(logging.INFO)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceededError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (SolverError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
