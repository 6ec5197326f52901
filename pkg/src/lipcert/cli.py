"""Command-line front end.

Exit codes: 0 certificate issued / validation passed, 2 certification
impossible, 3 input error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from typing import Any

import numpy as np

from . import __version__
from .certify import PAPER, SHARP, certify_implicit, certify_inverse, perturbation_check
from .errors import (
    CertificationError,
    InputError,
    LipcertError,
    NumericalError,
    PreconditionError,
)
from .expr import load_function
from .genjac import DEFAULT_MESH
from .invert import TOL_SOLVE, TOL_VAL, local_invert, validate_certificate, validate_implicit
from .scenarios import NAMES, run_example

EXIT_OK = 0
EXIT_UNCERTIFIABLE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

CONVENTION_FLAGS = {"sharp": SHARP, "paper": PAPER}


def parse_vector(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated vector: {text!r}")
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"not a finite vector: {text!r}")
    return vals


def _default_seed() -> int:
    env = os.environ.get("LIPCERT_SEED")
    try:
        return int(env) if env else 0
    except ValueError:
        return 0


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors: exit 3 with a machine-readable reason on stderr."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"reason": "usage_error", "message": message}), file=sys.stderr)
        sys.exit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lipcert", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lipcert {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, convention=True):
        sp.add_argument("--output", "-o", default="lipcert_report.json",
                        help="JSON report path (default: %(default)s)")
        sp.add_argument("--seed", type=int, default=_default_seed())
        sp.add_argument("--r-max", type=float, default=1.0, dest="r_max")
        sp.add_argument("--mesh", type=float, default=DEFAULT_MESH)
        sp.add_argument("--budget", type=int, default=256,
                        help="sampled Jacobians per radius probe for non-affine models")
        if convention:
            sp.add_argument("--convention", choices=sorted(CONVENTION_FLAGS), default="sharp")
            sp.add_argument("--K", type=float, dest="K_override")
            sp.add_argument("--delta", type=float, dest="delta_override")
            sp.add_argument("--r", type=float, dest="r_override")

    sp = sub.add_parser("certify-inverse", help="certify a local inverse")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--x0", type=parse_vector, required=True)
    common(sp)

    sp = sub.add_parser("certify-implicit", help="certify an implicit function")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--x0", type=parse_vector, required=True)
    sp.add_argument("--y0", type=parse_vector, required=True)
    sp.add_argument("--K", type=float, dest="K_override")
    common(sp, convention=False)

    sp = sub.add_parser("perturb-check", help="check a perturbation f0 + h")
    sp.add_argument("--f0", required=True)
    sp.add_argument("--h", required=True)
    sp.add_argument("--x0", type=parse_vector, required=True)
    common(sp)

    sp = sub.add_parser("invert", help="evaluate the certified inverse at y")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--x0", type=parse_vector, required=True)
    sp.add_argument("--y", type=parse_vector, required=True)
    sp.add_argument("--tol-solve", type=float, default=TOL_SOLVE)
    common(sp)

    sp = sub.add_parser("validate", help="empirically validate a certificate")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--x0", type=parse_vector, required=True)
    sp.add_argument("--y0", type=parse_vector,
                    help="validate the implicit function of F at (x0, y0) instead")
    sp.add_argument("--samples", type=int, default=500)
    sp.add_argument("--tol-solve", type=float, default=TOL_SOLVE)
    sp.add_argument("--tol-val", type=float, default=TOL_VAL)
    common(sp)

    sp = sub.add_parser("example", help="run a built-in reference scenario")
    sp.add_argument("--name", choices=NAMES, required=True)
    sp.add_argument("--convention", choices=sorted(CONVENTION_FLAGS), default="paper")
    sp.add_argument("--output", "-o", default="lipcert_report.json")
    sp.add_argument("--seed", type=int, default=_default_seed())
    return p


def _overrides(args) -> dict:
    out = {}
    for key, attr in (("K", "K_override"), ("delta", "delta_override"), ("r", "r_override")):
        val = getattr(args, attr, None)
        if val is not None:
            out[key] = val
    return out


def _convention(args) -> str:
    conv = CONVENTION_FLAGS[args.convention]
    if _overrides(args) and conv != PAPER:
        raise PreconditionError("--K/--delta/--r overrides need --convention paper")
    return conv


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_report(path: str, report: dict) -> None:
    text = json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".lipcert-", suffix=".json", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cmd_certify_inverse(args):
    model = load_function(args.spec)
    cert = certify_inverse(model, args.x0, args.r_max, _convention(args), _overrides(args),
                           mesh=args.mesh, budget=args.budget, seed=args.seed)
    summary = (f"inverse certificate: delta={cert.delta:.10g} r={cert.r:.10g} K={cert.K:.10g} "
               f"U_radius={cert.U_radius:.10g} V_radius={cert.V_radius:.10g} Lg={cert.Lg:.10g}")
    return EXIT_OK, {"certificate": cert.to_dict()}, summary


def _cmd_certify_implicit(args):
    F = load_function(args.spec)
    cert = certify_implicit(F, args.x0, args.y0, args.r_max, K=args.K_override,
                            mesh=args.mesh, budget=args.budget, seed=args.seed)
    summary = (f"implicit certificate: delta={cert.delta:.10g} inner_delta={cert.inner_delta:.10g} "
               f"r={cert.r:.10g} K={cert.K:.10g} U0_radius={cert.U0_radius:.10g} "
               f"Lg_bound={cert.Lg_bound:.10g}")
    return EXIT_OK, {"certificate": cert.to_dict()}, summary


def _perturbation_outcome(report):
    code = EXIT_OK if report.certificate is not None else EXIT_UNCERTIFIABLE
    status = "admissible" if report.admissible else "not admissible"
    summary = (f"perturbation {status}: K={report.K:.10g} K'={report.K_prime:.10g} "
               f"L={report.L:.10g} maximal_rank={report.maximal_rank}")
    if report.certificate is not None:
        c = report.certificate
        summary += (f"\n  U_radius={c.U_radius:.10g} V_radius={c.V_radius:.10g} Lg={c.Lg:.10g}"
                    f" (computed delta={report.computed_delta:.10g})")
    result = {"report": report.to_dict()}
    if code != EXIT_OK:
        result["reason"] = "rank_deficient" if not report.maximal_rank else "margin_exceeded"
    return code, result, summary


def _cmd_perturb_check(args):
    report = perturbation_check(load_function(args.f0), load_function(args.h), args.x0,
                                args.r_max, _convention(args), _overrides(args),
                                mesh=args.mesh, budget=args.budget, seed=args.seed)
    return _perturbation_outcome(report)


def _cmd_invert(args):
    model = load_function(args.spec)
    cert = certify_inverse(model, args.x0, args.r_max, _convention(args), _overrides(args),
                           mesh=args.mesh, budget=args.budget, seed=args.seed)
    x, trace = local_invert(model, cert, np.asarray(args.y), args.tol_solve)
    summary = f"g(y) = {np.array2string(x, precision=12)} in {trace.iterations} iterations"
    return EXIT_OK, {"certificate": cert.to_dict(), "x": x, "trace": trace.to_dict()}, summary


def _cmd_validate(args):
    model = load_function(args.spec)
    if args.y0 is not None:
        cert = certify_implicit(model, args.x0, args.y0, args.r_max, K=args.K_override,
                                mesh=args.mesh, budget=args.budget, seed=args.seed)
        report = validate_implicit(model, cert, args.samples, args.seed, args.tol_solve,
                                   args.tol_val)
    else:
        cert = certify_inverse(model, args.x0, args.r_max, _convention(args), _overrides(args),
                               mesh=args.mesh, budget=args.budget, seed=args.seed)
        report = validate_certificate(model, cert, args.samples, args.seed, args.tol_solve,
                                      args.tol_val)
    result = {"certificate": cert.to_dict(), "validation": report.to_dict()}
    summary = (f"validation {'passed' if report.passed else 'FAILED'}: "
               f"max ratio {report.max_g_ratio:.6g} vs bound {report.bound_Lg:.6g}, "
               f"max round-trip residual {report.max_roundtrip_residual:.3g}")
    if not report.passed:
        result["reason"] = "validation_failed"
        return EXIT_NUMERICAL, result, summary
    return EXIT_OK, result, summary


def _cmd_example(args):
    kind, res = run_example(args.name, CONVENTION_FLAGS[args.convention], args.seed)
    if kind == "perturbation":
        return _perturbation_outcome(res)
    summary = (f"implicit certificate: delta={res.delta:.10g} U0_radius={res.U0_radius:.10g} "
               f"Lg_bound={res.Lg_bound:.10g}")
    return EXIT_OK, {"certificate": res.to_dict()}, summary


COMMANDS = {
    "certify-inverse": _cmd_certify_inverse,
    "certify-implicit": _cmd_certify_implicit,
    "perturb-check": _cmd_perturb_check,
    "invert": _cmd_invert,
    "validate": _cmd_validate,
    "example": _cmd_example,
}


def _inputs(args) -> dict:
    skip = {"command", "output"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(args) -> int:
    report: dict = {
        "command": args.command,
        "version": __version__,
        "inputs": _inputs(args),
        "tolerances": {
            "tol_solve": getattr(args, "tol_solve", TOL_SOLVE),
            "tol_val": getattr(args, "tol_val", TOL_VAL),
            "mesh": getattr(args, "mesh", DEFAULT_MESH),
        },
    }
    try:
        code, result, summary = COMMANDS[args.command](args)
        report["result"] = result
        report["reason"] = result.pop("reason", None)
    except (InputError, OSError, ValueError) as exc:
        code, summary = EXIT_INPUT, f"input error: {exc}"
        report["reason"] = getattr(exc, "reason", "input_error")
        report["message"] = str(exc)
    except CertificationError as exc:
        code, summary = EXIT_UNCERTIFIABLE, f"certification impossible: {exc}"
        report["reason"] = exc.reason
        report["message"] = str(exc)
        report["witness"] = getattr(exc, "witness", None)
    except NumericalError as exc:
        code, summary = EXIT_NUMERICAL, f"numerical failure: {exc}"
        report["reason"] = exc.reason
        report["message"] = str(exc)
        trace = getattr(exc, "trace", None)
        if trace is not None:
            report["trace"] = trace.to_dict()
    except LipcertError as exc:
        code, summary = EXIT_NUMERICAL, f"error: {exc}"
        report["reason"] = exc.reason
        report["message"] = str(exc)
    report["exit_code"] = code
    try:
        write_report(args.output, report)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(summary)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
