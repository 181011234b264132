"""Command-line entry point ``sigring``.

Exit codes: 0 success, 1 failed check (bad certificate, empty oracle grid,
exponent outside the ring), 2 unusable input, 3 solver INCONCLUSIVE
(suppressed by ``--best-effort``).
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .cones import InfeasibleSetError, SolverInconclusive, verify_certificate
from .fileformat import (ProblemFile, ProblemFileError, load_problem_file, parse_certificate,
                         render_certificate)
from .lower import LowerBoundResult, ProblemInstance, recover_solutions, solve_lower
from .moments import BoxMeasure
from .oracle import GridSpec, OracleResult, grid_minimize
from .report import Report
from .ring import NotInRingError
from .solver import TOL_ENV, SolverOptions, Status
from .upper import BISECT, LEVEL0, PRIMAL, upper_bound_dual_bisection, upper_bound_primal

log = logging.getLogger("sigring")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_INCONCLUSIVE = 0, 1, 2, 3

DEFAULTS: Dict[str, Any] = {
    "level": 1,
    "min_level": 1,
    "mode": PRIMAL,
    "upper_level": None,
    "exclude_tags": [],
    "fold_tags": [],
    "per_dim": 20,
    "oracle_tol": 1e-6,
    "polish": 10,
    "samples": 1000,
    "best_effort": False,
    "solver_tol": SolverOptions().tol_feas,
}
# keys a problem file may set in its "config" object
FILE_KEYS = ("level", "min_level", "mode", "upper_level", "exclude_tags", "fold_tags", "per_dim",
             "oracle_tol", "polish", "samples")


class InputError(Exception):
    pass


def _tags(s: Optional[str]):
    if s is None:
        return None
    return [t for t in (x.strip() for x in s.split(",")) if t]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sigring", description="Signomial bounds with SAGE certificates.",
                                 allow_abbrev=False)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--report-dir", help="write report.json, report.txt, bounds.csv and bounds.png here")
    common.add_argument("--json", action="store_true", help="print the JSON report instead of text")
    common.add_argument("--best-effort", action="store_true", default=None,
                        help="exit 0 even when the solver is inconclusive")
    common.add_argument("--verbose", action="store_true")
    prob = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    prob.add_argument("problem", help="problem file (JSON)")
    prob.add_argument("--exclude-tags", type=_tags, help="comma-separated constraint tags to drop")
    prob.add_argument("--fold-tags", type=_tags,
                      help="comma-separated tags whose two-term constraints become linear rows of X")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degree", parents=[common, prob], help="A-degree of the objective and constraints")
    p.add_argument("--constraint", help="report only this constraint")

    p = sub.add_parser("lower", parents=[common, prob], help="level-d lower bound")
    p.add_argument("--level", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--certificate-out", help="write the certificate as JSON")
    p.add_argument("--no-recover", action="store_true", help="skip solution recovery")

    p = sub.add_parser("upper", parents=[common, prob], help="level-d upper bound over the box")
    p.add_argument("--level", type=int)
    p.add_argument("--mode", choices=(PRIMAL, BISECT, LEVEL0))

    p = sub.add_parser("solve", parents=[common, prob],
                       help="lower bounds, recovery and grid oracle (plus an optional upper bound)")
    p.add_argument("--level", type=int, help="highest lower-bound level")
    p.add_argument("--min-level", type=int)
    p.add_argument("--upper-level", type=int)
    p.add_argument("--mode", choices=(PRIMAL, BISECT, LEVEL0))
    p.add_argument("--per-dim", type=int)
    p.add_argument("--oracle-tol", type=float)
    p.add_argument("--polish", type=int)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("check-cert", parents=[common], help="re-verify a certificate file")
    p.add_argument("certificate")
    p.add_argument("--tol", type=float, help="verification tolerance (default: the verifier's)")

    p = sub.add_parser("oracle", parents=[common, prob], help="grid minimization")
    p.add_argument("--per-dim", type=int)
    p.add_argument("--oracle-tol", type=float)
    p.add_argument("--polish", type=int)
    return ap


def resolve_config(args: argparse.Namespace, pf: Optional[ProblemFile]):
    """Flag > problem-file ``config`` > default, with the source of each value."""
    env = os.environ.get(TOL_ENV)
    defaults = dict(DEFAULTS)
    cfg, src = {}, {}
    file_cfg = pf.config if pf is not None else {}
    unknown = set(file_cfg) - set(FILE_KEYS)
    if unknown:
        raise InputError(f"unknown config keys in problem file: {', '.join(sorted(unknown))}")
    for k, dv in defaults.items():
        flag = getattr(args, k, None)
        if flag is not None:
            cfg[k], src[k] = flag, "flag"
        elif k in file_cfg:
            cfg[k], src[k] = file_cfg[k], "file"
        else:
            cfg[k], src[k] = dv, "default"
    if env:
        try:
            cfg["solver_tol"], src["solver_tol"] = float(env), f"env {TOL_ENV}"
        except ValueError:
            raise InputError(f"{TOL_ENV}={env!r} is not a decimal number") from None
    if cfg["mode"] not in (PRIMAL, BISECT, LEVEL0):
        raise InputError(f"mode must be one of {PRIMAL}, {BISECT}, {LEVEL0}")
    return cfg, src, defaults


def _opts(cfg) -> SolverOptions:
    return SolverOptions(tol_feas=cfg["solver_tol"], tol_gap=cfg["solver_tol"])


def _cert_status(res) -> str:
    v = getattr(res, "verification", None)
    if isinstance(v, list):
        if not v:
            return "none"
        return "verified" if res.trusted else "unverified"
    if v is None:
        return "none"
    return "verified" if v.passed else "failed"


def _lower_row(res: LowerBoundResult) -> Dict[str, Any]:
    return {"kind": "lower", "level": res.level, "bound": res.bound, "status": res.status,
            "solve_time": res.stats.get("solve_time", 0.0), "certificate": _cert_status(res),
            "r": res.r, "trusted": res.trusted}


def _box_of(p: ProblemInstance) -> BoxMeasure:
    if p.ineqs or p.eqs:
        raise InputError("upper bounds need a box-only problem; drop signomial constraints with --exclude-tags "
                         "or --fold-tags")
    G = p.X.G
    if p.X.m and np.any(np.count_nonzero(G, axis=1) != 1):
        raise InputError("upper bounds need X to be a box")
    lo, hi = p.X.bounding_box()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(lo >= hi):
        raise InputError("upper bounds need a bounded box with nonempty interior")
    return BoxMeasure(tuple(lo), tuple(hi))


def _upper(p: ProblemInstance, d: int, mode: str, cfg, rep: Report) -> Status:
    box = _box_of(p)
    if mode == BISECT:
        res = upper_bound_dual_bisection(p.f, p.ring, box, d, opts=_opts(cfg))
        rep.bounds.append({"kind": "upper", "level": d, "bound": res.bound, "status": res.status,
                           "solve_time": None, "certificate": "none (dual bisection)",
                           "interval": list(res.interval), "steps": res.steps})
        return res.status
    res = upper_bound_primal(p.f, p.ring, box, d, mode=mode, opts=_opts(cfg))
    rep.bounds.append({"kind": "upper", "level": d, "bound": res.bound, "status": res.status,
                       "solve_time": res.stats.get("solve_time"), "certificate": _cert_status(res),
                       "mode": mode, "sample_min": res.sample_min, "trusted": res.trusted})
    if res.status is Status.OPTIMAL and not res.trusted:
        rep.messages.append(f"level {d} upper bound did not pass the density checks; treat it as untrusted")
        return Status.INCONCLUSIVE
    return res.status


def _oracle_dict(res: OracleResult, spec: GridSpec) -> Dict[str, Any]:
    return {"status": res.status, "value": res.value, "x": None if res.x is None else res.x.tolist(),
            "violation": res.violation, "grid_value": res.grid_value, "evaluated": res.evaluated,
            "feasible_points": res.feasible_points, "per_dim": list(spec.counts), "tol": spec.tol}


def _run_oracle(p: ProblemInstance, cfg, rep: Report) -> OracleResult:
    try:
        spec = GridSpec.for_problem(p, int(cfg["per_dim"]), tol=float(cfg["oracle_tol"]))
    except ValueError as exc:
        raise InputError(f"oracle: {exc}") from None
    res = grid_minimize(p, spec, polish=int(cfg["polish"]))
    rep.oracle = _oracle_dict(res, spec)
    return res


def _instance(pf: ProblemFile, cfg) -> ProblemInstance:
    return pf.instance(exclude_tags=cfg["exclude_tags"], fold_tags=cfg["fold_tags"])


def cmd_degree(args, pf, cfg, rep: Report) -> int:
    p = _instance(pf, cfg)
    targets = [("objective", p.f)] + list(zip(p.ineq_names, p.ineqs)) + list(zip(p.eq_names, p.eqs))
    if args.constraint:
        targets = [t for t in targets if t[0] == args.constraint]
        if not targets:
            raise InputError(f"no constraint named {args.constraint!r}")
    code = EXIT_OK
    for name, g in targets:
        try:
            rep.results[name] = p.ring.degree(g)
        except NotInRingError as exc:
            rep.results[name] = "NOT_IN_RING"
            rep.messages.append(f"{name}: {exc}")
            code = EXIT_CHECK
    rep.results["ring_size"] = len(p.ring)
    return code


def _lower_level(p, d, cfg, rep, recover: bool, cert_out: Optional[str] = None) -> LowerBoundResult:
    res = solve_lower(p, d, opts=_opts(cfg), samples=int(cfg["samples"]))
    rep.bounds.append(_lower_row(res))
    if res.verification is not None and not res.verification.passed:
        rep.messages.extend(f"level {d}: {v}" for v in res.verification.violations)
    if recover and res.dual_moments is not None:
        for c in recover_solutions(res, p):
            rep.candidates.append({"level": d, "x": c.x.tolist(), "value": c.value, "violation": c.violation,
                                   "source": c.source})
    if cert_out and res.certificate is not None:
        with open(cert_out, "w", encoding="utf-8") as fh:
            fh.write(render_certificate(res.lagrangian, res.certificate, p.X, level=d, bound=res.bound))
        rep.results["certificate_file"] = cert_out
    return res


def cmd_lower(args, pf, cfg, rep: Report) -> int:
    p = _instance(pf, cfg)
    res = _lower_level(p, int(cfg["level"]), cfg, rep, not args.no_recover, args.certificate_out)
    return _exit_for([res.status], cfg)


def cmd_upper(args, pf, cfg, rep: Report) -> int:
    p = _instance(pf, cfg)
    st = _upper(p, int(cfg["level"]), cfg["mode"], cfg, rep)
    return _exit_for([st], cfg)


def cmd_solve(args, pf, cfg, rep: Report) -> int:
    p = _instance(pf, cfg)
    statuses = []
    top = int(cfg["level"])
    lo_level = min(int(cfg["min_level"]), top)
    bounds = []
    for d in range(lo_level, top + 1):
        res = _lower_level(p, d, cfg, rep, recover=(d == top))
        statuses.append(res.status)
        bounds.append(res.bound)
    orc = None
    try:
        orc = _run_oracle(p, cfg, rep)
    except InputError as exc:
        rep.messages.append(str(exc))
    if cfg["upper_level"] is not None:
        statuses.append(_upper(p, int(cfg["upper_level"]), cfg["mode"], cfg, rep))
    lower_best = max([b for b in bounds if not math.isnan(b)], default=-math.inf)
    rep.results["lower_bound"] = lower_best
    if rep.candidates:
        feas = [c for c in rep.candidates if c["violation"] <= 1e-5]
        if feas:
            rep.results["best_candidate_value"] = min(c["value"] for c in feas)
    if orc is not None and orc.found:
        rep.results["oracle_value"] = orc.value
        rep.results["gap_to_oracle"] = orc.value - lower_best
        if lower_best > orc.value + 1e-6 * max(1.0, abs(orc.value)):
            rep.messages.append("lower bound exceeds the oracle value beyond tolerance")
    ups = [r["bound"] for r in rep.bounds if r["kind"] == "upper"]
    if ups:
        rep.results["upper_bound"] = ups[-1]
    return _exit_for(statuses, cfg)


def cmd_oracle(args, pf, cfg, rep: Report) -> int:
    p = _instance(pf, cfg)
    res = _run_oracle(p, cfg, rep)
    return EXIT_OK if res.found else EXIT_CHECK


def cmd_check_cert(args, cfg, rep: Report) -> int:
    try:
        with open(args.certificate, encoding="utf-8") as fh:
            f, cert, X, meta = parse_certificate(fh.read())
    except OSError as exc:
        raise InputError(str(exc)) from None
    kw = {"tol": args.tol} if args.tol is not None else {}
    ver = verify_certificate(f, cert, X, **kw)
    rep.results.update({k: v for k, v in meta.items() if k in ("level", "bound")})
    rep.results["passed"] = ver.passed
    rep.results["max_mismatch"] = ver.max_mismatch
    rep.results["violations"] = list(ver.violations)
    rep.messages.extend(ver.violations)
    return EXIT_OK if ver.passed else EXIT_CHECK


def _exit_for(statuses: Sequence[Status], cfg) -> int:
    if any(s is Status.INCONCLUSIVE for s in statuses) and not cfg["best_effort"]:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


COMMANDS = {"degree": cmd_degree, "lower": cmd_lower, "upper": cmd_upper, "solve": cmd_solve,
            "oracle": cmd_oracle}


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    rep = Report(args.command, argv)
    try:
        pf = None
        if args.command != "check-cert":
            rep.problem = args.problem
            pf = load_problem_file(args.problem)
            rep.messages.extend(pf.warnings)
        cfg, src, defaults = resolve_config(args, pf)
        rep.config, rep.sources, rep.defaults = cfg, src, defaults
        t0 = time.perf_counter()
        if args.command == "check-cert":
            code = cmd_check_cert(args, cfg, rep)
        else:
            code = COMMANDS[args.command](args, pf, cfg, rep)
        rep.results["wall_time"] = time.perf_counter() - t0
    except (ProblemFileError, InputError, OSError, InfeasibleSetError) as exc:
        diags = getattr(exc, "diagnostics", None)
        for d in diags or [exc]:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INPUT
    except SolverInconclusive as exc:
        rep.messages.append(str(exc))
        code = EXIT_OK if getattr(args, "best_effort", False) else EXIT_INCONCLUSIVE
    except NotInRingError as exc:
        rep.messages.append(str(exc))
        code = EXIT_CHECK
    rep.exit_code = code
    sys.stdout.write(rep.to_json() + "\n" if args.json else rep.to_text())
    if args.report_dir:
        rep.write(args.report_dir)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
