"""Command line interface.

Exit codes: 0 success, 2 argument error, 3 a study produced failures (the
partial report is still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..calibration import Calibration
from ..onet.build import OperatorNet, PlanError, build_onet, build_rd_onet, explicit_plan, make_plan
from ..problem import ProblemSpec, model_problem, rd_model_problem
from ..spectral.basis import PeriodicBasis
from ..spectral.galerkin import assemble, spectrum_bounds
from ..spectral.norms import error_norms
from ..spectral.quadrature import gauss_lobatto
from .report import FORMATS, emit_report, load_report
from .studies import (CONVERGENCE_COLUMNS, calibration_study, convergence_study, invnet_study, lipschitz_study,
                      parametric_study, size_scaling_study)

BUILTIN = {"model-1d": lambda: model_problem(1), "model-2d": lambda: model_problem(2), "rd-1d": rd_model_problem}

EXIT_OK, EXIT_ARGS, EXIT_STUDY = 0, 2, 3


class ArgumentProblem(Exception):
    pass


def load_problem(ref: str | None) -> ProblemSpec:
    if ref is None:
        return model_problem(1)
    if ref in BUILTIN:
        return BUILTIN[ref]()
    path = Path(ref)
    if not path.is_file():
        raise ArgumentProblem(f"problem {ref!r} is neither a file nor one of {sorted(BUILTIN)}")
    try:
        return ProblemSpec.load(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ArgumentProblem(f"cannot read problem file {ref}: {exc}") from exc


def _p_range(text: str | None, default) -> list[int]:
    if text is None:
        return list(default)
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ArgumentProblem(f"bad p range {text!r}; use 'lo:hi' or a comma list") from None


def _floats(text: str | None, default) -> list[float]:
    if text is None:
        return list(default)
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ArgumentProblem(f"bad number list {text!r}") from None


def _write_reports(rep, args, stem=None):
    out = Path(args.out or ".")
    fmts = FORMATS if args.format == "all" else [args.format]
    paths = [emit_report(rep, fmt, out, stem) for fmt in fmts]
    for p in paths:
        print(f"wrote {p}")
    for f in rep.failures:
        print(f"FAIL: {f}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_STUDY


def _load_calibration(args, problem):
    if args.calibration:
        return Calibration.from_dict(json.loads(Path(args.calibration).read_text()))
    cal, rep = calibration_study(problem, seed=args.seed)
    if cal is None:
        raise PlanError("calibration failed: " + "; ".join(rep.failures))
    return cal


# ------------------------------------------------------------------ commands

def cmd_solve(args):
    problem = load_problem(args.problem)
    p = args.p or problem.p or 8
    q = args.q or problem.q or p + 1
    if q < p + 1:
        raise ArgumentProblem(f"--q must be at least p+1 = {p + 1}")
    sys_ = assemble(problem.coefficient, PeriodicBasis(problem.d, p), gauss_lobatto(q, problem.d), problem.source)
    exact = problem.reference(problem.coefficient)
    l2, h1 = error_norms(exact, sys_.field(), d=problem.d)
    lo, hi = spectrum_bounds(sys_, check=False)
    row = [p, q, sys_.basis.size, q ** problem.d, l2, h1, lo, hi]
    print(",".join(CONVERGENCE_COLUMNS))
    print(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"p": p, "q": q, "d": problem.d, "extended": sys_.basis.extended,
               "coefficients": sys_.solution.tolist()}
        (out / "solution.json").write_text(json.dumps(doc, indent=1))
        print(f"wrote {out / 'solution.json'}")
    return EXIT_OK


def cmd_converge(args):
    problem = load_problem(args.problem)
    default = range(4, 17) if problem.d == 1 else range(3, 9)
    if args.p is not None:
        default = range(2 if problem.d > 1 else 3, args.p + 1)
    ps = _p_range(args.p_range, default)
    q_off = 1 if args.q is None else args.q
    rep = convergence_study(problem, ps, (lambda p: p + q_off), seed=args.seed)
    if args.out is None and args.format == "csv":
        sys.stdout.write(rep.to_csv())
        for f in rep.failures:
            print(f"FAIL: {f}", file=sys.stderr)
        return EXIT_OK if rep.passed else EXIT_STUDY
    return _write_reports(rep, args, "convergence")


def cmd_calibrate(args):
    problem = load_problem(args.problem)
    cal, rep = calibration_study(problem, _p_range(args.p_range, range(2, {1: 21, 2: 11, 3: 7}[problem.d])),
                                 seed=args.seed)
    if cal is not None:
        out = Path(args.out or ".")
        out.mkdir(parents=True, exist_ok=True)
        (out / "calibration.json").write_text(json.dumps(cal.as_dict(), indent=1))
        print(f"C_G = {cal.C_G:.6g}  b_G = {cal.b_G:.6g}  sup_u = {cal.sup_u:.6g}")
        print(f"wrote {out / 'calibration.json'}")
    return _write_reports(rep, args, "calibration")


def cmd_build(args):
    problem = load_problem(args.problem)
    extended = problem.kind != "scalar"
    bounds = problem.bounds if not extended else (problem.coefficient.coercivity, problem.coefficient.continuity)
    if args.eps_inv is not None or args.eps_b is not None:
        if args.p is None or args.eps_inv is None or args.eps_b is None:
            raise ArgumentProblem("explicit builds need --p, --eps-inv and --eps-b")
        plan = explicit_plan(problem.d, args.p, args.q, args.eps_inv, args.eps_b, bounds, extended=extended,
                             preconditioner=args.preconditioner)
    else:
        if args.eps is None:
            raise ArgumentProblem("give --eps, or --p with --eps-inv and --eps-b")
        plan = make_plan(problem.d, args.eps, _load_calibration(args, problem), bounds, extended=extended,
                         preconditioner=args.preconditioner, p_override=args.p)
    onet = build_rd_onet(problem, plan) if extended else build_onet(problem, plan)
    out = onet.save(args.out or "onet")
    print(f"p={plan.p} n_b={plan.n_b} n_q={plan.n_q} branch size={onet.branch.size} depth={onet.branch.depth} "
          f"trunk size={onet.trunk.size} depth={onet.trunk.depth}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args):
    if not args.bundle:
        raise ArgumentProblem("eval-onet needs --bundle <dir>")
    if not (Path(args.bundle) / "meta.json").is_file():
        raise ArgumentProblem(f"{args.bundle} is not a bundle directory (no meta.json)")
    onet = OperatorNet.load(args.bundle)
    problem = load_problem(args.problem)
    if onet.encoder.kind == "parametric":
        raise ArgumentProblem("parametric bundles are evaluated from Python")
    d = onet.trunk.input_dim
    if args.points:
        try:
            pts = np.array([[float(v) for v in s.split(",")] for s in args.points.split(";")])
        except ValueError:
            raise ArgumentProblem(f"bad --points {args.points!r}; use 'x1,x2;x1,x2'") from None
        if pts.shape[1] != d:
            raise ArgumentProblem(f"points must have {d} coordinates")
    else:
        axes = [np.linspace(0, 1, args.grid)] * d
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    field = onet.field(problem.coefficient)
    vals = field.value(pts)
    print(",".join([f"x{i + 1}" for i in range(d)] + ["u"]))
    for x, v in zip(pts, vals):
        print(",".join(repr(float(c)) for c in x) + "," + repr(float(v)))
    exact = problem.reference(problem.coefficient)
    l2, h1 = error_norms(exact, field, d=d)
    print(f"# l2_error={l2!r} h1_error={h1!r}", file=sys.stderr)
    return EXIT_OK


def cmd_study(args):
    if args.study == "inv":
        rep = invnet_study(n_samples=args.samples, seed=args.seed)
    elif args.study == "size":
        problem = load_problem(args.problem)
        cal = _load_calibration(args, problem) if args.calibration else None
        rep = size_scaling_study(problem, _floats(args.eps_list, (1e-1, 3e-2, 1e-2, 3e-3)), cal,
                                 n_test=args.n_test, seed=args.seed)
    elif args.study == "lipschitz":
        rep = lipschitz_study(load_problem(args.problem), _floats(args.eps_list, (1e-1, 1e-2, 1e-3, 1e-4)),
                              p=args.p, seed=args.seed)
    else:
        rep = parametric_study(_floats(args.eps_list, [args.eps or 0.1]), seed=args.seed)
    return _write_reports(rep, args)


def cmd_emit(args):
    if not args.report:
        raise ArgumentProblem("emit needs --report <file.json>")
    rep = load_report(args.report)
    return _write_reports(rep, args)


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", help=f"problem JSON file or one of {sorted(BUILTIN)} (default model-1d)")
    common.add_argument("--p", type=int, help="polynomial order")
    common.add_argument("--q", type=int, help="quadrature order (converge: offset q - p)")
    common.add_argument("--eps", type=float, help="target H1 accuracy")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=list(FORMATS) + ["all"], default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="spectral-onet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="Galerkin solve of the problem's coefficient")
    s.set_defaults(func=cmd_solve)
    s = sub.add_parser("converge", parents=[common], help="convergence study over p")
    s.add_argument("--p-range", help="'lo:hi' or comma list")
    s.set_defaults(func=cmd_converge)
    s = sub.add_parser("calibrate", parents=[common], help="fit C_G, b_G over the coefficient family")
    s.add_argument("--p-range")
    s.set_defaults(func=cmd_calibrate)
    s = sub.add_parser("build-onet", parents=[common], help="build an operator net bundle")
    s.add_argument("--eps-inv", type=float)
    s.add_argument("--eps-b", type=float)
    s.add_argument("--calibration", help="calibration.json from the calibrate command")
    s.add_argument("--preconditioner", choices=["symmetric", "left"], default="symmetric")
    s.set_defaults(func=cmd_build)
    s = sub.add_parser("eval-onet", parents=[common], help="evaluate a bundle for the problem's coefficient")
    s.add_argument("--bundle")
    s.add_argument("--points", help="'x1,x2;x1,x2;...'")
    s.add_argument("--grid", type=int, default=11)
    s.set_defaults(func=cmd_eval)
    s = sub.add_parser("study", parents=[common], help="inv | size | lipschitz | parametric")
    s.add_argument("study", choices=["inv", "size", "lipschitz", "parametric"])
    s.add_argument("--eps-list", help="comma list of targets (lipschitz: perturbation scales)")
    s.add_argument("--samples", type=int, default=100, help="random matrices per inversion cell")
    s.add_argument("--n-test", type=int, default=20, help="test coefficients for the size study")
    s.add_argument("--calibration")
    s.set_defaults(func=cmd_study)
    s = sub.add_parser("emit", parents=[common], help="re-render a JSON report")
    s.add_argument("--report")
    s.set_defaults(func=cmd_emit)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)          # exits with status 2 on bad arguments
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ArgumentProblem, PlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
