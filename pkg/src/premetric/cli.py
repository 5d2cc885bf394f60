"""Command-line entry point: ``premetric {validate,analyze,correct,group}``.

Every command prints one JSON report on stdout. Exit codes: 0 metric or
success, 1 valid pre-metric with triangle violations, 2 input error,
3 correction infeasible.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import ZERO_TOLERANCE, normalize, triangle_violations, validate_premetric
from .correction import DEFAULT_DEPTH, S_TOLERANCE, correct_premetric
from .deficiency import (
    CONTINUITY_TOLERANCE,
    EQUIVALENCE_TOLERANCE,
    check_td_axioms,
    default_grid,
    empirical_td,
    local_continuity_modulus,
    monotone_envelope,
)
from .errors import InvalidGroup, NotATDFunction, PreMetricError
from .groups import build_invariant_metric, group_from_json

SCHEMA = "premetric.run-report/1"

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3


def parse_grid(text: str) -> np.ndarray:
    """``A:B:STEP`` -> evenly spaced points from A to B inclusive."""
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like A:B:STEP, got {text!r}") from None
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    count = int(round((b - a) / step)) + 1
    return np.linspace(a, b, count)


def _report(args, digest, results, warnings=(), status=EXIT_OK):
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "command", "path", "grid_points")}
    return {
        "schema": SCHEMA,
        "command": args.command,
        "input": {"path": args.path, "sha256": digest},
        "parameters": params,
        "results": results,
        "warnings": list(warnings),
        "exit_status": status,
    }


def _fail(args, digest, exc, status=EXIT_INPUT, extra=None):
    print(f"premetric {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
    results = {"error": type(exc).__name__, "message": str(exc)}
    if extra:
        results.update(extra)
    return _report(args, digest, results, status=status), status


def _load(args):
    data = io.read_matrix(args.path, args.format)
    h = validate_premetric(data.matrix, args.zero_tolerance, data.labels)
    return data, h


def cmd_validate(args):
    digest = ""
    try:
        data, h = _load(args)
        digest = data.digest
    except PreMetricError as exc:
        return _fail(args, digest, exc)
    tol = max(args.violation_tolerance, data.tolerance)
    found = triangle_violations(h, tol)
    status = EXIT_OK if not found else EXIT_VIOLATIONS
    results = {
        "n": h.n,
        "labels": list(h.labels) if h.labels else None,
        "premetric": {"symmetric": True, "reflexive": True, "nonnegative": True},
        "merged_points": len(data.matrix) - h.n,
        "tolerance": tol,
        "is_metric": not found,
        "violation_count": len(found),
        "violations": [v.to_dict() for v in found[: args.max_violations]],
    }
    return _report(args, digest, results, h.warnings, status), status


def _write_plot_data(prefix: str, modulus, td, grid):
    with open(f"{prefix}.modulus.csv", "w") as fh:
        fh.write("delta,omega\n")
        for dlt, om in zip(modulus.deltas, modulus.omega):
            fh.write(f"{float(dlt)!r},{float(om)!r}\n")
    with open(f"{prefix}.td.csv", "w") as fh:
        fh.write("a,b,g\n")
        for a in grid:
            for b in grid:
                fh.write(f"{float(a)!r},{float(b)!r},{float(td(a, b))!r}\n")


def cmd_analyze(args):
    digest = ""
    try:
        data, h = _load(args)
        digest = data.digest
        hn, scale = normalize(h)
    except PreMetricError as exc:
        return _fail(args, digest, exc)
    td = empirical_td(hn)
    if args.envelope:
        td = monotone_envelope(td)
    modulus = local_continuity_modulus(hn, args.grid_points, args.continuity_tolerance)
    grid = args.grid_points if args.grid_points is not None else default_grid(modulus)
    axioms = check_td_axioms(td, grid)
    if args.plot_data:
        _write_plot_data(args.plot_data, modulus, td, grid)
    results = {
        "n": hn.n,
        "scale": scale,
        "td": td.to_dict(),
        "axioms": axioms.to_dict(),
        "modulus": modulus.to_dict(),
        "locally_continuous": modulus.is_locally_continuous,
    }
    return _report(args, digest, results, h.warnings), EXIT_OK


def _companion(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def cmd_correct(args):
    digest = ""
    try:
        data, h = _load(args)
        digest = data.digest
        result = correct_premetric(h, args.depth, args.s_tolerance,
                                   args.continuity_tolerance, args.equivalence_tolerance)
    except NotATDFunction as exc:
        return _fail(args, digest, exc, EXIT_INFEASIBLE,
                     {"level": exc.level, "witness": exc.witness, "partial": exc.partial})
    except PreMetricError as exc:
        return _fail(args, digest, exc)
    f = result.function
    results = dict(result.report)
    results["function"] = f.to_dict()
    if args.out:
        out = Path(args.out)
        io.write_csv(out, result.matrix, result.labels, tolerance=f.slack)
        io.write_json(_companion(out, ".correction.json"), f.to_dict())
        results["outputs"] = [str(out), str(_companion(out, ".correction.json"))]
    status = EXIT_OK if result.report["triangle"]["pass"] else EXIT_VIOLATIONS
    return _report(args, digest, results, h.warnings, status), status


def cmd_group(args):
    digest = ""
    try:
        data, digest = io.read_json(args.path)
        group, metric = group_from_json(data)
        result = build_invariant_metric(group, metric, args.depth, args.s_tolerance,
                                        args.continuity_tolerance, args.equivalence_tolerance)
    except InvalidGroup as exc:
        return _fail(args, digest, exc, extra={"witness": exc.witness})
    except NotATDFunction as exc:
        return _fail(args, digest, exc, EXIT_INFEASIBLE,
                     {"level": exc.level, "witness": exc.witness, "partial": exc.partial})
    except PreMetricError as exc:
        return _fail(args, digest, exc)
    results = dict(result.report)
    if args.out:
        out = Path(args.out)
        tol = result.function.slack if result.function else 0.0
        io.write_csv(out, result.matrix, group.labels, tolerance=tol)
        io.write_csv(_companion(out, ".premetric.csv"), result.premetric.values, group.labels)
        outputs = [str(out), str(_companion(out, ".premetric.csv"))]
        if result.function is not None:
            io.write_json(_companion(out, ".correction.json"), result.function.to_dict())
            outputs.append(str(_companion(out, ".correction.json")))
        results["outputs"] = outputs
    ok = result.report["left_invariance"]["pass"]
    if "correction" in result.report:
        ok = ok and result.report["correction"]["triangle"]["pass"]
    status = EXIT_OK if ok else EXIT_VIOLATIONS
    return _report(args, digest, results, status=status), status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("path", help="input file")
    common.add_argument("--format", choices=["csv", "json"], default=None,
                        help="input format (default: from the file extension)")
    common.add_argument("--zero-tolerance", type=float, default=ZERO_TOLERANCE)
    common.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    common.add_argument("--s-tolerance", type=float, default=S_TOLERANCE)
    common.add_argument("--continuity-tolerance", type=float, default=CONTINUITY_TOLERANCE)
    common.add_argument("--equivalence-tolerance", type=float, default=EQUIVALENCE_TOLERANCE)
    common.add_argument("--out", default=None, help="output matrix path (CSV)")
    common.add_argument("--grid", default=None, metavar="A:B:STEP",
                        help="evaluation grid for analyze")

    parser = argparse.ArgumentParser(prog="premetric", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check pre-metric axioms and triangles")
    p.add_argument("--violation-tolerance", type=float, default=0.0)
    p.add_argument("--max-violations", type=int, default=100)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", parents=[common], help="deficiency table, axioms, modulus")
    p.add_argument("--envelope", action="store_true", help="report the monotone envelope")
    p.add_argument("--plot-data", default=None, metavar="PREFIX",
                   help="write PREFIX.modulus.csv and PREFIX.td.csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("correct", parents=[common], help="build f and write the metric f(h)")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("group", parents=[common], help="left-invariant metric on a finite group")
    p.set_defaults(func=cmd_group)
    return parser


def run(argv=None, stdout=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.grid_points = parse_grid(args.grid) if args.grid is not None else None
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    report, status = args.func(args)
    (stdout or sys.stdout).write(io.dumps(report))
    return status


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
