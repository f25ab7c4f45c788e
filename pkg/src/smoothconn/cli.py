"""Command-line interface: ``smoothconn analyze | query | trace | validate``.

Exit codes: 0 success (or "connected"), 1 "disconnected", 2 invalid input,
invalid routing function or any other error, 3 analysis incomplete.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .connectivity import (
    AnalysisError,
    ConnectivityReport,
    InvalidRoutingFunction,
    analyze,
    filter_report,
    find_routing_points,
    locate,
)
from .flow import FlowError, emanate, flow_to_limit
from .problem import Problem, ProblemError, load_problem
from .routing import RoutingError
from .solver import SolverError
from .variety import VarietyError, on_variety

SCHEMA_VERSION = 1
EXIT_OK, EXIT_DISCONNECTED, EXIT_ERROR, EXIT_INCOMPLETE = 0, 1, 2, 3

log = logging.getLogger("smoothconn")

# a coordinate vector such as "-1,1" would otherwise be mistaken for an option
_VECTOR = re.compile(r"^-[0-9.]+([eE][-+]?\d+)?(,[-+0-9.eE]+)+$")


class CliError(Exception):
    pass


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot read {text!r} as a comma-separated vector") from exc


def _overrides(args) -> dict[str, str]:
    out = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = str(args.seed)
    if getattr(args, "backend", None):
        out["backend"] = args.backend
    for name in ("grad", "eig", "f", "level", "rank"):
        value = getattr(args, f"tol_{name}", None)
        if value is not None:
            out[f"tol.{name}"] = repr(value)
    return out


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _report_document(problem: Problem, report: ConnectivityReport, status: str, message: str = "") -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "problem_hash": problem.digest,
        "problem_path": problem.path,
        "overrides": problem.overrides,
        "status": status,
        "message": message,
        "problem": problem.echo(),
        "config": problem.config.to_dict(),
        "report": report.to_dict(),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    if problem.orthant is not None and status == "ok":
        try:
            filtered = filter_report(report, problem.orthant, problem.rf, problem.orthant_asserted)
            doc["orthant_report"] = {"orthant": "".join(problem.orthant), **filtered.to_dict()}
        except AnalysisError as exc:
            doc["orthant_report"] = {"orthant": "".join(problem.orthant), "error": str(exc)}
    return doc


def _write_json(doc: dict, out: str | None):
    text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _summary(report: ConnectivityReport) -> str:
    sizes = [len(c) for c in report.components]
    return (f"routing points: {len(report.routing_points)}  index counts: {report.index_counts}  "
            f"euler: {report.euler}  components: {len(report.components)} (sizes {sizes})")


def cmd_analyze(args) -> int:
    problem = load_problem(args.problem, _overrides(args))
    t0 = time.perf_counter()
    try:
        report = analyze(problem.rf, problem.spec, problem.config)
    except InvalidRoutingFunction as exc:
        _write_json(_report_document(problem, exc.report, "invalid", str(exc)), args.out)
        print(f"invalid routing function: {exc}", file=sys.stderr)
        return EXIT_ERROR
    elapsed = time.perf_counter() - t0
    status = "ok" if report.complete else "incomplete"
    doc = _report_document(problem, report, status)
    _write_json(doc, args.out)
    if args.out not in (None, "-"):
        print(f"{_summary(report)}  ({elapsed:.1f} s)", file=sys.stderr)
        if "orthant_report" in doc and "components" in doc["orthant_report"]:
            o = doc["orthant_report"]
            print(f"orthant {o['orthant']}: {len(o['routing_points'])} routing points, "
                  f"{o['n_components']} components", file=sys.stderr)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not report.complete:
        print("analysis incomplete; see warnings", file=sys.stderr)
        return EXIT_INCOMPLETE
    return EXIT_OK


def _load_report(args) -> tuple[Problem, ConnectivityReport]:
    try:
        doc = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read report {args.report}: {exc}") from exc
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise CliError(f"report schema version {doc.get('schema_version')} is not {SCHEMA_VERSION}")
    problem = load_problem(args.problem, doc.get("overrides") or {})
    if doc.get("problem_hash") != problem.digest:
        raise CliError("problem hash mismatch: the report was produced from a different problem file")
    if doc.get("status") != "ok" and doc.get("status") != "incomplete":
        raise CliError(f"report status is {doc.get('status')!r}; no usable routing table")
    return problem, ConnectivityReport.from_dict(doc["report"])


def _check_point(problem: Problem, p: np.ndarray, label: str):
    if p.shape != (problem.spec.n,):
        raise CliError(f"{label} has {p.size} coordinates, expected {problem.spec.n}")


def cmd_query(args) -> int:
    problem, report = _load_report(args)
    p, q = args.p, args.q
    _check_point(problem, p, "p")
    _check_point(problem, q, "q")
    i, _ = locate(report, problem.rf, problem.spec, p, problem.config)
    j, _ = locate(report, problem.rf, problem.spec, q, problem.config)
    same = report.component_of(i) == report.component_of(j)
    print("connected" if same else "disconnected")
    print(f"p flows to routing point {i}, q flows to routing point {j}", file=sys.stderr)
    return EXIT_OK if same else EXIT_DISCONNECTED


def cmd_trace(args) -> int:
    problem, report = _load_report(args)
    rf, spec, cfg = problem.rf, problem.spec, problem.config
    table = report.routing_points
    if args.x0 is not None:
        x0 = args.x0
        _check_point(problem, x0, "x0")
        if not on_variety(spec, x0, 1e-8):
            raise CliError(f"x0 = {x0.tolist()} is not on the variety")
        for j, z in enumerate(table):
            if np.linalg.norm(x0 - z.z) <= cfg.flow.snap_radius:
                raise CliError(f"x0 is routing point {j}: stationary point; supply direction "
                               "(use --saddle with --direction)")
        traj = flow_to_limit(rf, spec, x0, table, cfg.flow, cfg.tol)
    else:
        k = args.saddle
        if not 0 <= k < len(table):
            raise CliError(f"routing point {k} does not exist (table has {len(table)})")
        if args.direction is None:
            raise CliError(f"routing point {k}: stationary point; supply direction")
        z = table[k]
        if z.index == 0:
            raise CliError(f"routing point {k} has index 0 and no unstable directions")
        traj = emanate(rf, spec, z, args.direction, args.sense, table, cfg.flow, cfg.tol, z_index=k)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(list(problem.names) + ["r"])
        for x, r in zip(traj.points, traj.r_values):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(r))])
    finally:
        if out is not sys.stdout:
            out.close()
    lim = traj.limit_routing_point
    print(f"{len(traj.points)} vertices, status {traj.status}, limit routing point "
          f"{lim if lim is not None else 'none'}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    problem = load_problem(args.problem, _overrides(args))
    search = find_routing_points(problem.rf, problem.spec, problem.config)
    v = search.validation
    for name in sorted(v.conditions):
        print(f"{name}: {v.conditions[name]}")
    print(f"routing points: {len(search.points)}  dropped on V(f): {search.dropped_on_vf}")
    if not search.complete:
        print("warning: solver output may be incomplete", file=sys.stderr)
    if v.valid:
        print("valid")
        return EXIT_OK
    for msg in v.messages:
        print(msg, file=sys.stderr)
    print("invalid")
    return EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smoothconn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--seed", type=int, help="overrides the problem file seed")
        p.add_argument("--backend", choices=("homotopy", "multistart", "import"))
        for name in ("grad", "eig", "f", "level", "rank"):
            p.add_argument(f"--tol-{name}", type=float, metavar="X", help=f"{name} tolerance")

    p = sub.add_parser("analyze", help="routing points, Euler characteristic and components")
    p.add_argument("problem")
    p.add_argument("-o", "--out", help="JSON report path (default: stdout)")
    solver_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("query", help="are two points on the same connected component")
    p.add_argument("problem")
    p.add_argument("report", help="JSON report written by analyze")
    p.add_argument("p", type=_vector, help="comma-separated coordinates")
    p.add_argument("q", type=_vector)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("trace", help="export a gradient-flow polyline as CSV")
    p.add_argument("problem")
    p.add_argument("report", help="JSON report written by analyze")
    start = p.add_mutually_exclusive_group(required=True)
    start.add_argument("--x0", type=_vector, help="start point on the variety")
    start.add_argument("--saddle", type=int, help="routing point to emanate from")
    p.add_argument("--direction", type=int, help="unstable direction of the routing point")
    p.add_argument("--sense", type=int, choices=(1, -1), default=1)
    p.add_argument("-o", "--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("validate", help="check the routing-function conditions")
    p.add_argument("problem")
    solver_flags(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = [" " + a if _VECTOR.match(a) else a for a in argv]
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ProblemError, CliError, AnalysisError, FlowError, SolverError,
            RoutingError, VarietyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
