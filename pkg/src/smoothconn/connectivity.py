"""Euler characteristic and smoothly connected components from routing points.

``analyze`` finds and classifies the routing points, emanates trajectories
from every saddle along both senses of each unstable direction, and merges
the routing points joined by those trajectories.  ``query`` decides
whether two points lie on one component by flowing each to its limit.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .flow import (
    EpsilonInstability,
    FlowConfig,
    FlowError,
    Trajectory,
    emanate,
    flow_to_limit,
)
from .routing import (
    RoutingError,
    RoutingFunction,
    RoutingPoint,
    Tolerances,
    ValidationReport,
    classify,
    critical_system,
    validate_routing_function,
)
from .solver import SolveConfig, solve
from .solver.common import PackedSystem, on_positive_dimensional_set
from .variety import VarietyError, VarietySpec, on_variety

log = logging.getLogger(__name__)


class AnalysisError(RuntimeError):
    pass


class InvalidRoutingFunction(AnalysisError):
    """Validation failed; ``report`` holds the routing points found so far."""

    def __init__(self, message: str, report: "ConnectivityReport"):
        super().__init__(message)
        self.report = report


class QueryError(AnalysisError):
    pass


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return sorted(out.values(), key=lambda g: g[0])


def components_from_adjacency(A: np.ndarray) -> list[list[int]]:
    m = A.shape[0]
    uf = UnionFind(m)
    for i, j in zip(*np.nonzero(A)):
        uf.union(int(i), int(j))
    return uf.groups()


def closure_matrix(components: Sequence[Sequence[int]], m: int) -> np.ndarray:
    M = np.zeros((m, m), dtype=bool)
    for comp in components:
        idx = np.array(comp, dtype=int)
        M[np.ix_(idx, idx)] = True
    return M


def euler_characteristic(points: Sequence[RoutingPoint]) -> int:
    return int(sum((-1) ** p.index for p in points))


@dataclass
class AnalysisConfig:
    solve: SolveConfig = field(default_factory=SolveConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    tol: Tolerances = field(default_factory=Tolerances)
    workers: int = 0  # trajectories; 0 follows the solver setting

    def to_dict(self) -> dict:
        return {
            "solver": self.solve.to_dict(),
            "flow": self.flow.to_dict(),
            "tolerances": dict(self.tol.__dict__),
        }


@dataclass
class Edge:
    source: int
    direction: int
    sense: int
    limit: int
    trajectory: int  # position in ``ConnectivityReport.trajectories``

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ConnectivityReport:
    routing_points: list[RoutingPoint]
    adjacency: np.ndarray
    components: list[list[int]]
    euler: int
    trajectories: list[Trajectory]
    edges: list[Edge]
    validation: ValidationReport
    solver_stats: dict = field(default_factory=dict)
    complete: bool = True
    heuristic: bool = False
    warnings: list[str] = field(default_factory=list)
    dropped_on_vf: int = 0

    @property
    def index_counts(self) -> list[int]:
        top = max((p.index for p in self.routing_points), default=-1)
        counts = [0] * (top + 1)
        for p in self.routing_points:
            counts[p.index] += 1
        return counts

    @property
    def closure(self) -> np.ndarray:
        return closure_matrix(self.components, len(self.routing_points))

    def component_of(self, i: int) -> int:
        for c, comp in enumerate(self.components):
            if i in comp:
                return c
        raise IndexError(i)

    def to_dict(self, with_polylines: bool = True) -> dict:
        return {
            "routing_points": [p.to_dict() for p in self.routing_points],
            "index_counts": self.index_counts,
            "euler": self.euler,
            "adjacency": self.adjacency.astype(int).tolist(),
            "components": [list(c) for c in self.components],
            "n_components": len(self.components),
            "edges": [e.to_dict() for e in self.edges],
            "trajectories": [t.to_dict(with_polylines) for t in self.trajectories],
            "validation": self.validation.to_dict(),
            "solver_stats": self.solver_stats,
            "complete": self.complete,
            "heuristic": self.heuristic,
            "warnings": list(self.warnings),
            "dropped_on_vf": self.dropped_on_vf,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ConnectivityReport:
        pts = [RoutingPoint.from_dict(p) for p in data["routing_points"]]
        m = len(pts)
        return cls(
            routing_points=pts,
            adjacency=np.array(data["adjacency"], dtype=bool).reshape(m, m),
            components=[list(c) for c in data["components"]],
            euler=int(data["euler"]),
            trajectories=[Trajectory.from_dict(t) for t in data.get("trajectories", [])],
            edges=[Edge(**e) for e in data.get("edges", [])],
            validation=ValidationReport.from_dict(data["validation"]),
            solver_stats=dict(data.get("solver_stats", {})),
            complete=bool(data.get("complete", True)),
            heuristic=bool(data.get("heuristic", False)),
            warnings=list(data.get("warnings", [])),
            dropped_on_vf=int(data.get("dropped_on_vf", 0)),
        )


# -- routing points -----------------------------------------------------------


@dataclass
class RoutingSearch:
    points: list[RoutingPoint]
    validation: ValidationReport
    solver_stats: dict
    complete: bool
    heuristic: bool
    dropped_on_vf: int
    warnings: list[str]


def find_routing_points(rf: RoutingFunction, spec: VarietySpec,
                        cfg: AnalysisConfig = AnalysisConfig()) -> RoutingSearch:
    """Solve the critical system, drop solutions on ``V(f)``, classify and validate."""
    tol = cfg.tol
    n = spec.n
    system = critical_system(rf, spec)
    sol = solve(system, cfg.solve, key_dims=n)
    warnings = []
    if sol.rejected:
        warnings.extend(sol.rejected)
    points: list[RoutingPoint] = []
    dropped = 0
    smooth_failures = []
    for x in sol.points:
        z, mu = x[:n], x[n:]
        if abs(rf.f_value(z)) <= tol.f_threshold(rf.f, z):
            dropped += 1
            continue
        try:
            points.append(classify(rf, spec, z, tol, multipliers=mu))
        except VarietyError as exc:
            smooth_failures.append(f"{np.round(z, 6).tolist()}: {exc}")
        except RoutingError as exc:
            warnings.append(f"discarded solution: {exc}")

    # singular solutions off V(f) are degenerate routing points
    packed = PackedSystem(system)
    positive_dim = False
    for x in sol.singular_points:
        z = x[:n]
        if abs(rf.f_value(z)) <= tol.f_threshold(rf.f, z):
            continue
        if on_positive_dimensional_set(packed, x, n):
            positive_dim = True
            continue
        try:
            p = classify(rf, spec, z, tol, multipliers=x[n:], check_gradient=False)
        except (VarietyError, RoutingError) as exc:
            warnings.append(f"singular solution at {np.round(z, 6).tolist()} not classified: {exc}")
            continue
        p.nondegenerate = False
        if all(np.linalg.norm(p.z - q.z) > cfg.solve.dedupe_tol for q in points):
            points.append(p)

    order = sorted(range(len(points)), key=lambda i: tuple(np.round(points[i].z, 8)))
    points = [points[i] for i in order]
    validation = validate_routing_function(rf, spec, points, tol, positive_dimensional=positive_dim)
    if smooth_failures:
        validation.conditions["1_smooth_domain"] = "fail"
        validation.valid = False
        validation.messages.insert(0, "critical points off V(f) at singular points of the variety: "
                                   + "; ".join(smooth_failures))
    else:
        validation.conditions["1_smooth_domain"] = "pass (at every routing point)"
    return RoutingSearch(points, validation, dict(sol.stats), sol.complete, sol.heuristic, dropped, warnings)


# -- Algorithm: components ----------------------------------------------------


def _emanation_job(args):
    rf, spec, points, j, direction, sense, flow_cfg, tol = args
    try:
        traj = emanate(rf, spec, points[j], direction, sense, points, flow_cfg, tol, z_index=j)
        return ("ok", traj, None)
    except EpsilonInstability as exc:
        return ("unstable", exc.trajectories, str(exc))
    except (FlowError, VarietyError) as exc:
        return ("error", None, f"emanation from {j} direction {direction} sense {sense:+d}: {exc}")


def _worker_count(cfg: AnalysisConfig) -> int:
    return cfg.workers if cfg.workers > 0 else cfg.solve.worker_count()


def connect(rf: RoutingFunction, spec: VarietySpec, points: list[RoutingPoint],
            cfg: AnalysisConfig = AnalysisConfig()):
    """Adjacency from saddle emanations; returns ``(A, trajectories, edges, warnings, complete)``."""
    m = len(points)
    A = np.eye(m, dtype=bool)
    jobs = [(rf, spec, points, j, d, s, cfg.flow, cfg.tol)
            for j, p in enumerate(points) if p.index > 0
            for d in range(p.unstable_dirs.shape[0]) for s in (1, -1)]
    workers = _worker_count(cfg)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_emanation_job, jobs))
    else:
        results = [_emanation_job(job) for job in jobs]

    trajectories: list[Trajectory] = []
    edges: list[Edge] = []
    warnings: list[str] = []
    complete = True
    for job, (kind, payload, message) in zip(jobs, results):
        j, d, s = job[3], job[4], job[5]
        if kind == "error":
            warnings.append(message)
            complete = False
            continue
        trajs = [payload] if kind == "ok" else payload
        if kind == "unstable":
            warnings.append(message + "; every limit reached is recorded as an edge")
            complete = False
        for t in trajs:
            t.direction = d
            if t.limit_routing_point is None:
                warnings.append(f"emanation from {j} direction {d} sense {s:+d} ended with status {t.status}")
                complete = False
                continue
            w = t.limit_routing_point
            A[j, w] = A[w, j] = True
            trajectories.append(t)
            edges.append(Edge(j, d, s, w, len(trajectories) - 1))
    return A, trajectories, edges, warnings, complete


def analyze(rf: RoutingFunction, spec: VarietySpec, cfg: AnalysisConfig = AnalysisConfig()) -> ConnectivityReport:
    search = find_routing_points(rf, spec, cfg)
    points = search.points
    m = len(points)
    base = dict(
        routing_points=points,
        euler=euler_characteristic(points),
        validation=search.validation,
        solver_stats=search.solver_stats,
        heuristic=search.heuristic,
        dropped_on_vf=search.dropped_on_vf,
    )
    warnings = list(search.warnings)
    if not search.complete:
        warnings.append("solver reported too many failed paths; the routing-point set may be incomplete")
    if not search.validation.valid:
        report = ConnectivityReport(
            adjacency=np.eye(m, dtype=bool), components=[[i] for i in range(m)],
            trajectories=[], edges=[], complete=False, warnings=warnings, **base)
        raise InvalidRoutingFunction("; ".join(search.validation.messages), report)

    A, trajectories, edges, flow_warnings, flows_complete = connect(rf, spec, points, cfg)
    warnings += flow_warnings
    components = components_from_adjacency(A)
    complete = search.complete and flows_complete

    n_index0 = sum(p.index == 0 for p in points)
    if len(components) > n_index0:
        warnings.append(f"{len(components)} components but only {n_index0} index-0 routing points")
        complete = False
    for c, comp in enumerate(components):
        if not any(points[i].index == 0 for i in comp):
            warnings.append(f"component {c} has no index-0 routing point")
            complete = False
    return ConnectivityReport(
        adjacency=A, components=components, trajectories=trajectories, edges=edges,
        complete=complete, warnings=warnings, **base)


# -- Algorithm: query ---------------------------------------------------------


def locate(report: ConnectivityReport, rf: RoutingFunction, spec: VarietySpec, p,
           cfg: AnalysisConfig = AnalysisConfig()) -> tuple[int, Trajectory | None]:
    """Routing point that ``p`` flows to (or sits on), with the trajectory taken."""
    p = np.asarray(p, dtype=float)
    if p.shape != (spec.n,):
        raise QueryError(f"point has {p.size} coordinates, expected {spec.n}")
    if not on_variety(spec, p, 1e-8):
        raise QueryError(f"point {p.tolist()} is not on the variety")
    if abs(rf.f_value(p)) <= cfg.tol.f_threshold(rf.f, p):
        raise QueryError("point on V(f): not in X_r")
    for j, z in enumerate(report.routing_points):
        if np.linalg.norm(p - z.z) <= cfg.flow.snap_radius:
            return j, None
    try:
        traj = flow_to_limit(rf, spec, p, report.routing_points, cfg.flow, cfg.tol)
    except (FlowError, VarietyError) as exc:
        raise QueryError(f"flow from {p.tolist()} failed: {exc}") from exc
    if traj.limit_routing_point is None:
        raise QueryError(f"flow from {p.tolist()} ended with status {traj.status}")
    return traj.limit_routing_point, traj


def query(report: ConnectivityReport, rf: RoutingFunction, spec: VarietySpec, p, q,
          cfg: AnalysisConfig = AnalysisConfig()) -> bool:
    """Whether ``p`` and ``q`` lie on the same smoothly connected component."""
    i, _ = locate(report, rf, spec, p, cfg)
    j, _ = locate(report, rf, spec, q, cfg)
    return report.component_of(i) == report.component_of(j)


# -- orthant filtering --------------------------------------------------------


class FilterError(AnalysisError):
    pass


def parse_orthant(spec_text: str, n: int) -> tuple[str, ...]:
    signs = tuple(spec_text.replace(",", " ").split())
    if len(signs) == 1 and len(signs[0]) == n:
        signs = tuple(signs[0])
    if len(signs) != n or any(s not in "+-*" for s in signs):
        raise FilterError(f"orthant must list {n} signs from '+', '-', '*', got {spec_text!r}")
    return signs


def filter_report(report: ConnectivityReport, signs: Sequence[str], rf: RoutingFunction,
                  asserted: bool = False) -> ConnectivityReport:
    """Restrict a report to the routing points in an open orthant.

    Constrained coordinates must vanish on ``V(f)`` (``f`` divisible by the
    variable) unless ``asserted``: then no component of ``X_r`` meets a
    coordinate hyperplane, so components never straddle orthants.
    """
    signs = tuple(signs)
    n = rf.n
    if len(signs) != n:
        raise FilterError(f"orthant has {len(signs)} signs, expected {n}")
    constrained = [i for i, s in enumerate(signs) if s != "*"]
    missing = [i for i in constrained if not rf.f.divisible_by_variable(i)]
    if missing and not asserted:
        raise FilterError(
            "orthant filtering needs X_r to avoid the coordinate hyperplanes: f is not divisible by "
            + ", ".join(f"x{i + 1}" for i in missing) + " and no assertion was given")
    if not constrained:
        return report

    def keep(p: RoutingPoint) -> bool:
        return all((p.z[i] > 0) if signs[i] == "+" else (p.z[i] < 0) for i in constrained)

    kept = [i for i, p in enumerate(report.routing_points) if keep(p)]
    new_index = {old: new for new, old in enumerate(kept)}
    points = [report.routing_points[i] for i in kept]
    A = report.adjacency[np.ix_(kept, kept)] if kept else np.zeros((0, 0), dtype=bool)
    components = []
    for comp in report.components:
        sub = [new_index[i] for i in comp if i in new_index]
        if sub:
            components.append(sub)
    components.sort(key=lambda c: c[0])
    trajectories, edges = [], []
    for e in report.edges:
        if e.source in new_index and e.limit in new_index:
            trajectories.append(report.trajectories[e.trajectory])
            edges.append(Edge(new_index[e.source], e.direction, e.sense, new_index[e.limit],
                              len(trajectories) - 1))
    warnings = list(report.warnings)
    warnings.append(f"filtered to orthant {''.join(signs)}: {len(points)} of "
                    f"{len(report.routing_points)} routing points kept")
    return ConnectivityReport(
        routing_points=points,
        adjacency=A,
        components=components,
        euler=euler_characteristic(points),
        trajectories=trajectories,
        edges=edges,
        validation=report.validation,
        solver_stats=report.solver_stats,
        complete=report.complete,
        heuristic=report.heuristic,
        warnings=warnings,
        dropped_on_vf=report.dropped_on_vf,
    )
