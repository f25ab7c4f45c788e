"""Gradient trajectories of a routing function on the variety.

Trajectories follow the normalized intrinsic gradient of ``sigma * r``
(``sigma`` the sign of ``r`` at the start), so ``|r|`` increases along
them.  Each step moves in tangent coordinates and projects back onto the
variety; a trajectory ends when it reaches a known routing point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .routing import (
    RoutingFunction,
    RoutingPoint,
    Tolerances,
    _r_derivatives,
    critical_system,
    least_squares_multipliers,
)
from .solver.common import PackedSystem
from .variety import (
    ProjectionError,
    TangentFrame,
    VarietyError,
    VarietySpec,
    on_variety,
    project_to_variety,
    tangent_frame,
)

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_STEPS = "max_steps"
LEFT_TOLERANCE = "left_tolerance"


class FlowError(RuntimeError):
    pass


class UnknownLimitError(FlowError):
    """The flow stalled at a critical point missing from the routing table."""


class EpsilonInstability(FlowError):
    def __init__(self, message: str, limits: list[int], trajectories: list["Trajectory"]):
        super().__init__(message)
        self.limits = limits
        self.trajectories = trajectories


@dataclass
class FlowConfig:
    h_init: float = 1e-2  # times (1 + |x0|)
    h_floor: float = 1e-9
    grow_after: int = 5
    max_steps: int = 20000
    snap_radius: float = 1e-4
    grad_tol: float | None = None  # None: 2 * |Hessian| * snap_radius at the target
    turn_angle: float = 0.3  # radians between successive step directions
    r_max: float = 1e3
    eps: float = 1e-3
    eps_min: float = 1e-6
    eps_max: float = 1e-2
    mono_slack: float = 1e-12
    verify_snap: bool = True

    def __post_init__(self):
        for name in ("h_init", "h_floor", "snap_radius", "turn_angle", "r_max", "eps", "eps_min", "eps_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.eps_min > self.eps_max:
            raise ValueError("eps_min exceeds eps_max")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Trajectory:
    points: np.ndarray  # (m, n)
    r_values: np.ndarray
    start: np.ndarray
    limit_routing_point: int | None
    status: str
    source: int | None = None  # emanating routing point
    direction: int | None = None
    sense: int = 0
    eps: float = 0.0
    notes: list[str] = field(default_factory=list)

    def to_dict(self, with_points: bool = True) -> dict:
        d = {
            "start": [float(v) for v in self.start],
            "limit": self.limit_routing_point,
            "status": self.status,
            "source": self.source,
            "direction": self.direction,
            "sense": self.sense,
            "eps": self.eps,
            "steps": int(len(self.points)) - 1,
            "notes": list(self.notes),
        }
        if with_points:
            d["points"] = [[float(v) for v in p] for p in self.points]
            d["r_values"] = [float(v) for v in self.r_values]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> Trajectory:
        start = np.array(data["start"], dtype=float)
        pts = np.array(data.get("points", [data["start"]]), dtype=float).reshape(-1, len(start))
        return cls(
            points=pts,
            r_values=np.array(data.get("r_values", []), dtype=float),
            start=start,
            limit_routing_point=data["limit"],
            status=data["status"],
            source=data.get("source"),
            direction=data.get("direction"),
            sense=int(data.get("sense", 0)),
            eps=float(data.get("eps", 0.0)),
            notes=list(data.get("notes", [])),
        )


@lru_cache(maxsize=8)
def _critical_packed(rf: RoutingFunction, spec: VarietySpec) -> PackedSystem:
    return PackedSystem(critical_system(rf, spec))


def verify_critical(rf: RoutingFunction, spec: VarietySpec, x, z, tol: float) -> bool:
    """Newton on the critical system from ``x`` lands on ``z``."""
    packed = _critical_packed(rf, spec)
    mu = least_squares_multipliers(rf, spec, x)
    sol, conv, _, _, _ = packed.newton(np.concatenate([x, mu]), 30, 1e-13)
    if not conv:
        return False
    return bool(np.linalg.norm(sol.real[: spec.n] - z) <= tol)


class _State:
    """Frame, value and normalized ascent direction at a point."""

    __slots__ = ("x", "frame", "r", "igrad", "gnorm", "dir_t", "dir")

    def __init__(self, rf: RoutingFunction, spec: VarietySpec, x, sigma: float, rank_tol: float):
        self.x = x
        self.frame = tangent_frame(spec, x, rank_tol)
        r, grad, _ = _r_derivatives(rf, x, order=1)
        self.r = float(r)
        self.igrad = grad @ self.frame.V
        self.gnorm = float(np.linalg.norm(self.igrad))
        if self.gnorm > 0:
            self.dir_t = sigma * self.igrad / self.gnorm
        else:
            self.dir_t = np.zeros_like(self.igrad)
        self.dir = self.frame.V @ self.dir_t


def _hessian_scale(p: RoutingPoint) -> float:
    return float(np.max(np.abs(p.eigenvalues), initial=0.0))


def _snap_target(state: _State, sigma: float, table: Sequence[RoutingPoint], cfg: FlowConfig,
                 exclude: int | None) -> int | None:
    for j, p in enumerate(table):
        if j == exclude:
            continue
        if np.linalg.norm(state.x - p.z) > cfg.snap_radius:
            continue
        if sigma * p.r_value < sigma * state.r - cfg.mono_slack:
            continue
        gtol = cfg.grad_tol
        if gtol is None:
            gtol = 2.0 * _hessian_scale(p) * cfg.snap_radius + 1e-12
        if state.gnorm <= gtol:
            return j
    return None


def flow_to_limit(
    rf: RoutingFunction,
    spec: VarietySpec,
    x0,
    table: Sequence[RoutingPoint],
    cfg: FlowConfig = FlowConfig(),
    tol: Tolerances = Tolerances(),
    exclude: int | None = None,
) -> Trajectory:
    """Follow the ascent of ``|r|`` from ``x0`` to its limit routing point.

    ``exclude`` names a routing point the trajectory starts next to (an
    emanating saddle); it is ignored by the start check and by snapping.
    """
    x0 = np.asarray(x0, dtype=float)
    if not on_variety(spec, x0):
        raise FlowError(f"start point {x0.tolist()} is not on the variety")
    if abs(rf.f_value(x0)) <= tol.f_threshold(rf.f, x0):
        raise FlowError(f"start point {x0.tolist()} lies on V(f): not in X_r")
    for j, p in enumerate(table):
        if j != exclude and np.linalg.norm(x0 - p.z) <= cfg.snap_radius:
            raise FlowError(f"start point is within the snap radius of routing point {j}")

    try:
        sigma = 1.0 if eval_sign(rf, x0) > 0 else -1.0
        state = _State(rf, spec, x0, sigma, tol.rank)
    except VarietyError as exc:
        raise FlowError(f"start point is not a smooth point: {exc}") from exc
    pts = [x0]
    rvals = [state.r]
    h = cfg.h_init * (1.0 + np.linalg.norm(x0))
    streak = 0
    for _ in range(cfg.max_steps):
        j = _snap_target(state, sigma, table, cfg, exclude)
        if j is not None and (not cfg.verify_snap
                              or verify_critical(rf, spec, state.x, table[j].z, 10 * cfg.snap_radius)):
            pts.append(table[j].z.copy())
            rvals.append(table[j].r_value)
            return Trajectory(np.array(pts), np.array(rvals), x0, j, CONVERGED)
        if state.gnorm == 0.0:
            raise UnknownLimitError(f"flow reached a critical point {state.x.tolist()} missing from the routing table")
        accepted = False
        while h >= cfg.h_floor:
            trial = _try_step(rf, spec, state, sigma, h, cfg, tol)
            if trial is not None:
                accepted = True
                break
            h *= 0.5
            streak = 0
        if not accepted:
            return _stalled(rf, spec, state, pts, rvals, x0, table, cfg)
        state = trial
        pts.append(state.x)
        rvals.append(state.r)
        streak += 1
        if streak >= cfg.grow_after:
            h *= 2.0
            streak = 0
    return Trajectory(np.array(pts), np.array(rvals), x0, None, MAX_STEPS)


def eval_sign(rf: RoutingFunction, x) -> float:
    return float(np.sign(rf.f_value(x)))


def _try_step(rf, spec, state: _State, sigma: float, h: float, cfg: FlowConfig, tol: Tolerances):
    try:
        y = project_to_variety(spec, state.frame, h * state.dir_t)
    except ProjectionError:
        return None
    if np.linalg.norm(y - (state.x + h * state.dir)) > 0.5 * h:
        return None
    if np.linalg.norm(y) > cfg.r_max:
        raise FlowError(f"trajectory left the ball of radius {cfg.r_max}; r may not vanish at infinity")
    if abs(rf.f_value(y)) <= tol.f_threshold(rf.f, y):
        return None
    try:
        new = _State(rf, spec, y, sigma, tol.rank)
    except VarietyError:
        return None
    if not sigma * (new.r - state.r) > 0.0:
        return None
    if new.gnorm > 0 and float(np.dot(new.dir, state.dir)) < np.cos(cfg.turn_angle):
        return None
    return new


def _stalled(rf, spec, state, pts, rvals, x0, table, cfg) -> Trajectory:
    near = [j for j, p in enumerate(table) if np.linalg.norm(state.x - p.z) <= 100 * cfg.snap_radius]
    scale = 1.0 + float(np.linalg.norm(_r_derivatives(rf, state.x, order=1)[1]))
    if not near and state.gnorm <= 1e-6 * scale:
        raise UnknownLimitError(
            f"flow stalled at {state.x.tolist()} (|grad| = {state.gnorm:.2e}) near no known routing point; "
            "the routing-point set may be incomplete")
    traj = Trajectory(np.array(pts), np.array(rvals), x0, None, LEFT_TOLERANCE)
    traj.notes.append(f"step size fell below {cfg.h_floor} at |grad| = {state.gnorm:.3e}")
    return traj


def emanation_eps(eigenvalue: float, cfg: FlowConfig) -> float:
    lam = abs(float(eigenvalue))
    eps = cfg.eps / np.sqrt(lam) if lam > 0 else cfg.eps_max
    return float(np.clip(eps, cfg.eps_min, cfg.eps_max))


def _emanate_once(rf, spec, z: RoutingPoint, frame: TangentFrame, v, sense, eps, table, cfg, tol, z_index):
    p = frame.V.T @ (sense * eps * np.asarray(v, dtype=float))
    try:
        x0 = project_to_variety(spec, frame, p)
    except ProjectionError as exc:
        raise FlowError(f"cannot place the emanation start at eps = {eps:.2e}: {exc}") from exc
    traj = flow_to_limit(rf, spec, x0, table, cfg, tol, exclude=z_index)
    traj.eps = eps
    traj.sense = int(sense)
    traj.source = z_index
    return traj


def emanate(
    rf: RoutingFunction,
    spec: VarietySpec,
    z: RoutingPoint,
    direction: int,
    sense: int,
    table: Sequence[RoutingPoint],
    cfg: FlowConfig = FlowConfig(),
    tol: Tolerances = Tolerances(),
    z_index: int | None = None,
) -> Trajectory:
    """Trajectory leaving ``z`` along ``sense`` times its unstable direction ``direction``.

    The limit is cross-checked with a start four times closer to ``z``; on
    disagreement a third start, sixteen times closer, must agree with the
    second.  Otherwise :class:`EpsilonInstability` carries every limit seen.
    """
    if sense not in (1, -1):
        raise ValueError("sense must be +1 or -1")
    if z.unstable_dirs.shape[0] == 0:
        raise FlowError("routing point of index 0 has no unstable directions")
    if not 0 <= direction < z.unstable_dirs.shape[0]:
        raise ValueError(f"direction {direction} out of range for index {z.index}")
    v = z.unstable_dirs[direction]
    eps = emanation_eps(z.unstable_eigenvalues[direction], cfg)
    frame = tangent_frame(spec, z.z, tol.rank)
    runs = []
    for scale in (1.0, 0.25):
        runs.append(_emanate_once(rf, spec, z, frame, v, sense, eps * scale, table, cfg, tol, z_index))
    if runs[0].limit_routing_point != runs[1].limit_routing_point:
        runs.append(_emanate_once(rf, spec, z, frame, v, sense, eps / 16, table, cfg, tol, z_index))
        if runs[2].limit_routing_point != runs[1].limit_routing_point:
            limits = sorted({t.limit_routing_point for t in runs if t.limit_routing_point is not None})
            raise EpsilonInstability(
                f"emanation from routing point {z_index} direction {direction} sense {sense:+d} "
                f"reaches different limits for eps = {eps:.2e}, {eps / 4:.2e}, {eps / 16:.2e}",
                limits, runs)
        best = runs[2]
        best.notes.append(f"eps reduced to {best.eps:.2e} after disagreement")
    else:
        best = runs[1]
    best.direction = direction
    return best
