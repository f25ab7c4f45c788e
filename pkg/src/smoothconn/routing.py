"""Routing functions ``r = f / D_c^l`` and their routing points.

``D_c(x) = |x - c|^2 + 1`` never vanishes, so ``r`` shares its zero set with
``f``.  A routing point is a critical point of ``r`` restricted to the
variety at which ``r != 0``; its index counts the intrinsic Hessian
eigenvalues that have the same sign as ``r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .polynomial import PolyBundle, Polynomial, PolySystem
from .variety import (
    CurvatureData,
    TangentFrame,
    VarietySpec,
    curvature_matrices,
    tangent_frame,
)


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by classification, validation and analysis."""

    grad: float = 1e-8  # intrinsic gradient at a routing point, relative to 1 + |ambient grad|
    eig: float = 1e-6  # smallest |eigenvalue| relative to the Hessian scale
    f: float = 1e-8  # |f(z)| <= f * (1 + |z|^deg f) puts z on V(f)
    level: float = 1e-6  # relative gap between routing values
    rank: float = 1e-8

    def f_threshold(self, f: Polynomial, z) -> float:
        return self.f * (1.0 + float(np.linalg.norm(z)) ** max(f.degree(), 0))


@dataclass(frozen=True, eq=False)
class RoutingFunction:
    """``r(x) = f(x) / (|x - c|^2 + 1)^exponent``.

    With ``exponent == 0`` the function is ``f`` itself, which is only a
    routing function on a compact variety; the caller must say so through
    ``compact_asserted``.
    """

    f: Polynomial
    center: tuple[Fraction, ...]
    exponent: int
    compact_asserted: bool = False

    def __post_init__(self):
        center = tuple(Fraction(c) for c in self.center)
        object.__setattr__(self, "center", center)
        if len(center) != self.f.nvars:
            raise RoutingError(f"center has {len(center)} entries, expected {self.f.nvars}")
        if self.exponent < 0:
            raise RoutingError("exponent must be non-negative")
        if self.exponent > 0 and 2 * self.exponent <= self.f.degree():
            raise RoutingError(
                f"exponent {self.exponent} too small: need 2*exponent > deg f = {self.f.degree()} "
                "for r to be bounded and vanish at infinity"
            )
        if self.exponent == 0 and not self.compact_asserted:
            raise RoutingError("exponent 0 (r = f) requires asserting that the variety is compact")

    @staticmethod
    def default_exponent(f: Polynomial) -> int:
        return max(f.degree(), 0) // 2 + 1

    @property
    def n(self) -> int:
        return self.f.nvars

    @cached_property
    def c(self) -> np.ndarray:
        return np.array([float(v) for v in self.center])

    @cached_property
    def D(self) -> Polynomial:
        n = self.n
        D = Polynomial.constant(n, 1)
        for i, ci in enumerate(self.center):
            D = D + (Polynomial.variable(n, i) - ci) ** 2
        return D

    @cached_property
    def _grad_f(self) -> list[Polynomial]:
        return [self.f.differentiate(i) for i in range(self.n)]

    @cached_property
    def _bundle(self) -> PolyBundle:
        n = self.n
        grads = self._grad_f
        hess = [grads[a].differentiate(b) for a in range(n) for b in range(n)]
        return PolyBundle([self.f, *grads, *hess], n)

    @cached_property
    def _value_bundle(self) -> PolyBundle:
        return PolyBundle([self.f], self.n)

    @cached_property
    def _grad_bundle(self) -> PolyBundle:
        return PolyBundle([self.f, *self._grad_f], self.n)

    def f_gradient(self, x) -> tuple[float, np.ndarray]:
        vals = self._grad_bundle(np.asarray(x, dtype=float))
        return vals[0], vals[1:]

    def f_derivatives(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        n = self.n
        vals = self._bundle(np.asarray(x, dtype=float))
        return vals[0], vals[1:n + 1], vals[n + 1:].reshape(n, n)

    def f_value(self, x) -> float:
        return float(self._value_bundle(np.asarray(x, dtype=float))[0])

    def __getstate__(self):
        state = dict(self.__dict__)
        for key in ("_bundle", "_value_bundle", "_grad_bundle"):
            state.pop(key, None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


# -- ambient calculus -------------------------------------------------------


def eval_r(rf: RoutingFunction, x) -> float:
    x = np.asarray(x, dtype=float)
    fx = rf.f_value(x)
    if rf.exponent == 0:
        return fx
    u = x - rf.c
    return fx / (u @ u + 1.0) ** rf.exponent


def _r_derivatives(rf: RoutingFunction, x, order: int = 2):
    x = np.asarray(x, dtype=float)
    if order < 2:
        f, gf = rf.f_gradient(x)
        Hf = None
    else:
        f, gf, Hf = rf.f_derivatives(x)
    l = rf.exponent
    if l == 0:
        return f, gf, Hf
    u = x - rf.c
    D = u @ u + 1.0
    Dl = D ** (-l)
    r = f * Dl
    grad = gf * Dl - 2 * l * f * Dl / D * u
    if order < 2:
        return r, grad, None
    outer = np.outer(gf, u)
    H = (
        Hf * Dl
        - 2 * l * Dl / D * (outer + outer.T)
        - 2 * l * f * Dl / D * np.eye(len(x))
        + 4 * l * (l + 1) * f * Dl / D**2 * np.outer(u, u)
    )
    return r, grad, H


def ambient_grad_r(rf: RoutingFunction, x) -> np.ndarray:
    return _r_derivatives(rf, x, order=1)[1]


def ambient_hess_r(rf: RoutingFunction, x) -> np.ndarray:
    return _r_derivatives(rf, x)[2]


# -- intrinsic calculus -----------------------------------------------------


def intrinsic_gradient(rf: RoutingFunction, spec: VarietySpec, frame: TangentFrame) -> np.ndarray:
    return ambient_grad_r(rf, frame.base) @ frame.V


def intrinsic_hessian(rf: RoutingFunction, spec: VarietySpec, curvature: CurvatureData) -> np.ndarray:
    fr = curvature.frame
    _, grad, H = _r_derivatives(rf, fr.base)
    out = np.einsum("i,iab->ab", grad, curvature.W) + fr.V.T @ H @ fr.V
    return 0.5 * (out + out.T)


# -- critical point system ----------------------------------------------------


def critical_system(rf: RoutingFunction, spec: VarietySpec) -> PolySystem:
    """Square Lagrange system in ``(x, mu)`` whose solutions off ``V(f)`` are the routing points.

    ``D_c grad f - 2 l f (x - c) + Jg^T mu = 0`` (``n`` equations; the
    multipliers absorb ``D_c^(l+1)``) together with ``g = 0``.
    """
    n, k = spec.n, spec.k
    if rf.n != n:
        raise RoutingError(f"routing function has {rf.n} variables, variety has {n}")
    if k != n - spec.d:
        raise RoutingError("critical system requires k = n - d")
    N = n + k
    f = rf.f.lift(N)
    D = rf.D.lift(N)
    l = rf.exponent
    mus = [Polynomial.variable(N, n + j) for j in range(k)]
    eqs = []
    for i in range(n):
        dfi = f.differentiate(i)
        if l == 0:
            eq = dfi
        else:
            xi = Polynomial.variable(N, i)
            eq = D * dfi - 2 * l * f * (xi - rf.center[i])
        for j in range(k):
            eq = eq + mus[j] * spec.Jg[j][i].lift(N)
        eqs.append(eq)
    eqs += [gj.lift(N) for gj in spec.g]
    return PolySystem(N, tuple(eqs))


def least_squares_multipliers(rf: RoutingFunction, spec: VarietySpec, x) -> np.ndarray:
    """Multipliers that best satisfy the first block of :func:`critical_system` at ``x``."""
    x = np.asarray(x, dtype=float)
    _, gf, _ = rf.f_derivatives(x)
    f = rf.f_value(x)
    l = rf.exponent
    if l == 0:
        lhs = gf
    else:
        u = x - rf.c
        lhs = (u @ u + 1.0) * gf - 2 * l * f * u
    J = spec.jacobian_at(x)
    mu, *_ = np.linalg.lstsq(J.T, -lhs, rcond=None)
    return mu


# -- classification -----------------------------------------------------------


@dataclass
class RoutingPoint:
    z: np.ndarray
    r_value: float
    index: int
    eigenvalues: np.ndarray
    unstable_dirs: np.ndarray  # (m, n) unit ambient tangent vectors
    unstable_eigenvalues: np.ndarray
    nondegenerate: bool
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grad_norm: float = 0.0

    @property
    def sign(self) -> int:
        return 1 if self.r_value > 0 else -1

    def hessian_scale(self) -> float:
        return float(np.max(np.abs(self.eigenvalues), initial=0.0))

    def to_dict(self) -> dict:
        return {
            "z": [float(v) for v in self.z],
            "r_value": float(self.r_value),
            "index": int(self.index),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "unstable_dirs": [[float(v) for v in d] for d in self.unstable_dirs],
            "unstable_eigenvalues": [float(v) for v in self.unstable_eigenvalues],
            "nondegenerate": bool(self.nondegenerate),
            "multipliers": [float(v) for v in self.multipliers],
            "grad_norm": float(self.grad_norm),
        }

    @classmethod
    def from_dict(cls, data: dict) -> RoutingPoint:
        n = len(data["z"])
        return cls(
            z=np.array(data["z"], dtype=float),
            r_value=float(data["r_value"]),
            index=int(data["index"]),
            eigenvalues=np.array(data["eigenvalues"], dtype=float),
            unstable_dirs=np.array(data["unstable_dirs"], dtype=float).reshape(-1, n),
            unstable_eigenvalues=np.array(data.get("unstable_eigenvalues", []), dtype=float),
            nondegenerate=bool(data["nondegenerate"]),
            multipliers=np.array(data.get("multipliers", []), dtype=float),
            grad_norm=float(data.get("grad_norm", 0.0)),
        )


def eigen_threshold(H: np.ndarray, r_value: float, z, tol: Tolerances) -> float:
    scale = max(float(np.linalg.norm(H, 2)) if H.size else 0.0,
                abs(r_value) / (1.0 + float(np.dot(z, z))))
    return tol.eig * scale


def classify(
    rf: RoutingFunction,
    spec: VarietySpec,
    z,
    tol: Tolerances = Tolerances(),
    multipliers=None,
    check_gradient: bool = True,
) -> RoutingPoint:
    """Intrinsic Hessian spectrum, index and unstable directions of a critical point."""
    z = np.asarray(z, dtype=float)
    fz = rf.f_value(z)
    if abs(fz) <= tol.f_threshold(rf.f, z):
        raise RoutingError(f"point {z.tolist()} lies on V(f), outside the routing domain")
    frame = tangent_frame(spec, z, tol.rank)
    curv = curvature_matrices(spec, frame)
    r, grad, _ = _r_derivatives(rf, z, order=1)
    igrad = grad @ frame.V
    gnorm = float(np.linalg.norm(igrad))
    if check_gradient and gnorm > tol.grad * (1.0 + np.linalg.norm(grad)):
        raise RoutingError(f"intrinsic gradient {gnorm:.3e} at {z.tolist()} is not zero")
    H = intrinsic_hessian(rf, spec, curv)
    lam, Q = np.linalg.eigh(H)
    sign = 1.0 if r > 0 else -1.0
    unstable = lam * sign > 0
    dirs = (frame.V @ Q[:, unstable]).T
    if dirs.size:
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    threshold = eigen_threshold(H, r, z, tol)
    nondeg = bool(lam.size == 0 or np.min(np.abs(lam)) > threshold)
    if multipliers is None:
        multipliers = least_squares_multipliers(rf, spec, z)
    return RoutingPoint(
        z=z,
        r_value=float(r),
        index=int(np.sum(unstable)),
        eigenvalues=lam,
        unstable_dirs=dirs.reshape(-1, spec.n),
        unstable_eigenvalues=lam[unstable],
        nondegenerate=nondeg,
        multipliers=np.asarray(multipliers, dtype=float),
        grad_norm=gnorm,
    )


# -- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    valid: bool
    conditions: dict[str, str]  # condition -> "pass" | "fail" | "construction" | "asserted" | ...
    messages: list[str]
    degenerate: list[int] = field(default_factory=list)
    level_collisions: list[tuple[int, int]] = field(default_factory=list)

    @property
    def recommendation(self) -> str:
        if self.valid:
            return ""
        return "re-randomize the center c and rerun"

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "conditions": dict(self.conditions),
            "messages": list(self.messages),
            "degenerate": list(self.degenerate),
            "level_collisions": [list(p) for p in self.level_collisions],
            "recommendation": self.recommendation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ValidationReport:
        return cls(
            valid=bool(data["valid"]),
            conditions=dict(data["conditions"]),
            messages=list(data["messages"]),
            degenerate=list(data.get("degenerate", [])),
            level_collisions=[tuple(p) for p in data.get("level_collisions", [])],
        )


CONDITION_NAMES = {
    "1_smooth_domain": "X_r contained in the smooth locus",
    "2_vanishes_at_infinity": "r vanishes at infinity",
    "3_finite_nondegenerate": "finitely many routing points, all nondegenerate",
    "4_distinct_levels": "at most one routing point per level value",
    "5_bounded": "r and its intrinsic derivatives bounded",
}


def validate_routing_function(
    rf: RoutingFunction,
    spec: VarietySpec,
    points: Sequence[RoutingPoint],
    tol: Tolerances = Tolerances(),
    positive_dimensional: bool = False,
) -> ValidationReport:
    """Check the routing-function conditions that can be checked from a finished solve."""
    conditions: dict[str, str] = {}
    messages: list[str] = []

    conditions["1_smooth_domain"] = "checked at routing points"

    if rf.exponent > 0:
        if 2 * rf.exponent > rf.f.degree():
            conditions["2_vanishes_at_infinity"] = "construction"
            conditions["5_bounded"] = "construction"
        else:
            conditions["2_vanishes_at_infinity"] = "fail"
            conditions["5_bounded"] = "fail"
            messages.append(f"2*exponent = {2 * rf.exponent} must exceed deg f = {rf.f.degree()}")
    else:
        conditions["2_vanishes_at_infinity"] = "asserted (compact variety)"
        conditions["5_bounded"] = "asserted (compact variety)"

    degenerate = [i for i, p in enumerate(points) if not p.nondegenerate]
    if degenerate or positive_dimensional:
        conditions["3_finite_nondegenerate"] = "fail"
        if positive_dimensional:
            messages.append("the critical set has positive-dimensional real parts: every point there is critical")
        if degenerate:
            locs = ", ".join(str(np.round(points[i].z, 6).tolist()) for i in degenerate)
            messages.append(f"degenerate routing points at {locs}")
    else:
        conditions["3_finite_nondegenerate"] = "pass"

    collisions = []
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            a, b = points[i].r_value, points[j].r_value
            if abs(a - b) <= tol.level * max(abs(a), abs(b)):
                collisions.append((i, j))
    if collisions:
        conditions["4_distinct_levels"] = "fail"
        pairs = ", ".join(f"({i}, {j})" for i, j in collisions)
        messages.append(f"routing points share a level value: {pairs}")
    else:
        conditions["4_distinct_levels"] = "pass"

    valid = all(not v.startswith("fail") for v in conditions.values())
    if not valid:
        messages.append("degenerate configuration; re-randomize c")
    return ValidationReport(valid, conditions, messages, degenerate, collisions)


def with_center(rf: RoutingFunction, center: Sequence) -> RoutingFunction:
    return replace(rf, center=tuple(Fraction(c) for c in center))
