"""Local geometry of a real variety ``X = V(g)`` at its smooth points."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .polynomial import PolyBundle, Polynomial, PolySystem, jacobian, minor_sum

RANK_TOL = 1e-8


class VarietyError(ValueError):
    pass


class SingularPointError(VarietyError):
    """The Jacobian of ``g`` drops rank at the requested point."""


class ProjectionError(VarietyError):
    """Newton projection back onto the variety failed."""


@dataclass(frozen=True)
class TangentFrame:
    base: np.ndarray
    V: np.ndarray  # n x d, orthonormal columns spanning the tangent space


@dataclass(frozen=True)
class CurvatureData:
    frame: TangentFrame
    W: np.ndarray  # (n, d, d); W[i] pairs with the i-th ambient coordinate
    residual: float = 0.0


@dataclass(frozen=True, eq=False)
class VarietySpec:
    """System ``g`` (``k`` polynomials in ``n`` variables) cutting out a ``d``-dimensional variety.

    Only complete intersections are accepted: ``k`` must equal ``n - d``.
    """

    g: PolySystem
    d: int
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n, k = self.g.nvars, len(self.g)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{i + 1}" for i in range(n)))
        if not 0 <= self.d < n:
            raise VarietyError(f"variety dimension must be in [0, {n - 1}], got {self.d}")
        if k != n - self.d:
            raise VarietyError(
                f"expected exactly n - d = {n - self.d} defining polynomials, got {k}; "
                "the Jacobian of g must have full rank n - d on the smooth locus, so "
                "reformulate g as a complete intersection"
            )

    @property
    def n(self) -> int:
        return self.g.nvars

    @property
    def k(self) -> int:
        return len(self.g)

    @cached_property
    def Jg(self) -> list[list[Polynomial]]:
        return jacobian(self.g)

    @cached_property
    def S(self) -> Polynomial:
        """Sum of squares of the maximal minors of the Jacobian (vanishes on the singular locus)."""
        return minor_sum(self.Jg, self.k)

    @cached_property
    def _bundle(self) -> PolyBundle:
        n, k = self.n, self.k
        polys = list(self.g)
        polys += [self.Jg[j][i] for j in range(k) for i in range(n)]
        polys += [self.Jg[j][a].differentiate(b) for j in range(k) for a in range(n) for b in range(n)]
        return PolyBundle(polys, n)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array(self.g.degrees())

    def evaluate_all(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``g(x)``, ``Jg(x)`` (k x n) and the Hessians of ``g`` (k x n x n)."""
        n, k = self.n, self.k
        vals = self._bundle(np.asarray(x, dtype=float))
        return vals[:k], vals[k:k + k * n].reshape(k, n), vals[k + k * n:].reshape(k, n, n)

    @cached_property
    def _first_order(self) -> PolyBundle:
        return PolyBundle(list(self.g) + [p for row in self.Jg for p in row], self.n)

    def g_and_jacobian(self, x) -> tuple[np.ndarray, np.ndarray]:
        vals = self._first_order(np.asarray(x, dtype=float))
        return vals[: self.k], vals[self.k:].reshape(self.k, self.n)

    def g_values(self, x) -> np.ndarray:
        return self.g_and_jacobian(x)[0]

    def jacobian_at(self, x) -> np.ndarray:
        return self.g_and_jacobian(x)[1]

    def __getstate__(self):
        state = dict(self.__dict__)
        state.pop("_bundle", None)
        state.pop("_first_order", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


def on_variety(spec: VarietySpec, x, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise ValueError(f"expected {spec.n} coordinates, got shape {x.shape}")
    vals = np.abs(spec.g_values(x))
    scale = 1.0 + np.linalg.norm(x) ** spec.degrees
    return bool(np.all(vals <= tol * scale))


def _jacobian_rank(J: np.ndarray, tol: float) -> tuple[int, np.ndarray, np.ndarray]:
    _, s, Vt = np.linalg.svd(J, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return 0, s, Vt
    return int(np.sum(s > tol * s[0])), s, Vt


def is_smooth_point(spec: VarietySpec, x, tol: float = RANK_TOL, on_tol: float = 1e-9) -> bool:
    if not on_variety(spec, x, on_tol):
        raise VarietyError(f"point {np.asarray(x).tolist()} is not on the variety")
    rank, _, _ = _jacobian_rank(spec.jacobian_at(x), tol)
    return rank == spec.k


def tangent_frame(spec: VarietySpec, x, tol: float = RANK_TOL) -> TangentFrame:
    """Orthonormal basis of the null space of ``Jg(x)`` from the SVD.

    The basis is unique only up to a ``d x d`` orthogonal change of frame.
    """
    x = np.asarray(x, dtype=float)
    rank, s, Vt = _jacobian_rank(spec.jacobian_at(x), tol)
    if rank != spec.k:
        raise SingularPointError(
            f"Jacobian rank {rank} != {spec.k} at {x.tolist()} (singular values {s.tolist()})"
        )
    V = Vt[spec.k:].T.copy()
    if V.shape[1] != spec.d:
        raise VarietyError(f"null space has dimension {V.shape[1]}, expected {spec.d}")
    return TangentFrame(base=x, V=V)


def curvature_matrices(spec: VarietySpec, frame: TangentFrame) -> CurvatureData:
    """Solve for the symmetric matrices ``W^1..W^n`` describing local curvature.

    They satisfy ``sum_i dg_j/dx_i W^i + V^T Hg_j V = 0`` for every ``j`` and
    ``sum_i V_ij W^i = 0`` for every tangent direction ``j``.  Each upper
    triangle entry ``(a, b)`` gives an independent ``n x n`` system with
    matrix ``[Jg; V^T]``.
    """
    n, d, k = spec.n, spec.d, spec.k
    _, J, Hg = spec.evaluate_all(frame.base)
    V = frame.V
    A = np.vstack([J, V.T])
    VHV = np.einsum("ia,jib,bc->jac", V, Hg, V) if d else np.zeros((k, 0, 0))
    iu, ju = np.triu_indices(d)
    rhs = np.zeros((n, len(iu)))
    rhs[:k] = -VHV[:, iu, ju]
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularPointError("curvature system is singular; frame and Jacobian disagree") from exc
    W = np.zeros((n, d, d))
    W[:, iu, ju] = sol
    W[:, ju, iu] = sol
    res = np.abs(A @ sol - rhs).max(initial=0.0)
    scale = 1.0 + np.abs(rhs).max(initial=0.0)
    if res > 1e-8 * scale:
        raise SingularPointError(f"curvature system residual {res:.3e} too large")
    return CurvatureData(frame=frame, W=W, residual=float(res))


def second_order_point(curv: CurvatureData, p) -> np.ndarray:
    """Quadratic approximation ``x + V p + 1/2 [p^T W^i p]_i`` of the local parameterization."""
    p = np.asarray(p, dtype=float)
    fr = curv.frame
    return fr.base + fr.V @ p + 0.5 * np.einsum("a,iab,b->i", p, curv.W, p)


def project_to_variety(
    spec: VarietySpec,
    frame: TangentFrame,
    p,
    max_iter: int = 20,
    tol: float = 1e-12,
) -> np.ndarray:
    """Point ``y`` on the variety with ``V^T (y - base) = p`` (inverse tangential projection).

    Newton's method on the square system ``[g(y); V^T (y - base) - p]``
    started from ``base + V p``.
    """
    p = np.asarray(p, dtype=float)
    V, base = frame.V, frame.base
    y = base + V @ p
    scale = 1.0 + np.linalg.norm(base)
    for _ in range(max_iter):
        vals, J = spec.g_and_jacobian(y)
        F = np.concatenate([vals, V.T @ (y - base) - p])
        A = np.vstack([J, V.T])
        try:
            step = np.linalg.solve(A, -F)
        except np.linalg.LinAlgError as exc:
            raise ProjectionError("projection Jacobian is singular") from exc
        if not np.all(np.isfinite(step)):
            raise ProjectionError("projection diverged")
        y = y + step
        if np.linalg.norm(step) <= tol * scale:
            vals = spec.g_values(y)
            deg_scale = 1.0 + np.linalg.norm(y) ** spec.degrees
            if np.all(np.abs(vals) <= 1e3 * tol * deg_scale):
                return y
    raise ProjectionError(f"no convergence in {max_iter} iterations for |p| = {np.linalg.norm(p):.3e}")
