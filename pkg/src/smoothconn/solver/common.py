from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ..polynomial import PolySystem
from . import _kernels


class SolverError(RuntimeError):
    pass


class PathBudgetExceeded(SolverError):
    pass


BACKENDS = ("homotopy", "multistart", "import")


@dataclass
class SolveConfig:
    backend: str = "homotopy"
    seed: int = 0
    # multistart
    n_starts: int = 500
    box: tuple[float, float] = (-3.0, 3.0)
    # homotopy tracking
    path_budget: int = 5000
    step_init: float = 0.01
    step_floor: float = 1e-7
    step_max: float = 0.1
    track_tol: float = 1e-9
    endgame_radius: float = 0.01
    endgame_failures: int = 40
    max_correction: float = 1.0
    max_steps: int = 20000
    max_failure_fraction: float = 0.2
    # endpoints
    newton_tol: float = 1e-10
    real_tol: float = 1e-6
    dedupe_tol: float = 1e-6
    singular_dedupe_tol: float = 1e-4  # singular points are only accurate to about sqrt(eps)
    infinity_tol: float = 1e-8
    singular_cond: float = 1e10
    multiple_cond: float = 1e5  # two paths meeting at a point this ill-conditioned: multiple root
    multiple_cond_alone: float = 1e7  # one path suffices at this condition number
    singular_far: float = 1e3  # scaled magnitude beyond which a singular endpoint counts as infinite
    # import
    solutions_path: str | None = None
    workers: int = 0  # 0: read SMOOTHCONN_WORKERS, default 1

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        lo, hi = self.box
        if not lo < hi:
            raise ValueError(f"empty sampling box {self.box}")
        for name in ("step_init", "step_floor", "step_max", "track_tol", "newton_tol",
                     "real_tol", "dedupe_tol", "singular_dedupe_tol", "endgame_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def worker_count(self) -> int:
        if self.workers > 0:
            return self.workers
        try:
            return max(1, int(os.environ.get("SMOOTHCONN_WORKERS", "1")))
        except ValueError:
            return 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["box"] = list(self.box)
        d.pop("workers")
        return d


@dataclass
class SolutionSet:
    """Real solutions of a square system, deduplicated on the first ``key_dims`` coordinates."""

    points: list[np.ndarray]
    residuals: list[float]
    provenance: list[str]
    singular_points: list[np.ndarray] = field(default_factory=list)
    complete: bool = True
    heuristic: bool = False
    stats: dict = field(default_factory=dict)
    rejected: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)


class PackedSystem:
    """A :class:`PolySystem` packed for the compiled kernels (homogenized, rows normalized).

    With ``scales`` the unknowns are ``y = x / scales``; every method then
    works in ``y`` coordinates.
    """

    def __init__(self, system: PolySystem, scales=None):
        N = system.nvars
        if len(system) != N:
            raise SolverError(f"system is not square: {len(system)} equations in {N} unknowns")
        self.system = system
        self.N = N
        self.scales = np.ones(N) if scales is None else np.asarray(scales, dtype=float)
        self.degrees = np.array([max(p.degree(), 0) for p in system], dtype=np.int64)
        rows, coefs, ptr = [], [], [0]
        for p, d in zip(system, self.degrees):
            terms = p.terms
            if not terms:
                raise SolverError("system contains the zero polynomial")
            vals = {e: float(c) * float(np.prod(self.scales ** np.array(e))) for e, c in terms.items()}
            scale = max(abs(v) for v in vals.values())
            for e, v in vals.items():
                rows.append((int(d) - sum(e),) + e)
                coefs.append(v / scale)
            ptr.append(len(rows))
        self.exps = np.array(rows, dtype=np.int64).reshape(-1, N + 1)
        self.coefs = np.array(coefs, dtype=np.complex128)
        self.eq_ptr = np.array(ptr, dtype=np.int64)
        self.maxdeg = int(self.exps.max(initial=1))

    @property
    def bezout(self) -> int:
        return int(np.prod([max(int(d), 1) for d in self.degrees], dtype=object))

    def residual(self, x) -> np.ndarray:
        F, _ = _kernels.affine_residual_and_jacobian(
            np.asarray(x, dtype=np.complex128), self.exps, self.coefs, self.eq_ptr, self.maxdeg)
        return F

    def residual_and_jacobian(self, x) -> tuple[np.ndarray, np.ndarray]:
        return _kernels.affine_residual_and_jacobian(
            np.asarray(x, dtype=np.complex128), self.exps, self.coefs, self.eq_ptr, self.maxdeg)

    def newton(self, x, max_iter: int = 20, tol: float = 1e-14, least_squares: bool = False):
        return _kernels.newton_affine(
            np.asarray(x, dtype=np.complex128), self.exps, self.coefs, self.eq_ptr, self.maxdeg,
            max_iter, tol, least_squares)

    def scaled_residual(self, x) -> float:
        x = np.asarray(x)
        return float(np.linalg.norm(self.residual(x)) / (1.0 + np.linalg.norm(x)))

    def condition(self, x) -> float:
        _, J = self.residual_and_jacobian(x)
        with np.errstate(all="ignore"):
            c = np.linalg.cond(J)
        return float(c) if np.isfinite(c) else np.inf


def trailing_scales(system: PolySystem, key_dims: int) -> np.ndarray:
    """Magnitude estimates for unknowns past ``key_dims`` (Lagrange multipliers).

    A multiplier balances the terms free of multipliers, so its size is
    estimated by the ratio of those coefficients to its own, per equation.
    Tracking in rescaled unknowns keeps large-multiplier solutions from
    being lost.
    """
    N = system.nvars
    scales = np.ones(N)
    for j in range(key_dims, N):
        best = 1.0
        for p in system:
            free = [abs(float(c)) for e, c in p.terms.items() if not any(e[key_dims:])]
            mine = [(abs(float(c)), e[j]) for e, c in p.terms.items() if e[j] > 0]
            if not free or not mine:
                continue
            top = max(free)
            for c, k in mine:
                best = max(best, (top / c) ** (1.0 / k))
        scales[j] = best
    return scales


def fill_trailing(packed: PackedSystem, head: np.ndarray) -> np.ndarray:
    """Complete a point known on its leading coordinates by solving for the rest.

    The trailing unknowns are found from one linearized least-squares solve,
    which is exact when the system is affine in them (Lagrange multipliers).
    """
    head = np.asarray(head, dtype=float)
    m = len(head)
    x = np.zeros(packed.N)
    x[:m] = head
    if m == packed.N:
        return x
    F, J = packed.residual_and_jacobian(x)
    tail, *_ = np.linalg.lstsq(J[:, m:].real, -F.real, rcond=None)
    x[m:] = tail
    return x


def canonical_order(points: list[np.ndarray], key_dims: int) -> list[int]:
    keys = [tuple(np.round(np.asarray(p[:key_dims], dtype=float), 8)) for p in points]
    return sorted(range(len(points)), key=lambda i: keys[i])


def dedupe(points: list[np.ndarray], key_dims: int, tol: float) -> list[int]:
    """Indices of the first occurrence of each cluster (in the given order)."""
    kept: list[int] = []
    for i, p in enumerate(points):
        if all(np.linalg.norm(p[:key_dims] - points[j][:key_dims]) > tol for j in kept):
            kept.append(i)
    return kept


def on_positive_dimensional_set(packed: PackedSystem, x: np.ndarray, key_dims: int,
                                tol: float = 1e-9) -> bool:
    """Whether the real solution ``x`` lies on a curve (or larger) of real solutions.

    A short step along the Jacobian null direction is pulled back onto the
    solution set by Gauss-Newton; on a positive-dimensional set it stays
    away from ``x``, at an isolated singular solution it falls back.
    """
    x = np.asarray(x, dtype=float)
    _, J = packed.residual_and_jacobian(x)
    _, s, Vt = np.linalg.svd(J.real)
    d = Vt[-1]
    dx = np.linalg.norm(d[:key_dims])
    if dx < 0.1:
        return False  # only the trailing unknowns move
    delta = 1e-3 * (1.0 + np.linalg.norm(x[:key_dims]))
    for sense in (1.0, -1.0):
        y0 = x + sense * delta * d / dx
        y, _, _, _, _ = packed.newton(y0, 60, 1e-13, least_squares=True)
        y = y.real
        if not np.all(np.isfinite(y)) or packed.scaled_residual(y) > tol:
            continue
        if np.linalg.norm(y[:key_dims] - x[:key_dims]) > 0.25 * delta:
            return True
    return False
