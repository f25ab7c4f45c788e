"""Damped Newton from many real starting points (no completeness guarantee)."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import qmc

from ..polynomial import PolySystem
from .common import PackedSystem, SolutionSet, SolveConfig, canonical_order, dedupe, fill_trailing


def damped_newton(packed: PackedSystem, x0: np.ndarray, max_iter: int = 50, tol: float = 1e-10):
    """Newton with backtracking on ``|F|``; least-squares steps tolerate singular Jacobians."""
    x = np.asarray(x0, dtype=float).copy()
    F, J = packed.residual_and_jacobian(x)
    F, J = F.real, J.real
    fn = np.linalg.norm(F)
    for _ in range(max_iter):
        if fn <= tol * (1.0 + np.linalg.norm(x)):
            return x, True
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        alpha = 1.0
        while alpha > 1e-4:
            trial = x + alpha * step
            Ft, Jt = packed.residual_and_jacobian(trial)
            ft = np.linalg.norm(Ft.real)
            if np.isfinite(ft) and ft <= (1.0 - 1e-4 * alpha) * fn:
                break
            alpha *= 0.5
        else:
            return x, False
        x, F, J, fn = trial, Ft.real, Jt.real, ft
    return x, bool(fn <= tol * (1.0 + np.linalg.norm(x)))


def sample_starts(n_starts: int, dims: int, box: tuple[float, float], seed: int) -> np.ndarray:
    if n_starts <= 0:
        return np.zeros((0, dims))
    lo, hi = box
    rng = np.random.default_rng(seed)
    n_random = (n_starts + 1) // 2
    uniform = rng.uniform(lo, hi, size=(n_random, dims))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sobol = qmc.Sobol(dims, scramble=True, seed=seed).random(n_starts - n_random)
    return np.vstack([uniform, lo + (hi - lo) * sobol])


def solve_multistart(system: PolySystem, cfg: SolveConfig = SolveConfig(),
                     key_dims: int | None = None, box_dims: int | None = None) -> SolutionSet:
    """Real solutions reachable by damped Newton from ``cfg.n_starts`` points in ``cfg.box``.

    Only the first ``box_dims`` coordinates are sampled; the rest are filled
    in by a linear least-squares solve.
    """
    packed = PackedSystem(system)
    N = packed.N
    key_dims = key_dims or N
    box_dims = box_dims or N
    found, prov = [], []
    starts = sample_starts(cfg.n_starts, box_dims, cfg.box, cfg.seed)
    for s, head in enumerate(starts):
        x0 = fill_trailing(packed, head)
        x, ok = damped_newton(packed, x0, tol=cfg.newton_tol)
        if not ok:
            continue
        xp, conv, _, _, _ = packed.newton(x, 10, 1e-14)
        xp = xp.real
        if np.all(np.isfinite(xp)) and packed.scaled_residual(xp) <= packed.scaled_residual(x):
            x = xp
        if packed.scaled_residual(x) > cfg.newton_tol:
            continue
        if packed.condition(x) >= cfg.singular_cond:
            continue
        found.append(x)
        prov.append(f"start {s}")
    order = canonical_order(found, key_dims)
    found = [found[i] for i in order]
    prov = [prov[i] for i in order]
    keep = dedupe(found, key_dims, cfg.dedupe_tol)
    points = [found[i] for i in keep]
    return SolutionSet(
        points=points,
        residuals=[packed.scaled_residual(x) for x in points],
        provenance=[prov[i] for i in keep],
        complete=True,
        heuristic=True,
        stats={"starts": int(len(starts)), "converged": len(found), "real_solutions": len(points)},
    )
