"""Total-degree homotopy continuation in projective coordinates.

The target ``F`` is homogenized with a leading coordinate ``z0`` and
paired with the start system ``z_i^{d_i} - z0^{d_i}``; a random affine
patch ``a . Z = 1`` keeps paths that diverge in affine space bounded.  The
homotopy ``(1 - t) F + gamma t G`` is tracked from ``t = 1`` to ``t = 0``
and the endpoints are polished with Newton's method on ``F``.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..polynomial import PolySystem
from . import _kernels
from .common import (
    PackedSystem,
    PathBudgetExceeded,
    SolutionSet,
    SolveConfig,
    canonical_order,
    dedupe,
    trailing_scales,
)

log = logging.getLogger(__name__)


def start_points(degrees, patch: np.ndarray) -> np.ndarray:
    degrees = [int(d) for d in degrees]
    roots = [np.exp(2j * np.pi * np.arange(d) / d) for d in degrees]
    combos = np.array(list(itertools.product(*roots)), dtype=np.complex128).reshape(-1, len(degrees))
    Z = np.hstack([np.ones((len(combos), 1), dtype=np.complex128), combos])
    scale = Z @ patch
    return Z / scale[:, None]


def _track_chunk(args):
    starts, packed_arrays, gamma, patch, params = args
    exps, coefs, eq_ptr, maxdeg, degs = packed_arrays
    return _kernels.track_many(starts, exps, coefs, eq_ptr, maxdeg, degs, gamma, patch, *params)


def track_all(packed: PackedSystem, starts: np.ndarray, gamma: complex, patch: np.ndarray,
              cfg: SolveConfig):
    params = (cfg.step_init, cfg.step_floor, cfg.step_max, cfg.endgame_radius,
              cfg.track_tol, cfg.max_steps, cfg.endgame_failures, cfg.max_correction)
    arrays = (packed.exps, packed.coefs, packed.eq_ptr, packed.maxdeg, packed.degrees)
    workers = min(cfg.worker_count(), max(len(starts), 1))
    if workers <= 1 or len(starts) < 64:
        return _track_chunk((starts, arrays, gamma, patch, params))
    chunks = np.array_split(starts, workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_track_chunk, [(c, arrays, gamma, patch, params) for c in chunks]))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def solve_homotopy(system: PolySystem, cfg: SolveConfig = SolveConfig(),
                   key_dims: int | None = None) -> SolutionSet:
    """All isolated real solutions of a square system (probabilistically complete)."""
    key_dims = key_dims or system.nvars
    scales = trailing_scales(system, key_dims)
    packed = PackedSystem(system)
    tracked = PackedSystem(system, scales)
    N = packed.N
    n_paths = packed.bezout
    if n_paths > cfg.path_budget:
        raise PathBudgetExceeded(
            f"total-degree homotopy needs {n_paths} paths, budget is {cfg.path_budget}")

    rng = np.random.default_rng(cfg.seed)
    gamma = complex(np.exp(2j * np.pi * rng.random()))
    patch = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
    patch /= np.linalg.norm(patch)

    starts = start_points(tracked.degrees, patch)
    ends, ts, status, steps = track_all(tracked, starts, gamma, patch, cfg)

    stats = {
        "paths": int(n_paths),
        "bezout": int(n_paths),
        "reached_target": int(np.sum(status == _kernels.OK)),
        "endgame_stopped": int(np.sum(status == _kernels.ENDGAME)),
        "failed": int(np.sum(status >= _kernels.STEP_FAILURE)),
        "steps_total": int(steps.sum()),
        "gamma": [gamma.real, gamma.imag],
        "variable_scales": scales.tolist(),
    }

    regular: list[np.ndarray] = []
    provenance: list[str] = []
    singular: list[np.ndarray] = []
    direct_cond: list[float] = []
    at_infinity = 0
    finite_nonsingular = 0
    finite_singular = 0
    for p in range(len(ends)):
        if status[p] >= _kernels.STEP_FAILURE:
            continue
        Z = ends[p]
        if abs(Z[0]) <= cfg.infinity_tol * np.linalg.norm(Z):
            at_infinity += 1
            continue
        y = Z[1:] / Z[0]
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) > 1e8:
            at_infinity += 1
            continue
        ys, conv, _, _, _ = tracked.newton(y, 20, 1e-12)
        if not np.all(np.isfinite(ys)):
            at_infinity += 1
            continue
        x = y * scales
        xs = ys * scales
        if conv and tracked.condition(ys) < cfg.singular_cond:
            finite_nonsingular += 1
            scale = 1.0 + np.linalg.norm(xs)
            if np.max(np.abs(xs.imag)) <= cfg.real_tol * scale:
                xr, conv_r, _, _, _ = packed.newton(xs.real, 20, 1e-14)
                xr = xr.real
                if packed.scaled_residual(xr) <= cfg.newton_tol:
                    regular.append(xr)
                    provenance.append(f"path {p}")
                    direct_cond.append(tracked.condition(ys))
            continue
        finite_singular += 1
        # a singular endpoint may sit on a positive-dimensional or multiple real solution
        yg, conv_g, _, _, _ = tracked.newton(y.real, 100, 1e-13, least_squares=True)
        if conv_g:
            # slow creep toward a point of higher multiplicity also has tiny steps
            y2, _, _, _, _ = tracked.newton(yg.real, 50, 0.0, least_squares=True)
            conv_g = np.linalg.norm(y2.real - yg.real) <= 1e-9 * (1.0 + np.linalg.norm(yg.real))
        if conv_g and np.max(np.abs(yg.real)) > cfg.singular_far:
            # multipliers blowing up: the endpoint approaches infinity
            conv_g = False
        xg = yg.real * scales
        if not conv_g or not np.all(np.isfinite(xg)) or packed.scaled_residual(xg) > cfg.newton_tol:
            continue
        if tracked.condition(yg.real) < cfg.singular_cond:
            regular.append(xg)
            provenance.append(f"path {p} (singular endpoint, real refinement)")
            direct_cond.append(tracked.condition(yg.real))
        else:
            singular.append(xg)

    # several paths ending on one poorly conditioned point: a multiple root
    # (one path per root is all a generic gamma allows for a regular one).
    # Least-squares refinements are drawn to nearby regular points, so only
    # direct endpoints and unrefined singular ones count as evidence.  A
    # condition number near 1/sqrt(machine eps) needs no further evidence.
    def near(a, b, tol=cfg.dedupe_tol):
        return np.linalg.norm(a - b) <= tol * (1.0 + np.linalg.norm(a))

    direct = [not s.endswith("real refinement)") for s in provenance]
    multiple = set()
    for i in range(len(regular)):
        if direct_cond[i] <= cfg.multiple_cond or i in multiple:
            continue
        mates = [j for j in range(len(regular)) if j != i and near(regular[i], regular[j])]
        evidence = (direct_cond[i] > cfg.multiple_cond_alone
                    or sum(direct[j] for j in [i, *mates]) > 1
                    or any(near(regular[i], q, cfg.singular_dedupe_tol) for q in singular))
        if evidence:
            multiple.update([i, *mates])
    if multiple:
        singular += [regular[i] for i in sorted(multiple)]
        # refined endpoints were already counted as singular
        moved = sum(direct[i] for i in multiple)
        finite_nonsingular -= moved
        finite_singular += moved
        regular = [x for i, x in enumerate(regular) if i not in multiple]
        provenance = [s for i, s in enumerate(provenance) if i not in multiple]

    stats.update({
        "at_infinity": at_infinity,
        "finite_nonsingular": finite_nonsingular,
        "finite_singular": finite_singular,
    })

    order = canonical_order(regular, key_dims)
    # among coincident points prefer the one reached directly by a path
    order.sort(key=lambda i: (tuple(np.round(regular[i][:key_dims], 8)), "singular" in provenance[i]))
    regular = [regular[i] for i in order]
    provenance = [provenance[i] for i in order]
    keep = dedupe(regular, key_dims, cfg.dedupe_tol)
    points = [regular[i] for i in keep]
    provenance = [provenance[i] for i in keep]

    singular = [singular[i] for i in canonical_order(singular, key_dims)]
    keep_s = dedupe(singular, key_dims, cfg.singular_dedupe_tol)
    singular = [singular[i] for i in keep_s
                if all(np.linalg.norm(singular[i][:key_dims] - q[:key_dims]) > cfg.dedupe_tol
                       for q in points)]

    stats["real_solutions"] = len(points)
    stats["real_singular"] = len(singular)
    complete = stats["failed"] <= cfg.max_failure_fraction * n_paths
    if not complete:
        log.warning("%d of %d paths failed; solution set flagged incomplete", stats["failed"], n_paths)
    return SolutionSet(
        points=points,
        residuals=[packed.scaled_residual(x) for x in points],
        provenance=provenance,
        singular_points=singular,
        complete=complete,
        heuristic=False,
        stats=stats,
    )
