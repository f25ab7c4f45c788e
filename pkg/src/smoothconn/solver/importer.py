"""Read externally computed solutions and refine them against the system.

Accepted formats: JSON ``{"solutions": [[...], ...]}`` (a bare JSON list
also works) or plain text with one whitespace- or comma-separated vector
per line; ``#`` starts a comment.  A vector may hold every unknown or only
the leading ``x`` block, in which case the multipliers are recomputed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..polynomial import PolySystem
from .common import PackedSystem, SolutionSet, SolveConfig, SolverError, canonical_order, dedupe, fill_trailing


class ImportFormatError(SolverError):
    pass


def read_vectors(path) -> list[list[float]]:
    text = Path(path).read_text()
    stripped = text.strip()
    if not stripped:
        return []
    if stripped[0] in "[{":
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ImportFormatError(f"{path}: invalid JSON: {exc}") from exc
        if isinstance(data, dict):
            if "solutions" not in data:
                raise ImportFormatError(f"{path}: JSON object lacks a 'solutions' key")
            data = data["solutions"]
        if not isinstance(data, list) or not all(isinstance(v, list) for v in data):
            raise ImportFormatError(f"{path}: 'solutions' must be a list of lists")
        try:
            return [[float(c) for c in v] for v in data]
        except (TypeError, ValueError) as exc:
            raise ImportFormatError(f"{path}: non-numeric entry: {exc}") from exc
    vectors = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].replace(",", " ").strip()
        if not line:
            continue
        try:
            vectors.append([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise ImportFormatError(f"{path}:{lineno}: cannot parse {line!r}") from exc
    return vectors


def import_solutions(path, system: PolySystem, cfg: SolveConfig = SolveConfig(),
                     key_dims: int | None = None) -> SolutionSet:
    packed = PackedSystem(system)
    N = packed.N
    key_dims = key_dims or N
    accepted, prov, rejected = [], [], []
    for i, vec in enumerate(read_vectors(path)):
        v = np.array(vec, dtype=float)
        if len(v) not in (key_dims, N):
            rejected.append(f"entry {i}: length {len(v)}, expected {key_dims} or {N}")
            continue
        x0 = fill_trailing(packed, v) if len(v) < N else v
        x, conv, _, _, _ = packed.newton(x0, 30, 1e-14)
        x = x.real
        if not np.all(np.isfinite(x)):
            rejected.append(f"entry {i}: Newton refinement diverged")
            continue
        res = packed.scaled_residual(x)
        if res > cfg.newton_tol:
            rejected.append(f"entry {i}: residual {res:.3e} after refinement")
            continue
        if np.linalg.norm(x[:key_dims] - v[:key_dims]) > 1e-3 * (1.0 + np.linalg.norm(v[:key_dims])):
            rejected.append(f"entry {i}: refinement moved the point by more than 1e-3")
            continue
        accepted.append(x)
        prov.append(f"import {i}")
    order = canonical_order(accepted, key_dims)
    accepted = [accepted[i] for i in order]
    prov = [prov[i] for i in order]
    keep = dedupe(accepted, key_dims, cfg.dedupe_tol)
    points = [accepted[i] for i in keep]
    return SolutionSet(
        points=points,
        residuals=[packed.scaled_residual(x) for x in points],
        provenance=[prov[i] for i in keep],
        complete=not rejected,
        heuristic=False,
        stats={"imported": len(accepted) + len(rejected), "rejected": len(rejected),
               "real_solutions": len(points)},
        rejected=rejected,
    )
