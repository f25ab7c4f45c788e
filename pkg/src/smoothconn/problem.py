"""Problem files: a flat ``key = value`` text format.

Example::

    # Whitney umbrella with its handle removed
    vars = x1, x2, x3
    g = x1^2 - x2^2*x3
    dim = 2
    f = 4*x1^2 + 4*x2^2*x3^2 + x2^4
    center = 1/2, 1/3, 1/4
    exponent = 3

Lines starting with ``#`` are comments; a line starting with whitespace
continues the previous value.  See the README for every key.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .connectivity import AnalysisConfig
from .flow import FlowConfig
from .polynomial import Polynomial, PolySystem, parse
from .routing import RoutingError, RoutingFunction, Tolerances
from .solver import SolveConfig
from .variety import VarietySpec

CENTER_DENOMINATOR = 10**10

SCALAR_KEYS = {
    "vars", "dim", "f", "center", "exponent", "compact", "orthant", "orthant_asserted",
    "solutions", "backend", "seed", "n_starts", "box", "path_budget", "name",
}
REPEATED_KEYS = {"g"}
TOL_KEYS = {f.name for f in fields(Tolerances)}
FLOW_KEYS = {f.name for f in fields(FlowConfig)}
SOLVER_KEYS = {"step_init", "step_floor", "step_max", "track_tol", "endgame_radius", "newton_tol",
               "real_tol", "dedupe_tol", "infinity_tol", "singular_cond", "max_failure_fraction",
               "max_correction", "singular_far", "endgame_failures", "max_steps",
               "multiple_cond", "multiple_cond_alone", "singular_dedupe_tol"}
INT_KEYS = {"max_steps", "grow_after", "endgame_failures"}

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_JACDET = re.compile(r"^@jacdet\(\s*([^;]*);([^)]*)\)$")


class ProblemError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.message, self.line, self.path = message, line, path
        where = f"{path or '<problem>'}" + (f":{line}" if line else "")
        super().__init__(f"{where}: {message}")

    def located(self, path: str | None) -> ProblemError:
        return ProblemError(self.message, self.line, path)


@dataclass
class Problem:
    names: tuple[str, ...]
    spec: VarietySpec
    rf: RoutingFunction
    config: AnalysisConfig
    orthant: tuple[str, ...] | None = None
    orthant_asserted: bool = False
    center_random: bool = False
    source: str = ""
    digest: str = ""
    path: str | None = None
    name: str = ""
    raw: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {
            "name": self.name,
            "vars": list(self.names),
            "g": [p.to_string(self.names) for p in self.spec.g],
            "dim": self.spec.d,
            "f": self.rf.f.to_string(self.names),
            "center": [str(c) for c in self.rf.center],
            "center_random": self.center_random,
            "exponent": self.rf.exponent,
            "compact_asserted": self.rf.compact_asserted,
            "orthant": "".join(self.orthant) if self.orthant else None,
        }


def _bool(text: str, key: str, line: int) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ProblemError(f"{key} must be true or false, got {text!r}", line)


def _split_list(text: str) -> list[str]:
    return [t for t in re.split(r"[,\s]+", text.strip()) if t]


def _fraction(text: str, key: str, line: int) -> Fraction:
    try:
        if "/" in text:
            a, b = text.split("/", 1)
            return Fraction(a.strip()) / Fraction(b.strip())
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ProblemError(f"{key}: cannot read {text!r} as a rational number", line) from exc


def read_entries(text: str, path: str | None = None) -> list[tuple[str, str, int]]:
    """``(key, value, line)`` triples with continuation lines joined."""
    entries: list[list] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if raw[0] in " \t":
            if not entries:
                raise ProblemError("continuation line before any key", lineno, path)
            entries[-1][1] += " " + stripped
            continue
        if "=" not in stripped:
            raise ProblemError(f"expected 'key = value', got {stripped!r}", lineno, path)
        key, value = stripped.split("=", 1)
        entries.append([key.strip(), value.strip(), lineno])
    return [(k, v, n) for k, v, n in entries]


def random_center(n: int, seed: int) -> tuple[Fraction, ...]:
    rng = np.random.default_rng(seed)
    return tuple(Fraction(int(k), CENTER_DENOMINATOR)
                 for k in rng.integers(0, CENTER_DENOMINATOR + 1, size=n))


def _jacobian_det(spec_text: str, g: list[Polynomial], names: tuple[str, ...], line: int) -> Polynomial:
    m = _JACDET.match(spec_text.replace(" ", ""))
    if not m:
        raise ProblemError("expected f = @jacdet(i, j, ...; var, var, ...)", line)
    rows = _split_list(m.group(1))
    cols = _split_list(m.group(2))
    if len(rows) != len(cols) or not rows:
        raise ProblemError("@jacdet needs as many equations as variables", line)
    try:
        ri = [int(r.lstrip("g")) - 1 for r in rows]
    except ValueError as exc:
        raise ProblemError(f"@jacdet rows must be equation numbers, got {rows}", line) from exc
    if any(not 0 <= r < len(g) for r in ri):
        raise ProblemError(f"@jacdet refers to a missing equation among {rows}", line)
    try:
        ci = [names.index(c) for c in cols]
    except ValueError as exc:
        raise ProblemError(f"@jacdet column is not a variable: {exc}", line) from exc
    M = [[g[r].differentiate(c) for c in ci] for r in ri]
    return _det(M)


def _det(M: list[list[Polynomial]]) -> Polynomial:
    if len(M) == 1:
        return M[0][0]
    total = None
    for j in range(len(M)):
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * _det(minor)
        total = term if total is None else (total + term if j % 2 == 0 else total - term)
    return total


def parse_problem(text: str, path: str | None = None, overrides: dict[str, str] | None = None) -> Problem:
    """Parse a problem file; ``overrides`` replace file keys (command-line flags)."""
    entries = read_entries(text, path)
    if overrides:
        entries = [e for e in entries if e[0] not in overrides]
        entries += [(k, str(v), 0) for k, v in overrides.items()]
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    values: dict[str, tuple[str, int]] = {}
    gs: list[tuple[str, int]] = []
    params: dict[str, Fraction] = {}
    tol_over: dict[str, float] = {}
    flow_over: dict[str, float] = {}
    solver_over: dict[str, float] = {}
    for key, value, line in entries:
        try:
            if key.startswith("param "):
                pname = key[6:].strip()
                if not _NAME.match(pname):
                    raise ProblemError(f"bad parameter name {pname!r}", line)
                params[pname] = _fraction(value, key, line)
            elif key in REPEATED_KEYS:
                gs.append((value, line))
            elif key in SCALAR_KEYS:
                if key in values:
                    raise ProblemError(f"key {key!r} given twice", line)
                values[key] = (value, line)
            elif key.startswith("tol."):
                name = key[4:]
                if name not in TOL_KEYS:
                    raise ProblemError(f"unknown tolerance {key!r}", line)
                tol_over[name] = float(value)
            elif key.startswith("flow."):
                name = key[5:]
                if name not in FLOW_KEYS:
                    raise ProblemError(f"unknown flow setting {key!r}", line)
                flow_over[name] = int(value) if name in INT_KEYS else float(value)
            elif key.startswith("solver."):
                name = key[7:]
                if name not in SOLVER_KEYS:
                    raise ProblemError(f"unknown solver setting {key!r}", line)
                solver_over[name] = int(value) if name in INT_KEYS else float(value)
            else:
                raise ProblemError(f"unknown key {key!r}", line)
        except ProblemError as exc:
            raise ProblemError(exc.message, exc.line or line, path) from None
        except ValueError as exc:
            raise ProblemError(f"{key}: {exc}", line, path) from None

    def need(key):
        if key not in values:
            raise ProblemError(f"missing required key {key!r}", None, path)
        return values[key]

    try:
        names_text, line = need("vars")
        names = tuple(_split_list(names_text))
        bad = [v for v in names if not _NAME.match(v)]
        if bad or not names:
            raise ProblemError(f"bad variable names {bad or names_text!r}", line)
        n = len(names)
        if not gs:
            raise ProblemError("at least one 'g = ...' line is required")
        g = []
        for expr, line in gs:
            try:
                g.append(parse(expr, names, params))
            except ValueError as exc:
                raise ProblemError(f"g: {exc}", line) from None
        dim_text, line = need("dim")
        try:
            d = int(dim_text)
        except ValueError:
            raise ProblemError(f"dim must be an integer, got {dim_text!r}", line) from None
        spec = VarietySpec(PolySystem(n, tuple(g)), d, names)

        f_text, line = need("f")
        if f_text == "@minors":
            f = spec.S
        elif f_text.startswith("@jacdet"):
            f = _jacobian_det(f_text, g, names, line)
        else:
            try:
                f = parse(f_text, names, params)
            except ValueError as exc:
                raise ProblemError(f"f: {exc}", line) from None
        if f.is_zero():
            raise ProblemError("f is the zero polynomial", line)

        seed = int(values.get("seed", ("0", 0))[0])
        center_text, line = values.get("center", ("random", 0))
        center_random = center_text.strip().lower() == "random"
        if center_random:
            center = random_center(n, seed)
        else:
            parts = _split_list(center_text)
            if len(parts) != n:
                raise ProblemError(f"center has {len(parts)} entries, expected {n}", line)
            center = tuple(_fraction(p, "center", line) for p in parts)

        compact = _bool(values["compact"][0], "compact", values["compact"][1]) if "compact" in values else False
        exp_text, line = values.get("exponent", ("auto", 0))
        if exp_text.strip().lower() == "auto":
            exponent = RoutingFunction.default_exponent(f)
        else:
            try:
                exponent = int(exp_text)
            except ValueError:
                raise ProblemError(f"exponent must be an integer or auto, got {exp_text!r}", line) from None
        try:
            rf = RoutingFunction(f, center, exponent, compact_asserted=compact)
        except RoutingError as exc:
            raise ProblemError(str(exc), line) from None

        orthant = None
        if "orthant" in values:
            from .connectivity import FilterError, parse_orthant
            try:
                orthant = parse_orthant(values["orthant"][0], n)
            except FilterError as exc:
                raise ProblemError(str(exc), values["orthant"][1]) from None
        asserted = False
        if "orthant_asserted" in values:
            asserted = _bool(values["orthant_asserted"][0], "orthant_asserted", values["orthant_asserted"][1])

        solve_kwargs = dict(seed=seed)
        if "backend" in values:
            solve_kwargs["backend"] = values["backend"][0].strip()
        if "n_starts" in values:
            solve_kwargs["n_starts"] = int(values["n_starts"][0])
        if "path_budget" in values:
            solve_kwargs["path_budget"] = int(values["path_budget"][0])
        if "box" in values:
            lo, hi = (float(t) for t in _split_list(values["box"][0]))
            solve_kwargs["box"] = (lo, hi)
        if "solutions" in values:
            sol_path = Path(values["solutions"][0].strip())
            if path and not sol_path.is_absolute():
                sol_path = Path(path).resolve().parent / sol_path
            solve_kwargs["solutions_path"] = str(sol_path)
        solve_kwargs.update(solver_over)
        try:
            solve_cfg = SolveConfig(**solve_kwargs)
            flow_cfg = FlowConfig(**flow_over)
        except (TypeError, ValueError) as exc:
            raise ProblemError(str(exc)) from None
        tol = replace(Tolerances(), **tol_over)
    except ProblemError as exc:
        raise exc.located(path) from None
    except ValueError as exc:
        raise ProblemError(str(exc), None, path) from None

    return Problem(
        names=names,
        spec=spec,
        rf=rf,
        config=AnalysisConfig(solve=solve_cfg, flow=flow_cfg, tol=tol),
        orthant=orthant,
        orthant_asserted=asserted,
        center_random=center_random,
        source=text,
        digest=digest,
        path=path,
        name=values.get("name", ("", 0))[0],
        raw={k: v for k, (v, _) in values.items()},
        overrides=dict(overrides or {}),
    )


def load_problem(path, overrides: dict[str, str] | None = None) -> Problem:
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemError(f"cannot read problem file: {exc}", None, path) from None
    return parse_problem(text, path, overrides)
