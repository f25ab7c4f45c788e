import itertools
import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from smoothconn.polynomial import PolySystem, parse, polys_from_strings
from smoothconn.solver import (
    ImportFormatError,
    PathBudgetExceeded,
    SolveConfig,
    SolverError,
    import_solutions,
    solve,
    solve_homotopy,
    solve_multistart,
)
from smoothconn.solver.common import PackedSystem, dedupe

XY = ["x", "y"]


def sorted_points(sol):
    return np.array(sorted(tuple(np.round(p, 9)) for p in sol.points))


def test_homotopy_finds_all_real_roots():
    system = polys_from_strings(["x^2 - 1", "y^2 - 4"], XY)
    sol = solve_homotopy(system, SolveConfig())
    assert np.allclose(sorted_points(sol), [[-1, -2], [-1, 2], [1, -2], [1, 2]], atol=1e-12)
    assert sol.complete and not sol.heuristic
    assert sol.stats["paths"] == 4 and sol.stats["real_solutions"] == 4


def test_homotopy_discards_complex_and_infinite_solutions():
    # x^2 + 1 has no real roots; x*y = 1 with x = 2 y has two, the third Bezout path diverges
    assert len(solve_homotopy(polys_from_strings(["x^2 + 1", "y - 1"], XY), SolveConfig())) == 0
    sol = solve_homotopy(polys_from_strings(["x*y - 2", "x - 2*y + 0*x^2"], XY), SolveConfig())
    assert np.allclose(sorted_points(sol), [[-2, -1], [2, 1]])


def test_homotopy_circle_line_intersection():
    sol = solve_homotopy(polys_from_strings(["x^2 + y^2 - 1", "x - y"], XY), SolveConfig())
    a = 1 / np.sqrt(2)
    assert np.allclose(sorted_points(sol), [[-a, -a], [a, a]], atol=1e-12)


def test_homotopy_reports_singular_endpoint():
    sol = solve_homotopy(polys_from_strings(["x^2", "y - 1"], XY), SolveConfig())
    assert len(sol.points) == 0
    assert len(sol.singular_points) == 1
    assert np.allclose(sol.singular_points[0], [0, 1], atol=1e-6)


def test_path_budget():
    system = polys_from_strings(["x^3 - 1", "y^3 - 1"], XY)
    with pytest.raises(PathBudgetExceeded, match="9 paths"):
        solve_homotopy(system, SolveConfig(path_budget=8))


def test_non_square_system_rejected():
    with pytest.raises(SolverError, match="not square"):
        PackedSystem(PolySystem(2, (parse("x", XY),)))


def test_homotopy_deterministic_for_seed():
    system = polys_from_strings(["x^3 - 3*x*y + 1", "y^2 - x - 1"], XY)
    a = solve_homotopy(system, SolveConfig(seed=7))
    b = solve_homotopy(system, SolveConfig(seed=7))
    assert [p.tolist() for p in a.points] == [p.tolist() for p in b.points]
    assert a.stats == b.stats


def test_multistart_is_heuristic_and_finds_roots():
    system = polys_from_strings(["x^2 - 1", "y^2 - 4"], XY)
    sol = solve_multistart(system, SolveConfig(backend="multistart", n_starts=200))
    assert sol.heuristic
    assert np.allclose(sorted_points(sol), [[-1, -2], [-1, 2], [1, -2], [1, 2]], atol=1e-10)


def test_dispatch_and_config_validation():
    system = polys_from_strings(["x - 1", "y + 1"], XY)
    assert np.allclose(solve(system, SolveConfig(backend="multistart", n_starts=20)).points[0], [1, -1])
    with pytest.raises(ValueError, match="unknown backend"):
        SolveConfig(backend="magic")
    with pytest.raises(SolverError, match="solutions file"):
        solve(system, SolveConfig(backend="import"))


def test_worker_env(monkeypatch):
    monkeypatch.setenv("SMOOTHCONN_WORKERS", "3")
    assert SolveConfig().worker_count() == 3
    assert SolveConfig(workers=2).worker_count() == 2
    monkeypatch.setenv("SMOOTHCONN_WORKERS", "many")
    assert SolveConfig().worker_count() == 1


def test_import_json_and_text(tmp_path):
    system = polys_from_strings(["x^2 - 1", "y^2 - 4"], XY)
    path = tmp_path / "sols.json"
    path.write_text(json.dumps({"solutions": [[1.0000001, 2], [-1, 2.0000002], [1, 2]]}))
    sol = import_solutions(path, system, SolveConfig(backend="import"))
    assert np.allclose(sorted_points(sol), [[-1, 2], [1, 2]])
    assert sol.complete

    text = tmp_path / "sols.txt"
    text.write_text("# x y\n1 -2\n-1, -2  # comment\n3 3\n1 2 3\n")
    sol = import_solutions(text, system, SolveConfig(backend="import"))
    assert len(sol.points) == 2
    assert not sol.complete
    assert any("length 3" in r for r in sol.rejected)
    assert any("moved" in r or "residual" in r or "diverged" in r for r in sol.rejected)


def test_import_fills_multipliers(tmp_path):
    # x-only vectors for a system with a trailing multiplier block
    names = ["x", "y", "m"]
    system = polys_from_strings(["2*x + 2*m*x", "2*y - 2*m*y + 0*y", "x^2 + y^2 - 1 + 0*m"], names)
    path = tmp_path / "s.txt"
    path.write_text("1 0\n0 1\n")
    sol = import_solutions(path, system, SolveConfig(backend="import"), key_dims=2)
    assert np.allclose(sorted_points(sol), [[0, 1, 1], [1, 0, -1]], atol=1e-10)


@pytest.mark.parametrize("content", ["{bad json", '{"other": []}', '[["a"]]', "1 x\n"])
def test_import_format_errors(tmp_path, content):
    path = tmp_path / "bad.txt"
    path.write_text(content)
    with pytest.raises(ImportFormatError):
        import_solutions(path, polys_from_strings(["x", "y"], XY))


def test_dedupe_on_key_dims():
    pts = [np.array([0.0, 0.0, 1.0]), np.array([1e-9, 0.0, 5.0]), np.array([1.0, 0.0, 0.0])]
    assert dedupe(pts, 2, 1e-6) == [0, 2]


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.lists(st.integers(-3, 3), min_size=6, max_size=6), st.integers(0, 10_000))
def test_random_products_of_lines_agree_with_multistart(cs, seed):
    # (x - a)(x - b) = 0 and (y - c x - d) = 0: roots are known exactly
    a, b, c, d = cs[0], cs[1], cs[2], cs[3]
    system = polys_from_strings([f"(x - ({a}))*(x - ({b}))", f"y - ({c})*x - ({d}) + {cs[4]}*0*x^2"], XY)
    exact = sorted({(float(r), float(c * r + d)) for r in (a, b)})
    homotopy = solve_homotopy(system, SolveConfig(seed=seed))
    if a == b:
        assert len(homotopy.points) == 0 and len(homotopy.singular_points) == 1
        return
    assert np.allclose(sorted_points(homotopy), exact, atol=1e-9)
    multi = solve_multistart(system, SolveConfig(backend="multistart", seed=seed, n_starts=100, box=(-8, 8)))
    assert np.allclose(sorted_points(multi), exact, atol=1e-9)
