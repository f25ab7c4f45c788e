import json

import numpy as np
import pytest
from conftest import problem_path, run_problem
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smoothconn.connectivity import (
    AnalysisConfig,
    ConnectivityReport,
    FilterError,
    QueryError,
    UnionFind,
    analyze,
    closure_matrix,
    components_from_adjacency,
    euler_characteristic,
    filter_report,
    locate,
    parse_orthant,
    query,
)
from smoothconn.problem import load_problem


def boolean_closure(A):
    M = A | np.eye(len(A), dtype=bool)
    while True:
        nxt = (M.astype(int) @ M.astype(int)) > 0
        if np.array_equal(nxt, M):
            return M
        M = nxt


@settings(max_examples=100)
@given(arrays(bool, (8, 8)))
def test_union_find_closure_matches_boolean_powers(A):
    A = A | A.T
    assert np.array_equal(closure_matrix(components_from_adjacency(A | np.eye(8, dtype=bool)), 8),
                          boolean_closure(A))


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=20))
def test_union_find_groups_partition(pairs):
    uf = UnionFind(10)
    for a, b in pairs:
        uf.union(a, b)
    groups = uf.groups()
    assert sorted(i for g in groups for i in g) == list(range(10))
    assert [g[0] for g in groups] == sorted(g[0] for g in groups)
    for a, b in pairs:
        assert uf.find(a) == uf.find(b)


def test_euler_characteristic_of_lines_and_circle():
    assert run_problem("lines")[1].euler == 4
    _, report, _ = run_problem("circle")
    assert report.euler == euler_characteristic(report.routing_points) == 0


def test_lines_queries():
    problem, report, _ = run_problem("lines")
    args = (report, problem.rf, problem.spec)
    assert query(*args, [1, 1], [2, 2], problem.config)
    assert not query(*args, [1, 1], [-1, 1], problem.config)
    assert not query(*args, [3, -3], [-0.2, -0.2], problem.config)
    with pytest.raises(QueryError, match="point on V\\(f\\): not in X_r"):
        locate(report, problem.rf, problem.spec, [0, 0], problem.config)
    with pytest.raises(QueryError, match="not on the variety"):
        locate(report, problem.rf, problem.spec, [1, 0], problem.config)


def test_report_json_round_trip_gives_identical_answers():
    problem, report, _ = run_problem("whitney")
    again = ConnectivityReport.from_dict(json.loads(json.dumps(report.to_dict())))
    assert again.components == report.components
    assert np.array_equal(again.adjacency, report.adjacency)
    rng = np.random.default_rng(4)
    for _ in range(5):
        pts = []
        for _ in range(2):
            u, v = rng.choice([-1, 1]) * rng.uniform(0.3, 2), rng.uniform(-1.5, 1.5)
            pts.append([u * v, u, v * v])
        a = query(report, problem.rf, problem.spec, *pts, problem.config)
        b = query(again, problem.rf, problem.spec, *pts, problem.config)
        assert a == b == (np.sign(pts[0][1]) == np.sign(pts[1][1]))


def test_components_bounded_by_index_zero_count():
    for name in ("lines", "circle", "whitney", "whitney_axes", "quartic"):
        _, report, _ = run_problem(name)
        assert len(report.components) <= sum(p.index == 0 for p in report.routing_points)
        for comp in report.components:
            assert any(report.routing_points[i].index == 0 for i in comp)


def test_parallel_emanations_match_serial():
    problem = load_problem(problem_path("whitney"))
    serial = analyze(problem.rf, problem.spec, AnalysisConfig(problem.config.solve, problem.config.flow,
                                                             problem.config.tol, workers=1))
    parallel = analyze(problem.rf, problem.spec, AnalysisConfig(problem.config.solve, problem.config.flow,
                                                               problem.config.tol, workers=2))
    assert serial.to_dict() == parallel.to_dict()


def test_orthant_parsing():
    assert parse_orthant("++", 2) == ("+", "+")
    assert parse_orthant("*, -, +", 3) == ("*", "-", "+")
    with pytest.raises(FilterError):
        parse_orthant("+", 2)
    with pytest.raises(FilterError):
        parse_orthant("+x", 2)


def test_filter_requires_divisibility_or_assertion():
    problem, report, _ = run_problem("lines")
    with pytest.raises(FilterError, match="no assertion"):
        filter_report(report, ("+", "+"), problem.rf)
    kept = filter_report(report, ("+", "+"), problem.rf, asserted=True)
    assert len(kept.routing_points) == 1 and kept.euler == 1 and kept.components == [[0]]


def test_filter_reindexes_edges():
    problem, report, _ = run_problem("whitney_axes")
    kept = filter_report(report, ("+", "+", "+"), problem.rf)
    assert len(kept.routing_points) == 1
    assert all(np.all(p.z > 0) for p in kept.routing_points)
    for e in kept.edges:
        assert 0 <= e.source < len(kept.routing_points) and 0 <= e.limit < len(kept.routing_points)
