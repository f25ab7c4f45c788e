import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from conftest import problem_path

from smoothconn.cli import main


def analyze_to(tmp_path, name, *extra):
    out = tmp_path / f"{name}.json"
    code = main(["analyze", str(problem_path(name)), "-o", str(out), *extra])
    return code, out


@pytest.fixture(scope="module")
def lines_report(tmp_path_factory):
    code, out = analyze_to(tmp_path_factory.mktemp("lines"), "lines")
    assert code == 0
    return out


@pytest.fixture(scope="module")
def whitney_report(tmp_path_factory):
    code, out = analyze_to(tmp_path_factory.mktemp("whitney"), "whitney")
    assert code == 0
    return out


def test_analyze_whitney_json(whitney_report):
    doc = json.loads(whitney_report.read_text())
    rep = doc["report"]
    assert doc["schema_version"] == 1 and doc["status"] == "ok"
    assert len(rep["routing_points"]) == 6
    assert sorted(len(c) for c in rep["components"]) == [3, 3]
    assert rep["euler"] == 2
    for p in rep["routing_points"]:
        assert {"z", "r_value", "index", "eigenvalues"} <= set(p)
    assert doc["config"]["tolerances"]["grad"] > 0
    assert doc["config"]["solver"]["seed"] == 0
    assert doc["problem"]["center"] == ["1/2", "1/3", "1/4"]
    assert "paths" in rep["solver_stats"]


def test_analyze_invalid_center_exit_2(tmp_path, capsys):
    code, out = analyze_to(tmp_path, "circle_c0")
    assert code == 2
    err = capsys.readouterr().err
    assert "every point there is critical" in err and "re-randomize c" in err
    assert json.loads(out.read_text())["status"] == "invalid"


def test_analyze_dingdong(tmp_path):
    code, out = analyze_to(tmp_path, "dingdong")
    rep = json.loads(out.read_text())["report"]
    assert code == 0
    assert rep["index_counts"] == [2, 2, 1] and rep["euler"] == 1 and rep["n_components"] == 2


def test_analyze_orthant_section(tmp_path):
    code, out = analyze_to(tmp_path, "quartic")
    doc = json.loads(out.read_text())
    assert code == 0
    assert doc["orthant_report"]["orthant"] == "++"
    assert doc["orthant_report"]["n_components"] == 2


def test_analyze_is_deterministic(tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        assert main(["analyze", str(problem_path("circle")), "-o", str(out)]) == 0
        doc = json.loads(out.read_text())
        doc.pop("timestamp")
        texts.append(json.dumps(doc, sort_keys=True))
    assert texts[0] == texts[1]


def test_incomplete_exit_3(tmp_path, capsys):
    # a flow budget this small cannot reach any limit
    src = problem_path("whitney").read_text() + "flow.max_steps = 2\n"
    path = tmp_path / "w.txt"
    path.write_text(src)
    code = main(["analyze", str(path), "-o", str(tmp_path / "w.json")])
    assert code == 3
    assert "incomplete" in capsys.readouterr().err


@pytest.mark.parametrize("p, q, expected, code", [
    ("1,1", "2,2", "connected", 0),
    ("1,1", "-1,1", "disconnected", 1),
])
def test_query_lines(lines_report, capsys, p, q, expected, code):
    assert main(["query", str(problem_path("lines")), str(lines_report), p, q]) == code
    assert capsys.readouterr().out.strip() == expected


def test_query_point_on_vf(lines_report, capsys):
    assert main(["query", str(problem_path("lines")), str(lines_report), "0,0", "1,1"]) == 2
    assert "point on V(f): not in X_r" in capsys.readouterr().err


def test_query_hash_mismatch(lines_report, tmp_path, capsys):
    other = tmp_path / "lines.txt"
    other.write_text(problem_path("lines").read_text() + "# edited\n")
    assert main(["query", str(other), str(lines_report), "1,1", "2,2"]) == 2
    assert "hash mismatch" in capsys.readouterr().err


def test_trace_whitney_from_point(whitney_report, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["trace", str(problem_path("whitney")), str(whitney_report),
                 "--x0", "-2.25,1.5,2.25", "-o", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["x1", "x2", "x3", "r"]
    last = np.array([float(v) for v in rows[-1][:3]])
    pts = json.loads(whitney_report.read_text())["report"]["routing_points"]
    dist = [np.linalg.norm(last - np.array(p["z"])) for p in pts]
    j = int(np.argmin(dist))
    assert dist[j] <= 1e-4 and pts[j]["index"] == 0
    r = [float(row[3]) for row in rows[1:]]
    assert all(b >= a for a, b in zip(r, r[1:]))


def test_trace_needs_direction(whitney_report, capsys):
    doc = json.loads(whitney_report.read_text())
    z = doc["report"]["routing_points"][0]["z"]
    assert main(["trace", str(problem_path("whitney")), str(whitney_report), "--saddle", "0"]) == 2
    assert "stationary point; supply direction" in capsys.readouterr().err
    assert main(["trace", str(problem_path("whitney")), str(whitney_report),
                 "--x0", ",".join(repr(v) for v in z)]) == 2
    assert "stationary point; supply direction" in capsys.readouterr().err


def test_trace_circle_minimum_to_maximum(tmp_path, capsys):
    code, report = analyze_to(tmp_path, "circle")
    doc = json.loads(report.read_text())
    saddle = next(i for i, p in enumerate(doc["report"]["routing_points"]) if p["index"] == 1)
    out = tmp_path / "c.csv"
    assert main(["trace", str(problem_path("circle")), str(report), "--saddle", str(saddle),
                 "--direction", "0", "-o", str(out)]) == 0
    rows = [[float(v) for v in row] for row in list(csv.reader(out.open()))[1:]]
    top = np.array([3, 2]) / math.sqrt(13)
    assert np.linalg.norm(np.array(rows[0][:2]) + top) < 2e-2
    assert np.linalg.norm(np.array(rows[-1][:2]) - top) < 1e-12


def test_validate_whitney_axes(capsys):
    assert main(["validate", str(problem_path("whitney_axes"))]) == 0
    assert capsys.readouterr().out.strip().endswith("valid")
    assert main(["validate", str(problem_path("whitney_axes_c0"))]) == 2
    captured = capsys.readouterr()
    assert "4_distinct_levels: fail" in captured.out
    assert "share a level value" in captured.err


def test_validate_rejects_small_exponent_at_parse(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text(problem_path("whitney").read_text().replace("exponent = 3", "exponent = 2"))
    assert main(["validate", str(path)]) == 2
    assert "need 2*exponent > deg f" in capsys.readouterr().err


def test_seed_and_tolerance_flags(tmp_path):
    code, out = analyze_to(tmp_path, "lines", "--seed", "3", "--tol-grad", "1e-7")
    doc = json.loads(out.read_text())
    assert code == 0
    assert doc["overrides"] == {"seed": "3", "tol.grad": "1e-07"}
    assert doc["config"]["solver"]["seed"] == 3 and doc["config"]["tolerances"]["grad"] == 1e-7


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "smoothconn", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "smoothconn" in res.stdout
