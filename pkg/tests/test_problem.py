from fractions import Fraction

import pytest
from conftest import PROBLEMS

from smoothconn.polynomial import parse
from smoothconn.problem import CENTER_DENOMINATOR, ProblemError, load_problem, parse_problem, random_center

BASE = """\
vars = x1, x2
g = x1^2 + x2^2 - 1
dim = 1
f = 4*(x1^2 + x2^2)
"""


def test_minimal_problem_defaults():
    p = parse_problem(BASE + "center = 1/2, 1/3\n")
    assert p.rf.exponent == 2  # auto: deg f // 2 + 1
    assert p.rf.center == (Fraction(1, 2), Fraction(1, 3))
    assert p.config.solve.backend == "homotopy"
    assert len(p.digest) == 64


def test_continuation_lines_and_comments():
    p = parse_problem("# a comment\nvars = x1, x2\ng = x1^2\n   + x2^2 - 1\ndim = 1\nf = x1\n  * x2\n"
                      "center = 0.25, 0.5\n")
    assert p.spec.g[0] == parse("x1^2 + x2^2 - 1", ["x1", "x2"])
    assert p.rf.f == parse("x1*x2", ["x1", "x2"])
    assert p.rf.center == (Fraction(1, 4), Fraction(1, 2))


def test_random_center_is_reproducible_and_recorded():
    a = parse_problem(BASE + "center = random\nseed = 5\n")
    b = parse_problem(BASE + "center = random\nseed = 5\n")
    c = parse_problem(BASE + "center = random\nseed = 6\n")
    assert a.rf.center == b.rf.center != c.rf.center
    assert a.center_random and a.echo()["center_random"]
    assert all(0 <= v <= 1 and (v * CENTER_DENOMINATOR).denominator == 1 for v in a.rf.center)
    assert random_center(2, 5) == a.rf.center


def test_overrides_replace_file_values():
    p = parse_problem(BASE + "center = random\nseed = 5\n", overrides={"seed": "9", "tol.grad": "1e-7"})
    assert p.config.solve.seed == 9
    assert p.config.tol.grad == 1e-7
    assert p.rf.center == random_center(2, 9)


def test_params_minors_and_jacdet():
    text = """\
param a = 0.5
vars = x, y, z
g = x^2 + y^2 + z^2 - 1
g = x - a*y
dim = 1
f = @jacdet(g1, g2; x, y)
center = 0, 0, 0
"""
    p = parse_problem(text)
    assert p.rf.f == parse("2*x*(-1/2) - 2*y", ["x", "y", "z"])
    p = parse_problem(text.replace("@jacdet(g1, g2; x, y)", "@minors"))
    assert p.rf.f == p.spec.S


def test_settings_sections():
    p = parse_problem(BASE + "center = 0, 0\nbackend = multistart\nn_starts = 50\nbox = -2, 2\n"
                      "flow.snap_radius = 1e-5\nsolver.dedupe_tol = 1e-7\npath_budget = 77\n")
    assert p.config.solve.backend == "multistart" and p.config.solve.n_starts == 50
    assert p.config.solve.box == (-2.0, 2.0) and p.config.solve.path_budget == 77
    assert p.config.flow.snap_radius == 1e-5 and p.config.solve.dedupe_tol == 1e-7


@pytest.mark.parametrize("extra, fragment", [
    ("exponent = 1\n", "2\\*exponent > deg f"),
    ("center = 1, 2, 3\n", "center has 3 entries"),
    ("colour = red\n", "unknown key"),
    ("tol.nope = 1\n", "unknown tolerance"),
    ("center = 0, 0\ncenter = 1, 1\n", "given twice"),
    ("exponent = two\n", "integer or auto"),
    ("backend = magic\n", "unknown backend"),
    ("orthant = +\n", "orthant"),
    ("compact = maybe\n", "true or false"),
])
def test_errors_are_located(extra, fragment):
    with pytest.raises(ProblemError, match=fragment):
        parse_problem(BASE + extra, path="demo.txt")


def test_syntax_errors_carry_line_numbers():
    with pytest.raises(ProblemError, match=r"demo.txt:2: g:"):
        parse_problem("vars = x1, x2\ng = x1 +\ndim = 1\nf = x1\n", path="demo.txt")
    with pytest.raises(ProblemError, match="missing required key 'dim'"):
        parse_problem("vars = x1, x2\ng = x1\nf = x1\n")
    with pytest.raises(ProblemError, match="expected 'key = value'"):
        parse_problem("vars x1\n")


def test_exponent_zero_needs_compact_assertion():
    with pytest.raises(ProblemError, match="compact"):
        parse_problem(BASE + "exponent = 0\n")
    assert parse_problem(BASE + "exponent = 0\ncompact = true\n").rf.exponent == 0


def test_every_shipped_problem_parses():
    names = sorted(p.stem for p in PROBLEMS.glob("*.txt"))
    assert len(names) == 16
    for name in names:
        p = load_problem(PROBLEMS / f"{name}.txt")
        assert p.name
        if p.config.solve.backend == "import":
            assert p.config.solve.solutions_path and (PROBLEMS / f"{name}_solutions.json").exists()
