"""Regenerate the solution files shipped for the import-backend examples.

Runs the homotopy solver on the critical system of a problem file with a raised
path budget and writes the real solutions as JSON next to the problem file.

    python3 scripts/make_solutions.py src/smoothconn/problems/octic.txt --budget 20000
"""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from smoothconn.problem import load_problem
from smoothconn.routing import critical_system
from smoothconn.solver import solve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("problem")
    ap.add_argument("--budget", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--out", help="default: the problem's solutions path")
    args = ap.parse_args()

    problem = load_problem(args.problem)
    cfg = replace(problem.config.solve, backend="homotopy", path_budget=args.budget, seed=args.seed)
    system = critical_system(problem.rf, problem.spec)
    t0 = time.perf_counter()
    sol = solve(system, cfg, key_dims=problem.spec.n)
    out = args.out or cfg.solutions_path or problem.config.solve.solutions_path
    doc = {
        "problem": Path(args.problem).name,
        "problem_hash": problem.digest,
        "unknowns": list(problem.names) + [f"mu{i + 1}" for i in range(len(problem.spec.g))],
        "solver": {"backend": "homotopy", "seed": args.seed, **{k: v for k, v in sol.stats.items()
                                                                if k != "variable_scales"}},
        "solutions": [[float(v) for v in x] for x in sol.points],
    }
    Path(out).write_text(json.dumps(doc, indent=1) + "\n")
    print(f"{len(sol.points)} real solutions, complete={sol.complete}, "
          f"{time.perf_counter() - t0:.0f} s -> {out}")


if __name__ == "__main__":
    main()
