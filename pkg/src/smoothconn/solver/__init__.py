"""Real solutions of square polynomial systems."""

from ..polynomial import PolySystem
from .common import PathBudgetExceeded, SolutionSet, SolveConfig, SolverError
from .homotopy import solve_homotopy
from .importer import ImportFormatError, import_solutions
from .multistart import solve_multistart


def solve(system: PolySystem, cfg: SolveConfig, key_dims: int | None = None) -> SolutionSet:
    if cfg.backend == "homotopy":
        return solve_homotopy(system, cfg, key_dims)
    if cfg.backend == "multistart":
        return solve_multistart(system, cfg, key_dims, box_dims=key_dims)
    if cfg.solutions_path is None:
        raise SolverError("import backend needs a solutions file")
    return import_solutions(cfg.solutions_path, system, cfg, key_dims)


__all__ = [
    "ImportFormatError",
    "PathBudgetExceeded",
    "SolutionSet",
    "SolveConfig",
    "SolverError",
    "import_solutions",
    "solve",
    "solve_homotopy",
    "solve_multistart",
]
