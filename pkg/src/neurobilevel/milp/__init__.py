"""In-repo LP/MILP kernel: modeling layer, bounded simplex, branch-and-bound."""

from .branch_bound import MipParams, solve_lp, solve_mip
from .mccormick import linearize_binary_products, quadratic_objective_terms
from .model import MipSolution, Model, ModelingError, Sense, Status


class KernelBackend:
    """Default solver backend; other MILP engines can mimic this interface."""

    name = "kernel"

    def solve_lp(self, model: Model) -> MipSolution:
        return solve_lp(model)

    def solve_mip(self, model: Model, params: MipParams | None = None, lazy=None, start=None) -> MipSolution:
        return solve_mip(model, params, lazy=lazy, start=start)


__all__ = [
    "KernelBackend",
    "MipParams",
    "MipSolution",
    "Model",
    "ModelingError",
    "Sense",
    "Status",
    "linearize_binary_products",
    "quadratic_objective_terms",
    "solve_lp",
    "solve_mip",
]
