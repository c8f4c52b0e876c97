"""Shared MILP building blocks for bilevel instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import BilevelInstance
from .milp import Model


@dataclass
class BilevelBlock:
    model: Model
    x: list[int]
    y: list[int]

    def x_value(self, sol) -> np.ndarray:
        return np.round(sol.x[self.x]).astype(int)

    def y_value(self, sol) -> np.ndarray:
        return np.asarray(sol.x[self.y], dtype=float)


def relaxation_block(inst: BilevelInstance, direction: str = "min") -> BilevelBlock:
    """``x in X, y in Y(x)`` with binary x; no objective set."""
    model = Model(direction, name=inst.name or "bilevel")
    x = [model.add_binary(name=f"x{i}") for i in range(inst.n)]
    y = [model.add_var(0.0, float(inst.y_upper[j]), integer=inst.integer_lower, name=f"y{j}")
         for j in range(inst.m)]
    for i in range(inst.n):
        row = {x[k]: inst.A1[i, k] for k in range(inst.n) if inst.A1[i, k] != 0.0}
        model.add_constr(row, "<=", inst.b1[i], name=f"upper{i}")
    for i in range(inst.m):
        row = {x[k]: inst.A2[i, k] for k in range(inst.n) if inst.A2[i, k] != 0.0}
        for j in range(inst.m):
            if inst.B2[i, j] != 0.0:
                row[y[j]] = inst.B2[i, j]
        model.add_constr(row, "<=", inst.b2[i], name=f"lower{i}")
    return BilevelBlock(model, x, y)


def upper_objective(inst: BilevelInstance, block: BilevelBlock) -> dict[int, float]:
    coeffs = {block.x[i]: float(inst.c[i]) for i in range(inst.n)}
    for j in range(inst.m):
        coeffs[block.y[j]] = coeffs.get(block.y[j], 0.0) + float(inst.d1[j])
    return coeffs


def lower_objective(inst: BilevelInstance, block: BilevelBlock) -> dict[int, float]:
    return {block.y[j]: float(inst.d2[j]) for j in range(inst.m)}


def follower_model(inst: BilevelInstance, x) -> tuple[Model, list[int]]:
    """``Y(x)`` for a fixed tender ``x``: rows ``B2 y <= b2 - A2 x`` and bounds on y."""
    x = np.asarray(x, dtype=float)
    model = Model("max", name="follower")
    y = [model.add_var(0.0, float(inst.y_upper[j]), integer=inst.integer_lower, name=f"y{j}")
         for j in range(inst.m)]
    rhs = inst.b2 - inst.A2 @ x
    for i in range(inst.m):
        row = {y[j]: inst.B2[i, j] for j in range(inst.m) if inst.B2[i, j] != 0.0}
        model.add_constr(row, "<=", rhs[i], name=f"lower{i}")
    return model, y
