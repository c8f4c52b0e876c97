"""Exact optimistic bilevel solutions by tender enumeration."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .formulation import follower_model
from .instance import BilevelInstance, binary_points, format_bits
from .milp import Status, solve_mip
from .sampler import BilevelInfeasible, GuardExceeded, LowerLevelInfeasible, lower_level_value

ORACLE_GUARD = 20
LEVEL_TOL = 1e-9


@dataclass
class AuditRow:
    x: tuple
    feasible: bool
    phi: float = math.nan
    best_f: float = math.nan


@dataclass
class OracleResult:
    x: np.ndarray
    y: np.ndarray
    f: float
    audit: list[AuditRow] = field(default_factory=list)

    def write_audit(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "feasible", "phi", "best_f"])
            for row in self.audit:
                w.writerow([format_bits(row.x), int(row.feasible), repr(row.phi), repr(row.best_f)])


def optimistic_response(inst: BilevelInstance, x, phi: float, start=None) -> tuple[float, np.ndarray]:
    """Leader-preferred follower optimum: ``min d1'y`` over ``y in Y(x), d2'y >= phi``."""
    model, y = follower_model(inst, x)
    model.add_constr({y[j]: float(inst.d2[j]) for j in range(inst.m)}, ">=", phi - LEVEL_TOL, name="level")
    model.set_objective({y[j]: float(inst.d1[j]) for j in range(inst.m)}, direction="min")
    sol = solve_mip(model, gap=0.0, start=start)
    if sol.status is not Status.OPTIMAL:
        raise RuntimeError(f"follower selection ended with {sol.status.value}")
    y_val = sol.x[y].copy()
    if inst.integer_lower:
        y_val = np.round(y_val) + 0.0
    return float(inst.d1 @ y_val), y_val


def brute_force_bilevel(inst: BilevelInstance, guard: int = ORACLE_GUARD) -> OracleResult:
    """Enumerate every tender; for each feasible one take the optimistic follower response."""
    if inst.n > guard:
        raise GuardExceeded(f"oracle refused for n={inst.n} > {guard}")
    best = None
    audit = []
    for x in binary_points(inst.n):
        key = tuple(int(v) for v in x)
        if not inst.upper_feasible(x):
            audit.append(AuditRow(key, False))
            continue
        try:
            phi, y_star = lower_level_value(inst, x)
        except LowerLevelInfeasible:
            audit.append(AuditRow(key, False))
            continue
        val, y = optimistic_response(inst, x, phi, start=y_star)
        f = float(inst.c @ x) + val
        audit.append(AuditRow(key, True, phi, f))
        if best is None or f < best[0]:
            best = (f, x.astype(float), y)
    if best is None:
        raise BilevelInfeasible("no feasible tender")
    return OracleResult(best[1], best[2], best[0], audit)


def objective_difference(candidate_f: float, oracle_f: float) -> float:
    """Relative gap of a candidate value against a benchmark optimum."""
    if not math.isfinite(oracle_f):
        raise ValueError("benchmark objective must be finite")
    return (candidate_f - oracle_f) / max(abs(oracle_f), 1e-9)
