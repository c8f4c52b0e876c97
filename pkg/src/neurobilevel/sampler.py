"""Labelled tender samples: lower-level labelling, enhanced sampling, baselines."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .formulation import follower_model, relaxation_block, upper_objective
from .instance import BilevelInstance, binary_points, bits_key
from .milp import MipParams, Status, quadratic_objective_terms, solve_mip

log = logging.getLogger(__name__)

ENUMERATION_GUARD = 22
STALL_FACTOR = 50
SAMPLING_MIP = MipParams(gap=0.05, node_limit=5000)


class LowerLevelInfeasible(Exception):
    """The follower has no feasible response to the given tender."""


class BilevelInfeasible(Exception):
    """No tender admits a feasible follower response."""


class GuardExceeded(ValueError):
    """An enumeration was requested beyond its size guard."""


def lower_level_value(inst: BilevelInstance, x) -> tuple[float, np.ndarray]:
    """Optimal follower value ``phi(x)`` and one maximiser ``y*``."""
    model, y = follower_model(inst, x)
    model.set_objective({y[j]: float(inst.d2[j]) for j in range(inst.m)}, direction="max")
    sol = solve_mip(model, gap=0.0)
    if sol.status is Status.INFEASIBLE:
        raise LowerLevelInfeasible(f"follower infeasible at x={bits_key(x)}")
    if sol.status is not Status.OPTIMAL:
        raise RuntimeError(f"follower solve ended with {sol.status.value}")
    y_star = sol.x[y].copy()
    if inst.integer_lower:
        y_star = np.round(y_star) + 0.0
    return float(inst.d2 @ y_star), y_star


def tender_feasible(inst: BilevelInstance, x) -> bool:
    if not inst.upper_feasible(x):
        return False
    try:
        lower_level_value(inst, x)
    except LowerLevelInfeasible:
        return False
    return True


LINEAR_TERMS = ("centred", "uniform")


def random_psd(n: int, rng: np.random.Generator, linear: str = "centred") -> tuple[np.ndarray, np.ndarray]:
    """Random Gram matrix ``Q = A'A`` (entries of A uniform on [-1, 1]) and a linear term.

    ``linear="centred"`` sets ``h = -2 Q u`` with ``u`` uniform on the unit box,
    so ``x'Qx + h'x`` is, up to a constant, the Q-distance from ``x`` to a random
    point; ``linear="uniform"`` draws ``h`` uniform on [-1, 1].
    """
    A = rng.uniform(-1.0, 1.0, size=(n, n))
    Q = A.T @ A
    Q = 0.5 * (Q + Q.T)
    if linear == "centred":
        h = -2.0 * Q @ rng.uniform(0.0, 1.0, size=n)
    elif linear == "uniform":
        h = rng.uniform(-1.0, 1.0, size=n)
    else:
        raise ValueError(f"linear must be one of {LINEAR_TERMS}, got {linear!r}")
    return Q, h


@dataclass
class SampleRecord:
    x: tuple
    phi: float
    y_star: np.ndarray
    upper_value: float
    # f_ub enforced when the generating draw was solved (inf if none)
    bound_at_emission: float = math.inf


@dataclass
class SamplePool:
    records: list[SampleRecord] = field(default_factory=list)
    final_f_ub: float = math.inf
    strategy: str = ""
    seed: int | None = None
    f_ub_trajectory: list[float] = field(default_factory=list)
    draws: int = 0
    flags: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def keys(self) -> set:
        return {r.x for r in self.records}

    @property
    def X(self) -> np.ndarray:
        return np.array([r.x for r in self.records], dtype=float).reshape(len(self.records), -1)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.phi for r in self.records], dtype=float)

    def best(self) -> SampleRecord | None:
        if not self.records:
            return None
        return min(self.records, key=lambda r: r.upper_value)

    def table(self) -> dict:
        return {r.x: r.phi for r in self.records}

    def merged(self, other: "SamplePool") -> "SamplePool":
        seen = self.keys()
        out = SamplePool(list(self.records), min(self.final_f_ub, other.final_f_ub),
                         self.strategy or other.strategy, self.seed,
                         self.f_ub_trajectory + other.f_ub_trajectory,
                         self.draws + other.draws, self.flags + other.flags)
        for rec in other.records:
            if rec.x not in seen:
                out.records.append(rec)
                seen.add(rec.x)
        return out

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "final_f_ub": _num(self.final_f_ub),
            "f_ub_trajectory": [_num(v) for v in self.f_ub_trajectory],
            "draws": self.draws,
            "flags": list(self.flags),
            "records": [
                {"x": list(r.x), "phi": r.phi, "y_star": r.y_star.tolist(),
                 "upper_value": r.upper_value, "bound_at_emission": _num(r.bound_at_emission)}
                for r in self.records
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SamplePool":
        recs = [SampleRecord(tuple(int(v) for v in r["x"]), float(r["phi"]), np.array(r["y_star"], float),
                             float(r["upper_value"]), _unnum(r.get("bound_at_emission", "inf")))
                for r in doc["records"]]
        return cls(recs, _unnum(doc.get("final_f_ub", "inf")), doc.get("strategy", ""), doc.get("seed"),
                   [_unnum(v) for v in doc.get("f_ub_trajectory", [])], int(doc.get("draws", 0)),
                   list(doc.get("flags", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "SamplePool":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _num(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _unnum(v) -> float:
    return float(v)


def _label(inst: BilevelInstance, key: tuple, bound: float = math.inf) -> SampleRecord:
    phi, y_star = lower_level_value(inst, key)
    return SampleRecord(key, phi, y_star, inst.upper_objective(key, y_star), bound)


def _sampling_model(inst: BilevelInstance, Q, h, f_ub: float):
    block = relaxation_block(inst)
    model = block.model
    coeffs, _ = quadratic_objective_terms(model, Q, h, block.x, direction="min")
    model.set_objective(coeffs, direction="min")
    if math.isfinite(f_ub):
        model.add_constr(upper_objective(inst, block), "<=", f_ub, name="f_ub")
    return block


def _within_budget(params: MipParams, time_budget: float | None, t0: float, wanted: int) -> MipParams:
    # a draw may stop early; any incumbent it found is still a feasible tender
    if time_budget is None:
        return params
    left = max(time_budget - (time.perf_counter() - t0), 0.0)
    limit = left if params.time_limit is None else min(left, params.time_limit)
    return replace(params, time_limit=limit, soft_time_limit=left / max(wanted, 1))


def enhanced_sampling(inst: BilevelInstance, n_samples: int, n_updates: int, f_ub: float = math.inf,
                      rng: np.random.Generator | None = None, *, time_budget: float | None = None,
                      stall_factor: int = STALL_FACTOR, mip_params: MipParams | None = None,
                      seed: int | None = None, linear: str = "centred") -> SamplePool:
    """Sampling via random convex quadratics over the bilevel-feasible set.

    Each draw minimises ``x'Qx + h'x`` over ``x in X, y in Y(x)`` and, while
    ``f_ub`` is finite, ``c'x + d1'y <= f_ub``. New tenders are labelled with
    the follower optimum; ``f_ub`` tightens to an improving ``f(x, y*)`` at most
    ``n_updates`` times. Stops at ``n_samples`` distinct tenders, after
    ``stall_factor * n_samples`` consecutive draws without a new one, or when
    ``time_budget`` seconds are spent. ``linear`` selects how the linear term
    of the quadratic is drawn (see :func:`random_psd`).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(seed)
    params = mip_params or SAMPLING_MIP
    t0 = time.perf_counter()
    pool = SamplePool(strategy="enhanced", seed=seed, final_f_ub=f_ub, f_ub_trajectory=[f_ub])
    by_key: dict[tuple, SampleRecord] = {}
    k_ub = 0
    stall = 0
    while len(pool) < n_samples:
        if time_budget is not None and time.perf_counter() - t0 >= time_budget:
            pool.flags.append("time-budget")
            break
        if stall >= stall_factor * n_samples:
            pool.flags.append("stalled")
            break
        Q, h = random_psd(inst.n, rng, linear)
        pool.draws += 1
        bound = f_ub
        block = _sampling_model(inst, Q, h, bound)
        sol = solve_mip(block.model, _within_budget(params, time_budget, t0, n_samples - len(pool)))
        if sol.status is Status.INFEASIBLE and math.isfinite(bound):
            bound = math.inf
            block = _sampling_model(inst, Q, h, bound)
            sol = solve_mip(block.model, _within_budget(params, time_budget, t0, n_samples - len(pool)))
        if sol.status is Status.INFEASIBLE:
            raise BilevelInfeasible("no tender admits a feasible follower response")
        if not np.all(np.isfinite(sol.x)):
            stall += 1
            continue
        key = bits_key(block.x_value(sol))
        rec = by_key.get(key)
        if rec is None:
            rec = _label(inst, key, bound)
            by_key[key] = rec
            pool.records.append(rec)
            stall = 0
        else:
            stall += 1
        if k_ub < n_updates and rec.upper_value < f_ub:
            f_ub = rec.upper_value
            k_ub += 1
            pool.f_ub_trajectory.append(f_ub)
    pool.final_f_ub = f_ub
    return pool


def random_sampling(inst: BilevelInstance, n_samples: int, attempt_limit: int,
                    rng: np.random.Generator | None = None, *, time_budget: float | None = None,
                    seed: int | None = None) -> SamplePool:
    """Uniform tenders, keeping distinct bilevel-feasible ones."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    t0 = time.perf_counter()
    pool = SamplePool(strategy="random", seed=seed)
    seen: set = set()
    while len(pool) < n_samples and pool.draws < attempt_limit:
        if time_budget is not None and time.perf_counter() - t0 >= time_budget:
            pool.flags.append("time-budget")
            break
        pool.draws += 1
        key = tuple(int(v) for v in rng.integers(0, 2, size=inst.n))
        if key in seen:
            continue
        seen.add(key)
        if not inst.upper_feasible(key):
            continue
        try:
            pool.records.append(_label(inst, key))
        except LowerLevelInfeasible:
            continue
    if not pool.records:
        pool.flags.append("empty")
        log.warning("random sampling found no feasible tender in %d draws", pool.draws)
    best = pool.best()
    pool.final_f_ub = best.upper_value if best else math.inf
    return pool


def enumerate_all(inst: BilevelInstance, guard: int = ENUMERATION_GUARD) -> SamplePool:
    """Every bilevel-feasible tender with its label."""
    if inst.n > guard:
        raise GuardExceeded(f"enumeration refused for n={inst.n} > {guard}")
    pool = SamplePool(strategy="enumerate")
    for x in binary_points(inst.n):
        pool.draws += 1
        if not inst.upper_feasible(x):
            continue
        try:
            pool.records.append(_label(inst, tuple(int(v) for v in x)))
        except LowerLevelInfeasible:
            continue
    best = pool.best()
    pool.final_f_ub = best.upper_value if best else math.inf
    return pool
