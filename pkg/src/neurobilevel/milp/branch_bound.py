"""LP and MILP solve entry points built on :mod:`.simplex`."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .model import MipSolution, Model, ModelingError, Sense, Status
from .presolve import propagate_bounds
from .simplex import FEAS_TOL, BasisSnapshot, LPEngine, LPStatus

INT_TOL = 1e-6

LazyCallback = Callable[[np.ndarray], Iterable[tuple[dict, "Sense | str", float]]]


@dataclass
class MipParams:
    gap: float = 1e-6
    abs_gap: float = 1e-9
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    # past this many seconds, stop as soon as an incumbent exists
    soft_time_limit: Optional[float] = None
    cut_limit: int = 200
    # tighten bounds from row activities before branching
    presolve: bool = True
    int_tol: float = INT_TOL
    feas_tol: float = FEAS_TOL


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    snap: Optional[BasisSnapshot] = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


_LP_STATUS = {
    LPStatus.OPTIMAL: Status.OPTIMAL,
    LPStatus.INFEASIBLE: Status.INFEASIBLE,
    LPStatus.UNBOUNDED: Status.UNBOUNDED,
    LPStatus.ITERATION_LIMIT: Status.ITERATION_LIMIT,
}


def _engine(model: Model, feas_tol: float):
    A, lo, hi, c, lb, ub, mask = model.dense()
    return LPEngine(A, lo, hi, c, lb, ub, feas_tol=feas_tol), c, mask


def _report(model: Model, c_min: float) -> float:
    value = c_min + (model.objective_constant if model.direction == "min" else -model.objective_constant)
    return value if model.direction == "min" else -value


def solve_lp(model: Model, feas_tol: float = FEAS_TOL) -> MipSolution:
    """Solve the continuous relaxation of ``model`` (integrality ignored)."""
    t0 = time.perf_counter()
    lp, _, _ = _engine(model, feas_tol)
    st = lp.solve_cold()
    x = lp.primal_values()
    obj = _report(model, lp.objective()) if st in (LPStatus.OPTIMAL, LPStatus.ITERATION_LIMIT) else math.nan
    return MipSolution(_LP_STATUS[st], obj, x, nodes=0, wall_time=time.perf_counter() - t0,
                       bound=obj, lp_iterations=lp.iterations)


def _most_fractional(x: np.ndarray, ints: np.ndarray, tol: float) -> int:
    vals = x[ints]
    frac = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
    k = int(np.argmax(frac))
    if frac[k] <= tol:
        return -1
    return int(ints[k])


def solve_mip(model: Model, params: MipParams | None = None, lazy: LazyCallback | None = None,
              start: np.ndarray | None = None, **overrides) -> MipSolution:
    """Branch-and-bound over the integer variables of ``model``.

    Branching picks the most fractional variable (lowest index on ties). The
    search dives depth-first into the child on the rounding side of the
    branching value and restarts from the best-bound open node when a dive
    ends. ``lazy`` is called with the (integer-polished) point of every
    candidate incumbent and may return rows ``(coeffs, sense, rhs)`` that are
    added to the model globally before the node is re-solved. ``start`` is an
    optional feasible point used as initial incumbent; with ``lazy`` it is
    kept only when the callback returns no rows for it.
    """
    params = params or MipParams()
    for key, val in overrides.items():
        setattr(params, key, val)
    t0 = time.perf_counter()
    ints = np.array(model.integer_indices(), dtype=int)
    for j in ints:
        v = model.variables[j]
        if not (math.isfinite(v.lb) and math.isfinite(v.ub)):
            raise ModelingError(f"integer variable {v.name} needs finite bounds")
    work = model.copy()
    lp, c_min, mask = _engine(work, params.feas_tol)
    if params.presolve and lp.m:
        k = lp.n
        lb, ub, ok = propagate_bounds(lp.M[:, :k], lp.lb[k:], lp.ub[k:], lp.lb[:k], lp.ub[:k], mask,
                                      int_tol=params.int_tol, feas_tol=params.feas_tol)
        if not ok:
            return MipSolution(Status.INFEASIBLE, math.nan, np.full(model.num_vars, math.nan), 0,
                               time.perf_counter() - t0, flags=["presolve-infeasible"])
        # only integer bounds are kept: tightened continuous bounds let LP
        # tolerances accumulate across chained rows
        lp.lb[:k] = np.where(mask, lb, lp.lb[:k])
        lp.ub[:k] = np.where(mask, ub, lp.ub[:k])
    base_lb = lp.lb[ints].copy()
    base_ub = lp.ub[ints].copy()
    base_lb = np.ceil(base_lb - params.int_tol)
    base_ub = np.floor(base_ub + params.int_tol)
    n = model.num_vars

    best_x: np.ndarray | None = None
    best_val = math.inf
    flags: list[str] = []
    if start is not None:
        start = np.asarray(start, dtype=float)
        if work.max_violation(start) <= params.feas_tol * 10 and (lazy is None or not list(lazy(start.copy()) or [])):
            best_x = start.copy()
            best_val = float(c_min @ start)

    def tolerance(val: float) -> float:
        if not math.isfinite(val):
            return 0.0
        return max(params.abs_gap, params.gap * abs(val))

    nodes = 0
    cuts_added = 0
    seq = 0
    heap: list[_Node] = []
    dive: _Node | None = _Node(-math.inf, seq, base_lb.copy(), base_ub.copy(), None, 0)
    status = None
    lp_infeasible_root = False
    hit_limit = False

    def solve_node(node: _Node) -> LPStatus:
        if ints.size:
            lp.set_struct_bounds(ints, node.lb, node.ub)
        if node.snap is None:
            return lp.solve_cold()
        return lp.solve_warm(node.snap)

    while dive is not None or heap:
        if params.time_limit is not None and time.perf_counter() - t0 > params.time_limit:
            hit_limit = True
            break
        if (params.soft_time_limit is not None and best_x is not None
                and time.perf_counter() - t0 > params.soft_time_limit):
            hit_limit = True
            break
        if params.node_limit is not None and nodes >= params.node_limit:
            hit_limit = True
            break
        if dive is not None:
            node, dive = dive, None
        else:
            node = heapq.heappop(heap)
        if node.bound >= best_val - tolerance(best_val):
            continue
        nodes += 1
        while True:
            st = solve_node(node)
            if st is LPStatus.UNBOUNDED:
                if nodes == 1:
                    status = Status.UNBOUNDED
                st = None
                break
            if st is not LPStatus.OPTIMAL:
                if nodes == 1 and st is LPStatus.INFEASIBLE:
                    lp_infeasible_root = True
                if st is LPStatus.ITERATION_LIMIT:
                    flags.append("lp-iteration-limit")
                st = None
                break
            obj = lp.objective()
            if obj >= best_val - tolerance(best_val):
                st = None
                break
            x = lp.primal_values()
            j = _most_fractional(x, ints, params.int_tol) if ints.size else -1
            if j >= 0:
                break
            # candidate incumbent: polish integer values exactly
            snap = lp.snapshot()
            if ints.size and np.any(x[ints] != np.round(x[ints])):
                fixed = np.round(x[ints])
                lp.set_struct_bounds(ints, fixed, fixed)
                if lp.solve_warm(snap) is LPStatus.OPTIMAL:
                    x = lp.primal_values()
                x[ints] = np.round(x[ints])
            # value of the point actually returned, exact for integer data
            obj = float(c_min @ x)
            if lazy is not None:
                rows = list(lazy(x.copy()) or [])
                if rows:
                    for coeffs, sense, rhs in rows:
                        idx = work.add_constr(coeffs, sense, rhs)
                        con = work.constraints[idx]
                        vec = np.zeros(n)
                        for k, a in con.coeffs.items():
                            vec[k] = a
                        lo = -math.inf if con.sense is Sense.LE else con.rhs
                        hi = math.inf if con.sense is Sense.GE else con.rhs
                        lp.add_row(vec, lo, hi)
                    cuts_added += len(rows)
                    if cuts_added > params.cut_limit:
                        flags.append("cut-limit")
                        hit_limit = True
                        st = None
                        break
                    node.snap = snap
                    continue
            if obj < best_val:
                best_val = obj
                best_x = x
            st = None
            break
        if hit_limit:
            break
        if st is None:
            if status is Status.UNBOUNDED:
                break
            continue
        snap = lp.snapshot()
        val = x[j]
        down_lb, down_ub = node.lb.copy(), node.ub.copy()
        up_lb, up_ub = node.lb.copy(), node.ub.copy()
        k = int(np.searchsorted(ints, j))
        down_ub[k] = math.floor(val)
        up_lb[k] = math.ceil(val)
        seq += 1
        down = _Node(obj, seq, down_lb, down_ub, snap, node.depth + 1)
        seq += 1
        up = _Node(obj, seq, up_lb, up_ub, snap, node.depth + 1)
        if val - math.floor(val) >= 0.5:
            dive, other = up, down
        else:
            dive, other = down, up
        heapq.heappush(heap, other)
        open_bound = min([h.bound for h in heap[:1]] + [dive.bound])
        if best_x is not None and best_val - open_bound <= tolerance(best_val):
            dive = None
            heap.clear()

    elapsed = time.perf_counter() - t0
    open_bounds = [h.bound for h in heap] + ([dive.bound] if dive is not None else [])
    if status is Status.UNBOUNDED:
        return MipSolution(Status.UNBOUNDED, math.nan, np.full(n, math.nan), nodes, elapsed,
                           cuts_added=cuts_added, lp_iterations=lp.iterations, flags=flags)
    if hit_limit:
        bound = min(open_bounds + [best_val]) if open_bounds else best_val
        x = best_x if best_x is not None else np.full(n, math.nan)
        obj = _report(model, best_val) if best_x is not None else math.nan
        if "cut-limit" in flags and best_x is not None:
            flags.append("possibly-infeasible")
        return MipSolution(Status.ITERATION_LIMIT, obj, x, nodes, elapsed,
                           bound=_report(model, bound) if math.isfinite(bound) else bound,
                           cuts_added=cuts_added, lp_iterations=lp.iterations, flags=flags)
    if best_x is None:
        if lp_infeasible_root:
            flags.append("root-lp-infeasible")
        return MipSolution(Status.INFEASIBLE, math.nan, np.full(n, math.nan), nodes, elapsed,
                           cuts_added=cuts_added, lp_iterations=lp.iterations, flags=flags)
    obj = _report(model, best_val)
    return MipSolution(Status.OPTIMAL, obj, best_x, nodes, elapsed, bound=obj,
                       cuts_added=cuts_added, lp_iterations=lp.iterations, flags=flags)
