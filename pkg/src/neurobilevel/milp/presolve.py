"""Root bound tightening from row activities."""

from __future__ import annotations

import numpy as np

# implied bounds larger than this are not adopted (keeps the simplex well scaled)
BOUND_CAP = 1e7


def _rel(bound):
    # minimum worthwhile move of a continuous bound (zero for infinite ones)
    finite = np.isfinite(bound)
    return np.where(finite, 1e-6 * np.maximum(1.0, np.abs(np.where(finite, bound, 0.0))), 0.0)


def _activity(P, N, lo_v, hi_v, A_zero):
    with np.errstate(invalid="ignore"):
        part = P * lo_v + N * hi_v
    part[A_zero] = 0.0
    inf = np.isinf(part)
    total = np.where(inf, 0.0, part).sum(axis=1)
    count = inf.sum(axis=1)
    return part, inf, total, count


def _residual(part, inf, total, count, sign):
    # activity of every other entry of the row: finite when at most this entry is infinite
    fin = np.where(inf, 0.0, part)
    res = np.full(part.shape, sign * np.inf)
    none = count[:, None] == 0
    only_me = (count[:, None] == 1) & inf
    res = np.where(none, total[:, None] - fin, res)
    res = np.where(only_me, total[:, None], res)
    return res


def propagate_bounds(A, row_lo, row_hi, lb, ub, integer, *, int_tol: float = 1e-6,
                     feas_tol: float = 1e-7, passes: int = 10):
    """Tighten variable bounds implied by ``row_lo <= A x <= row_hi``.

    Returns ``(lb, ub, feasible)``. Integer bounds are rounded inward.
    Continuous bounds move only by a clear margin and keep a small slack, so
    no point feasible within ``feas_tol`` is cut off.
    """
    A = np.asarray(A, float)
    lb = np.asarray(lb, float).copy()
    ub = np.asarray(ub, float).copy()
    integer = np.asarray(integer, bool)
    if A.size == 0:
        return lb, ub, bool(np.all(lb <= ub + feas_tol))
    P = np.where(A > 0, A, 0.0)
    N = np.where(A < 0, A, 0.0)
    A_zero = A == 0.0
    pos, neg = A > 0, A < 0
    safe = np.where(A_zero, 1.0, A)
    for _ in range(passes):
        pmin, imin, tmin, cmin = _activity(P, N, lb, ub, A_zero)
        pmax, imax, tmax, cmax = _activity(P, N, ub, lb, A_zero)
        rmin = _residual(pmin, imin, tmin, cmin, -1.0)
        rmax = _residual(pmax, imax, tmax, cmax, 1.0)
        with np.errstate(invalid="ignore"):
            top = (np.asarray(row_hi, float)[:, None] - rmin) / safe
            bot = (np.asarray(row_lo, float)[:, None] - rmax) / safe
        up_cand = np.where(pos, top, np.where(neg, bot, np.inf))
        lo_cand = np.where(pos, bot, np.where(neg, top, -np.inf))
        up_cand = np.where(np.isnan(up_cand), np.inf, up_cand)
        lo_cand = np.where(np.isnan(lo_cand), -np.inf, lo_cand)
        new_ub = up_cand.min(axis=0)
        new_lb = lo_cand.max(axis=0)
        new_ub = np.where(integer, np.floor(new_ub + int_tol), new_ub + 1e-9 * np.maximum(1.0, np.abs(new_ub)))
        new_lb = np.where(integer, np.ceil(new_lb - int_tol), new_lb - 1e-9 * np.maximum(1.0, np.abs(new_lb)))
        margin = np.where(integer, 0.5, _rel(ub))
        tighten_ub = (new_ub < ub - margin) & (np.abs(new_ub) <= BOUND_CAP)
        margin = np.where(integer, 0.5, _rel(lb))
        tighten_lb = (new_lb > lb + margin) & (np.abs(new_lb) <= BOUND_CAP)
        if not (tighten_ub.any() or tighten_lb.any()):
            break
        ub = np.where(tighten_ub, new_ub, ub)
        lb = np.where(tighten_lb, new_lb, lb)
        if np.any(lb > ub + feas_tol):
            return lb, ub, False
    # continuous bounds crossing by less than the tolerance collapse to a point
    cross = (lb > ub) & ~integer
    if cross.any():
        mid = 0.5 * (lb[cross] + ub[cross])
        lb[cross] = mid
        ub[cross] = mid
    return lb, ub, bool(np.all(lb <= ub))
