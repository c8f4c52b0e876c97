"""Dense revised simplex over bounded variables.

Every row ``i`` of ``A x {<=,=,>=} rhs`` gets a logical column ``r_i`` so the
system becomes ``A x - r = 0`` with ``row_lo <= r <= row_hi``. All columns then
carry simple bounds, and a basis is any set of ``m`` columns with a
nonsingular submatrix.

Cold solves run a two-phase primal simplex (phase 1 minimises a sum of
artificial columns). Warm solves after bound changes or added rows restore a
stored basis and run the dual simplex, falling back to a cold solve when the
restored basis is not dual feasible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-7
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
STALL_LIMIT = 50


class LPStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class BasisSnapshot:
    basis: np.ndarray
    at_upper: np.ndarray


class LPEngine:
    """Mutable simplex state for one LP; bounds may change and rows may be added."""

    def __init__(self, A, row_lo, row_hi, c, lb, ub, feas_tol: float = FEAS_TOL):
        A = np.asarray(A, dtype=float)
        m, n = A.shape
        self.n = n
        self.m = m
        self.feas_tol = feas_tol
        self.M = np.hstack([A, -np.eye(m)]) if m else np.zeros((0, n))
        self.lb = np.concatenate([np.asarray(lb, float), np.asarray(row_lo, float)])
        self.ub = np.concatenate([np.asarray(ub, float), np.asarray(row_hi, float)])
        self.cost = np.concatenate([np.asarray(c, float), np.zeros(m)])
        self.logical_col = list(range(n, n + m))
        self.artificial = np.zeros(n + m, dtype=bool)
        self.x = np.zeros(n + m)
        self.basis = np.array(self.logical_col, dtype=int)
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.Binv = np.eye(0)
        self.pivots_since_refactor = 0
        self.iterations = 0
        self.status: LPStatus | None = None

    # -- structure ---------------------------------------------------------

    @property
    def num_cols(self) -> int:
        return self.M.shape[1]

    def _append_column(self, col: np.ndarray, lb: float, ub: float, cost: float = 0.0,
                       artificial: bool = False) -> int:
        self.M = np.hstack([self.M, col.reshape(-1, 1)])
        self.lb = np.append(self.lb, lb)
        self.ub = np.append(self.ub, ub)
        self.cost = np.append(self.cost, cost)
        self.x = np.append(self.x, 0.0)
        self.is_basic = np.append(self.is_basic, False)
        self.artificial = np.append(self.artificial, artificial)
        return self.num_cols - 1

    def add_row(self, coeffs: np.ndarray, lo: float, hi: float) -> int:
        """Append the row ``lo <= coeffs . x_struct <= hi``; returns its row index."""
        row = np.zeros(self.num_cols)
        row[: self.n] = coeffs
        self.M = np.vstack([self.M, row])
        self.m += 1
        col = np.zeros(self.m)
        col[-1] = -1.0
        j = self._append_column(col, lo, hi)
        self.logical_col.append(j)
        return self.m - 1

    def set_struct_bounds(self, idx, lb, ub) -> None:
        self.lb[idx] = lb
        self.ub[idx] = ub

    # -- linear algebra ----------------------------------------------------

    def _refactor(self) -> bool:
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(self.Binv)):
            return False
        self.pivots_since_refactor = 0
        self._recompute_basics()
        return True

    def _recompute_basics(self) -> None:
        nb = ~self.is_basic
        rhs = self.M[:, nb] @ self.x[nb]
        self.x[self.basis] = -(self.Binv @ rhs)

    def _pivot(self, r: int, q: int, alpha: np.ndarray) -> None:
        row = self.Binv[r] / alpha[r]
        self.Binv -= np.outer(alpha, row)
        self.Binv[r] = row
        self.pivots_since_refactor += 1
        p = self.basis[r]
        self.is_basic[p] = False
        self.is_basic[q] = True
        self.basis[r] = q

    def _reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = cost[self.basis] @ self.Binv
        d = cost - y @ self.M
        d[self.basis] = 0.0
        return d

    def _nonbasic_homes(self, cols: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`_nonbasic_home` for the columns ``cols``."""
        lb, ub = self.lb[cols], self.ub[cols]
        fin_lb, fin_ub = np.isfinite(lb), np.isfinite(ub)
        home = np.where(fin_lb, lb, np.where(fin_ub, ub, 0.0))
        return np.where(upper & fin_ub, ub, home)

    def _nonbasic_home(self, j: int, upper: bool = False) -> float:
        lb, ub = self.lb[j], self.ub[j]
        if upper and np.isfinite(ub):
            return ub
        if np.isfinite(lb):
            return lb
        if np.isfinite(ub):
            return ub
        return 0.0

    # -- solves ------------------------------------------------------------

    def solve_cold(self, max_iter: int | None = None) -> LPStatus:
        """Two-phase primal simplex from the all-logical basis."""
        max_iter = max_iter or 50 * (self.m + self.n) + 1000
        n_struct = self.n
        self.is_basic[:] = False
        # retire artificial columns from previous cold solves
        self.lb[self.artificial] = 0.0
        self.ub[self.artificial] = 0.0
        self.x[self.artificial] = 0.0
        for j in range(self.num_cols):
            if not self.artificial[j]:
                self.x[j] = self._nonbasic_home(j)
        act = self.M[:, :n_struct] @ self.x[:n_struct]
        basis = []
        phase1 = np.zeros(self.num_cols)
        new_art = []
        for i in range(self.m):
            j = self.logical_col[i]
            lo, hi = self.lb[j], self.ub[j]
            if lo - self.feas_tol <= act[i] <= hi + self.feas_tol:
                self.x[j] = act[i]
                basis.append(j)
            else:
                beta = lo if act[i] < lo else hi
                self.x[j] = beta
                sign = 1.0 if beta - act[i] > 0 else -1.0
                new_art.append((i, sign, abs(beta - act[i])))
                basis.append(-1)
        for i, sign, val in new_art:
            col = np.zeros(self.m)
            col[i] = sign
            k = self._append_column(col, 0.0, np.inf, artificial=True)
            self.x[k] = val
            basis[i] = k
        self.basis = np.array(basis, dtype=int)
        self.is_basic[self.basis] = True
        if not self._refactor():
            raise np.linalg.LinAlgError("initial basis singular")
        if new_art:
            phase1 = self.artificial.astype(float)
            st = self._primal(phase1, max_iter)
            if st is LPStatus.ITERATION_LIMIT:
                self.status = st
                return st
            if np.max(self.x[self.artificial], initial=0.0) > self.feas_tol:
                self.status = LPStatus.INFEASIBLE
                return self.status
            self.ub[self.artificial] = 0.0
            nb_art = self.artificial & ~self.is_basic
            self.x[nb_art] = 0.0
        self.status = self._primal(self.cost, max_iter)
        return self.status

    def snapshot(self) -> BasisSnapshot:
        at_upper = (~self.is_basic) & np.isfinite(self.ub) & (self.x >= self.ub) & (self.ub > self.lb)
        return BasisSnapshot(self.basis.copy(), at_upper)

    def solve_warm(self, snap: BasisSnapshot, max_iter: int | None = None) -> LPStatus:
        """Restore ``snap`` (extended with logicals of rows added since) and re-optimise."""
        max_iter = max_iter or 50 * (self.m + self.n) + 1000
        basis = list(snap.basis)
        if len(basis) < self.m:
            basis.extend(self.logical_col[len(basis):])
        at_upper = np.zeros(self.num_cols, dtype=bool)
        at_upper[: len(snap.at_upper)] = snap.at_upper
        basis = np.array(basis, dtype=int)
        # a dive restores the basis the engine already holds: keep its inverse
        reuse = (self.Binv.shape == (self.m, self.m) and np.array_equal(basis, self.basis)
                 and self.pivots_since_refactor < REFACTOR_EVERY)
        self.basis = basis
        self.is_basic[:] = False
        self.is_basic[self.basis] = True
        nb = np.flatnonzero(~self.is_basic)
        self.x[nb] = self._nonbasic_homes(nb, at_upper[nb])
        if reuse:
            self._recompute_basics()
        elif not self._refactor():
            return self.solve_cold(max_iter)
        d = self._reduced_costs(self.cost)
        if not self._make_dual_feasible(d):
            if self._primal_feasible():
                self.status = self._primal(self.cost, max_iter)
                return self.status
            return self.solve_cold(max_iter)
        st = self._dual(self.cost, max_iter)
        if st is LPStatus.ITERATION_LIMIT:
            return self.solve_cold(max_iter)
        self.status = st
        return st

    def _primal_feasible(self) -> bool:
        xb = self.x[self.basis]
        tol = self.feas_tol
        return bool(np.all(xb >= self.lb[self.basis] - tol) and np.all(xb <= self.ub[self.basis] + tol))

    def _make_dual_feasible(self, d: np.ndarray) -> bool:
        flipped = False
        for j in np.flatnonzero(~self.is_basic):
            lb, ub = self.lb[j], self.ub[j]
            if lb == ub:
                continue
            xj = self.x[j]
            at_lb = np.isfinite(lb) and xj <= lb
            at_ub = np.isfinite(ub) and xj >= ub
            if at_lb and d[j] < -DUAL_TOL:
                if not np.isfinite(ub):
                    return False
                self.x[j] = ub
                flipped = True
            elif at_ub and d[j] > DUAL_TOL:
                if not np.isfinite(lb):
                    return False
                self.x[j] = lb
                flipped = True
            elif not at_lb and not at_ub and abs(d[j]) > DUAL_TOL:
                return False
        if flipped:
            self._recompute_basics()
        return True

    # -- iterations --------------------------------------------------------

    def _primal(self, cost: np.ndarray, max_iter: int) -> LPStatus:
        tol = self.feas_tol
        stall = 0
        bland = False
        for it in range(max_iter):
            self.iterations += 1
            if it and it % REFACTOR_EVERY == 0 and not self._refactor():
                return LPStatus.ITERATION_LIMIT
            d = self._reduced_costs(cost)
            nb = ~self.is_basic
            x, lb, ub = self.x, self.lb, self.ub
            can_inc = nb & (x < ub - tol)
            can_dec = nb & (x > lb + tol)
            inc = can_inc & (d < -DUAL_TOL)
            dec = can_dec & (d > DUAL_TOL)
            cand = inc | dec
            if not cand.any():
                return LPStatus.OPTIMAL
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                q = int(np.argmax(score))
            dirn = 1.0 if inc[q] else -1.0
            alpha = self.Binv @ self.M[:, q]
            delta = dirn * alpha
            xb = x[self.basis]
            lbb = lb[self.basis]
            ubb = ub[self.basis]
            # Harris two-pass ratio test
            with np.errstate(divide="ignore", invalid="ignore"):
                dec_rows = delta > PIVOT_TOL
                inc_rows = delta < -PIVOT_TOL
                relaxed = np.full(self.m, np.inf)
                relaxed[dec_rows] = (xb[dec_rows] - lbb[dec_rows] + tol) / delta[dec_rows]
                relaxed[inc_rows] = (ubb[inc_rows] - xb[inc_rows] + tol) / -delta[inc_rows]
                theta_max = relaxed.min() if self.m else np.inf
                exact = np.full(self.m, np.inf)
                exact[dec_rows] = (xb[dec_rows] - lbb[dec_rows]) / delta[dec_rows]
                exact[inc_rows] = (ubb[inc_rows] - xb[inc_rows]) / -delta[inc_rows]
            exact = np.maximum(exact, 0.0)
            flip = ub[q] - lb[q]
            if not np.isfinite(theta_max) and not np.isfinite(flip):
                return LPStatus.UNBOUNDED
            if flip <= theta_max:
                theta = flip
                r = -1
            else:
                elig = np.flatnonzero(exact <= theta_max)
                if bland:
                    r = int(elig[np.argmin(self.basis[elig])])
                else:
                    r = int(elig[np.argmax(np.abs(delta[elig]))])
                theta = exact[r]
            stall = stall + 1 if theta <= 1e-12 else 0
            if stall > STALL_LIMIT:
                bland = True
            elif stall == 0:
                bland = False
            x[self.basis] = xb - theta * delta
            x[q] += dirn * theta
            if r < 0:
                x[q] = ub[q] if dirn > 0 else lb[q]
                continue
            p = self.basis[r]
            x[p] = lbb[r] if delta[r] > 0 else ubb[r]
            self._pivot(r, q, alpha)
        return LPStatus.ITERATION_LIMIT

    def _dual(self, cost: np.ndarray, max_iter: int) -> LPStatus:
        tol = self.feas_tol
        stall = 0
        bland = False
        for it in range(max_iter):
            self.iterations += 1
            if it and it % REFACTOR_EVERY == 0 and not self._refactor():
                return LPStatus.ITERATION_LIMIT
            xb = self.x[self.basis]
            lbb = self.lb[self.basis]
            ubb = self.ub[self.basis]
            below = lbb - xb
            above = xb - ubb
            infeas = np.maximum(below, above)
            if self.m == 0 or infeas.max() <= tol:
                return LPStatus.OPTIMAL
            if bland:
                rows = np.flatnonzero(infeas > tol)
                r = int(rows[np.argmin(self.basis[rows])])
            else:
                r = int(np.argmax(infeas))
            raise_it = below[r] > above[r]
            target = lbb[r] if raise_it else ubb[r]
            alpha_row = self.Binv[r] @ self.M
            d = self._reduced_costs(cost)
            nb = ~self.is_basic
            x, lb, ub = self.x, self.lb, self.ub
            can_inc = nb & (x < ub)
            can_dec = nb & (x > lb)
            if raise_it:
                elig = (can_inc & (alpha_row < -PIVOT_TOL)) | (can_dec & (alpha_row > PIVOT_TOL))
            else:
                elig = (can_inc & (alpha_row > PIVOT_TOL)) | (can_dec & (alpha_row < -PIVOT_TOL))
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                return LPStatus.INFEASIBLE
            ratios = np.abs(d[idx]) / np.abs(alpha_row[idx])
            if bland:
                q = int(idx[np.flatnonzero(ratios <= ratios.min() + 1e-12)[0]])
            else:
                # Harris pass on the dual side
                relaxed = (np.abs(d[idx]) + DUAL_TOL) / np.abs(alpha_row[idx])
                pool = idx[ratios <= relaxed.min()]
                q = int(pool[np.argmax(np.abs(alpha_row[pool]))])
            stall = stall + 1 if abs(d[q]) <= DUAL_TOL else 0
            if stall > STALL_LIMIT:
                bland = True
            elif stall == 0:
                bland = False
            alpha = self.Binv @ self.M[:, q]
            step = (xb[r] - target) / alpha[r]
            x[self.basis] = xb - step * alpha
            x[q] += step
            p = self.basis[r]
            x[p] = target
            self._pivot(r, q, alpha)
        return LPStatus.ITERATION_LIMIT

    # -- results -----------------------------------------------------------

    def primal_values(self) -> np.ndarray:
        return self.x[: self.n].copy()

    def objective(self) -> float:
        return float(self.cost[: self.n] @ self.x[: self.n])
