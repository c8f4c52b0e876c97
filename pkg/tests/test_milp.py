import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from neurobilevel.milp import (KernelBackend, MipParams, Model, ModelingError, Sense, Status,
                               linearize_binary_products, quadratic_objective_terms, solve_lp, solve_mip)
from neurobilevel.milp.presolve import propagate_bounds


def random_binary_model(rng, n, m, direction="min"):
    model = Model(direction)
    xs = [model.add_binary() for _ in range(n)]
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    b = rng.integers(-3, 10, size=m).astype(float)
    senses = rng.choice(["<=", ">=", "="], size=m, p=[0.6, 0.3, 0.1])
    for i in range(m):
        model.add_constr({xs[j]: A[i, j] for j in range(n)}, senses[i], b[i])
    c = rng.integers(-9, 10, size=n).astype(float)
    model.set_objective({xs[j]: c[j] for j in range(n)}, constant=float(rng.integers(-5, 5)))
    return model


def enumerate_binary(model):
    """Best objective over all 0/1 points (None if no point is feasible)."""
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=model.num_vars):
        x = np.array(bits)
        if model.max_violation(x) <= 1e-9:
            val = model.evaluate_objective(x)
            if best is None or (val < best if model.direction == "min" else val > best):
                best = val
    return best


class TestModeling:
    def test_well_formed_model(self):
        model = Model()
        x = model.add_var(0, 1, integer=True)
        model.add_constr({x: 1.0}, "<=", 0.0)
        model.set_objective({x: -1.0})
        assert model.num_vars == 1 and model.num_constraints == 1
        sol = solve_mip(model)
        assert sol.status is Status.OPTIMAL and sol.objective == 0.0

    def test_duplicate_rows_are_kept(self):
        model = Model()
        x = model.add_var(0, 5)
        model.add_constr({x: 1.0}, "<=", 3.0)
        model.add_constr({x: 1.0}, "<=", 3.0)
        assert model.num_constraints == 2
        assert model.constraints[0] == model.constraints[1]

    def test_undeclared_variable(self):
        model = Model()
        model.add_var()
        with pytest.raises(ModelingError):
            model.add_constr({3: 1.0}, "<=", 1.0)
        with pytest.raises(ModelingError):
            model.set_objective({-1: 1.0})

    def test_bad_bounds_and_senses(self):
        model = Model()
        with pytest.raises(ModelingError):
            model.add_var(2.0, 1.0)
        x = model.add_var()
        with pytest.raises(ModelingError):
            model.add_constr({x: 1.0}, "<>", 1.0)
        with pytest.raises(ModelingError):
            Model("maximise")
        assert Sense.parse("==") is Sense.EQ

    def test_integer_needs_finite_bounds(self):
        model = Model()
        x = model.add_var(0, math.inf, integer=True)
        model.set_objective({x: 1.0})
        with pytest.raises(ModelingError):
            solve_mip(model)

    def test_lp_text_dump(self):
        model = Model("max", name="demo")
        a = model.add_binary("a")
        b = model.add_var(0, 2.5, name="b")
        model.add_constr({a: 1.0, b: -2.0}, ">=", -1.0, name="r0")
        model.set_objective({a: 3.0, b: 1.0}, constant=1.5)
        text = model.to_lp_string()
        assert text.startswith("\\ demo\nMaximize\n obj: 3.0 a + 1.0 b + 1.5")
        assert " r0: 1.0 a - 2.0 b >= -1.0" in text
        assert "General\n a\nEnd" in text


class TestLP:
    def test_bounded_max(self):
        model = Model("max")
        y = model.add_var(0, 3)
        model.set_objective({y: 1.0})
        sol = solve_lp(model)
        assert sol.status is Status.OPTIMAL and sol.objective == 3.0 and sol[y] == 3.0

    def test_infeasible(self):
        model = Model()
        x = model.add_var(-math.inf, math.inf)
        model.add_constr({x: 1.0}, ">=", 2.0)
        model.add_constr({x: 1.0}, "<=", 1.0)
        model.set_objective({x: 1.0})
        assert solve_lp(model).status is Status.INFEASIBLE

    def test_unbounded(self):
        model = Model()
        x = model.add_var(-math.inf, 0)
        y = model.add_var(0, math.inf)
        model.add_constr({x: 1.0, y: -1.0}, "<=", 4.0)
        model.set_objective({x: 1.0})
        assert solve_lp(model).status is Status.UNBOUNDED

    def test_free_variable_and_equalities(self):
        model = Model()
        x = model.add_var(-math.inf, math.inf)
        y = model.add_var(-math.inf, math.inf)
        model.add_constr({x: 1.0, y: 1.0}, "=", 3.0)
        model.add_constr({x: 1.0, y: -1.0}, "=", 1.0)
        model.set_objective({x: 1.0})
        sol = solve_lp(model)
        assert sol.status is Status.OPTIMAL
        assert sol[x] == pytest.approx(2.0, abs=1e-12) and sol[y] == pytest.approx(1.0, abs=1e-12)

    def test_vertex_enumeration_on_three_variable_lps(self, rng):
        for _ in range(40):
            A = rng.uniform(-3, 3, size=(4, 3))
            b = rng.uniform(0, 6, size=4)
            c = rng.uniform(-2, 2, size=3)
            ub = rng.uniform(0.5, 3, size=3)
            model = Model()
            xs = [model.add_var(0, ub[j]) for j in range(3)]
            for i in range(4):
                model.add_constr({xs[j]: A[i, j] for j in range(3)}, "<=", b[i])
            model.set_objective({xs[j]: c[j] for j in range(3)})
            # every vertex is the intersection of three active planes
            G = np.vstack([A, -np.eye(3), np.eye(3)])
            h = np.concatenate([b, np.zeros(3), ub])
            best = math.inf
            for rows in itertools.combinations(range(len(G)), 3):
                M = G[list(rows)]
                if abs(np.linalg.det(M)) < 1e-10:
                    continue
                v = np.linalg.solve(M, h[list(rows)])
                if np.all(G @ v <= h + 1e-9):
                    best = min(best, float(c @ v))
            sol = solve_lp(model)
            assert sol.status is Status.OPTIMAL
            assert sol.objective == pytest.approx(best, rel=1e-7, abs=1e-7)

    def test_random_lps_against_highs(self, rng):
        for _ in range(60):
            n, m = int(rng.integers(2, 20)), int(rng.integers(1, 15))
            A = rng.uniform(-5, 5, size=(m, n))
            b = rng.uniform(-2, 20, size=m)
            c = rng.uniform(-3, 3, size=n)
            lb = rng.uniform(-3, 0, size=n)
            ub = rng.uniform(0, 4, size=n)
            model = Model()
            xs = [model.add_var(lb[j], ub[j]) for j in range(n)]
            for i in range(m):
                model.add_constr({xs[j]: A[i, j] for j in range(n)}, "<=", b[i])
            model.set_objective({xs[j]: c[j] for j in range(n)})
            ref = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(lb, ub)), method="highs")
            sol = solve_lp(model)
            if ref.status == 2:
                assert sol.status is Status.INFEASIBLE
            else:
                assert sol.status is Status.OPTIMAL
                assert sol.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
                assert model.max_violation(sol.x, integrality=False) <= 1e-7

    @settings(max_examples=30)
    @given(seed=st.integers(0, 10 ** 6))
    def test_row_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n, m = 6, 8
        A = rng.uniform(-5, 5, size=(m, n))
        b = rng.uniform(0, 10, size=m)
        c = rng.uniform(-3, 3, size=n)

        def build(order):
            model = Model()
            xs = [model.add_var(0, 2) for _ in range(n)]
            for i in order:
                model.add_constr({xs[j]: A[i, j] for j in range(n)}, "<=", b[i])
            model.set_objective({xs[j]: c[j] for j in range(n)})
            return solve_lp(model)

        a = build(range(m))
        p = build(rng.permutation(m))
        assert a.status is p.status is Status.OPTIMAL
        assert p.objective == pytest.approx(a.objective, rel=1e-7, abs=1e-9)


class TestMIP:
    def test_knapsack(self):
        model = Model("max")
        a, b = model.add_binary("a"), model.add_binary("b")
        model.add_constr({a: 1.0, b: 1.0}, "<=", 1.0)
        model.set_objective({a: 3.0, b: 2.0})
        sol = solve_mip(model)
        assert sol.status is Status.OPTIMAL and sol.objective == 3.0 and sol[a] == 1.0

    def test_infeasible_binary(self):
        model = Model()
        a, b = model.add_binary(), model.add_binary()
        model.add_constr({a: 1.0, b: 1.0}, ">=", 3.0)
        model.set_objective({a: 1.0})
        assert solve_mip(model).status is Status.INFEASIBLE

    def test_eight_binaries_match_enumeration(self, rng):
        for _ in range(40):
            model = random_binary_model(rng, 8, int(rng.integers(1, 6)), rng.choice(["min", "max"]))
            best = enumerate_binary(model)
            sol = solve_mip(model, gap=0.0)
            if best is None:
                assert sol.status is Status.INFEASIBLE
            else:
                assert sol.status is Status.OPTIMAL
                assert sol.objective == pytest.approx(best, abs=1e-9)
                assert model.max_violation(sol.x) <= 1e-7

    def test_general_integers_against_highs(self, rng):
        from scipy.optimize import Bounds, LinearConstraint, milp

        for _ in range(30):
            n, m = 6, 5
            A = rng.uniform(-4, 4, size=(m, n))
            b = rng.uniform(0, 12, size=m)
            c = rng.uniform(-3, 3, size=n)
            integer = rng.random(n) < 0.6
            model = Model()
            xs = [model.add_var(-2, 3, integer=bool(integer[j])) for j in range(n)]
            for i in range(m):
                model.add_constr({xs[j]: A[i, j] for j in range(n)}, "<=", b[i])
            model.set_objective({xs[j]: c[j] for j in range(n)})
            ref = milp(c, constraints=LinearConstraint(A, -np.inf, b), integrality=integer.astype(int),
                       bounds=Bounds(-2, 3))
            sol = solve_mip(model, gap=0.0)
            assert ref.status == 0 and sol.status is Status.OPTIMAL
            assert sol.objective == pytest.approx(ref.fun, abs=1e-6)

    def test_determinism(self, rng):
        model = random_binary_model(rng, 10, 4)
        a, b = solve_mip(model), solve_mip(model)
        assert a.nodes == b.nodes
        assert np.array_equal(a.x, b.x)

    def test_node_limit_reports_incumbent_and_bound(self):
        rng = np.random.default_rng(5)
        model = Model("max")
        w = rng.integers(5, 40, size=25)
        v = w + rng.integers(-3, 4, size=25)
        xs = [model.add_binary() for _ in range(25)]
        model.add_constr({x: float(wi) for x, wi in zip(xs, w)}, "<=", float(w.sum() // 2) + 0.5)
        model.set_objective({x: float(vi) for x, vi in zip(xs, v)})
        sol = solve_mip(model, MipParams(node_limit=3))
        assert sol.status is Status.ITERATION_LIMIT
        assert sol.nodes == 3
        if np.all(np.isfinite(sol.x)):
            assert sol.bound >= sol.objective - 1e-9

    def test_soft_time_limit_stops_at_first_incumbent(self):
        rng = np.random.default_rng(5)
        model = Model("max")
        w = rng.integers(5, 40, size=25)
        v = w + rng.integers(-3, 4, size=25)
        xs = [model.add_binary() for _ in range(25)]
        model.add_constr({x: float(wi) for x, wi in zip(xs, w)}, "<=", float(w.sum() // 2) + 0.5)
        model.set_objective({x: float(vi) for x, vi in zip(xs, v)})
        full = solve_mip(model, gap=0.0)
        sol = solve_mip(model, MipParams(gap=0.0, soft_time_limit=0.0))
        assert sol.status is Status.ITERATION_LIMIT
        assert sol.nodes < full.nodes
        assert model.max_violation(sol.x) <= 1e-7
        assert sol.objective <= full.objective + 1e-9 <= sol.bound + 2e-9

    def test_soft_time_limit_waits_for_an_incumbent(self):
        model = Model()
        xs = [model.add_binary() for _ in range(3)]
        model.add_constr({x: 2.0 for x in xs}, "==", 2.0)
        model.set_objective({x: 1.0 for x in xs})
        sol = solve_mip(model, soft_time_limit=0.0)
        assert np.isfinite(sol.objective)
        assert model.max_violation(sol.x) <= 1e-7

    def test_lazy_rows_are_enforced(self):
        model = Model("max")
        xs = [model.add_binary() for _ in range(4)]
        model.set_objective({x: 1.0 for x in xs})
        calls = []

        def lazy(x):
            calls.append(x.copy())
            if x[xs[0]] + x[xs[1]] > 1.5:
                return [({xs[0]: 1.0, xs[1]: 1.0}, "<=", 1.0)]
            return []

        sol = solve_mip(model, lazy=lazy)
        assert sol.status is Status.OPTIMAL and sol.objective == 3.0
        assert sol.cuts_added == 1 and calls

    def test_start_is_used_as_incumbent(self, rng):
        model = random_binary_model(rng, 10, 2)
        ref = solve_mip(model, gap=0.0)
        warm = solve_mip(model, gap=0.0, start=ref.x)
        assert warm.objective == ref.objective
        assert warm.nodes <= ref.nodes

    def test_backend_interface(self):
        model = Model("max")
        a = model.add_binary()
        model.set_objective({a: 2.0})
        backend = KernelBackend()
        assert backend.solve_mip(model).objective == 2.0
        assert backend.solve_lp(model).objective == 2.0


class TestMcCormick:
    def _forced(self, xi, xj):
        model = Model()
        a, b = model.add_binary(), model.add_binary()
        model.set_bounds(a, xi, xi)
        model.set_bounds(b, xj, xj)
        w = linearize_binary_products(model, [(a, b)])[(a, b)]
        lo = Model.copy(model)
        lo.set_objective({w: 1.0})
        hi = Model.copy(model)
        hi.set_objective({w: 1.0}, direction="max")
        return solve_lp(lo).objective, solve_lp(hi).objective

    def test_product_is_forced(self):
        assert self._forced(1, 1) == (1.0, 1.0)
        assert self._forced(1, 0) == (0.0, 0.0)
        assert self._forced(0, 0) == (0.0, 0.0)

    def test_diagonal_maps_to_variable(self):
        model = Model()
        a = model.add_binary()
        assert linearize_binary_products(model, [(a, a)]) == {(a, a): a}
        assert model.num_vars == 1

    @pytest.mark.parametrize("direction", ["min", "max"])
    def test_one_sided_products_keep_the_optimum(self, rng, direction):
        for _ in range(10):
            n = 6
            B = rng.uniform(-1, 1, size=(n, n))
            Q = B.T @ B * rng.choice([-1.0, 1.0], size=(n, n))
            h = rng.uniform(-3, 3, size=n)
            values = []
            for sided in (None, direction):
                model = Model(direction)
                xs = [model.add_binary() for _ in range(n)]
                coeffs, _ = quadratic_objective_terms(model, Q, h, xs, direction=sided)
                model.set_objective(coeffs)
                values.append((solve_mip(model, gap=0.0).objective, len(model.constraints)))
            assert values[1][0] == pytest.approx(values[0][0], abs=1e-9)
            assert values[1][1] < values[0][1]

    def test_unknown_product_side(self):
        model = Model()
        a, b = model.add_binary(), model.add_binary()
        with pytest.raises(ModelingError):
            linearize_binary_products(model, [(a, b)], {(a, b): "middle"})

    def test_non_binary_rejected(self):
        model = Model()
        a = model.add_binary()
        y = model.add_var(0, 2)
        with pytest.raises(ModelingError):
            linearize_binary_products(model, [(a, y)])

    def test_quadratic_minimum_matches_brute_force(self, rng):
        for _ in range(10):
            n = 6
            B = rng.uniform(-1, 1, size=(n, n))
            Q = B.T @ B
            h = rng.uniform(-3, 3, size=n)
            model = Model()
            xs = [model.add_binary() for _ in range(n)]
            coeffs, _ = quadratic_objective_terms(model, Q, h, xs)
            model.set_objective(coeffs)
            best = min(float(np.array(p) @ Q @ np.array(p) + h @ np.array(p))
                       for p in itertools.product((0, 1), repeat=n))
            assert solve_mip(model, gap=0.0).objective == pytest.approx(best, abs=1e-9)


class TestPresolve:
    def test_fixed_input_settles_big_m_indicator(self):
        # z = max(a, 0) with a = 2x - 1 and indicator d; x fixed decides d
        for x_val, want in ((1.0, 1.0), (0.0, 0.0)):
            model = Model()
            x = model.add_var(x_val, x_val, integer=True)
            z = model.add_var(0.0, 5.0)
            d = model.add_binary()
            model.add_constr({z: 1.0, x: -2.0}, ">=", -1.0)
            model.add_constr({z: 1.0, x: -2.0, d: 5.0}, "<=", 4.0)
            model.add_constr({z: 1.0, d: -5.0}, "<=", 0.0)
            A, lo, hi, _, lb, ub, mask = model.dense()
            lb, ub, ok = propagate_bounds(A, lo, hi, lb, ub, mask)
            assert ok and lb[d] == ub[d] == want
            assert solve_mip(model).nodes == 1

    def test_detects_infeasibility(self):
        model = Model()
        xs = [model.add_binary() for _ in range(3)]
        model.add_constr({x: 1.0 for x in xs}, ">=", 4.0)
        A, lo, hi, _, lb, ub, mask = model.dense()
        assert not propagate_bounds(A, lo, hi, lb, ub, mask)[2]
        sol = solve_mip(model)
        assert sol.status is Status.INFEASIBLE and "presolve-infeasible" in sol.flags

    def test_unbounded_columns_stay_unbounded(self):
        model = Model()
        x = model.add_var(0.0, math.inf)
        y = model.add_var(-math.inf, math.inf)
        model.add_constr({x: 1.0, y: 1.0}, "<=", 3.0)
        A, lo, hi, _, lb, ub, mask = model.dense()
        lb, ub, ok = propagate_bounds(A, lo, hi, lb, ub, mask)
        assert ok and ub[x] == math.inf and lb[y] == -math.inf

    @settings(max_examples=60)
    @given(st.integers(0, 10**6))
    def test_never_cuts_off_feasible_integer_points(self, seed):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        model = Model()
        xs = [model.add_var(0, int(rng.integers(1, 4)), integer=True) for _ in range(n)]
        A = rng.integers(-4, 5, size=(m, n)).astype(float)
        b = rng.integers(-2, 9, size=m).astype(float)
        for i in range(m):
            model.add_constr({xs[j]: A[i, j] for j in range(n)}, ("<=", ">=", "=")[i % 3], b[i])
        Ad, lo, hi, _, lb0, ub0, mask = model.dense()
        lb, ub, ok = propagate_bounds(Ad, lo, hi, lb0, ub0, mask)
        grid = itertools.product(*[range(int(u) + 1) for u in ub0])
        feasible = [p for p in grid if model.max_violation(np.array(p, float)) <= 1e-9]
        if not ok:
            assert feasible == []
        for p in feasible:
            assert np.all(lb <= np.array(p)) and np.all(np.array(p) <= ub)

    def test_presolve_switch_keeps_the_optimum(self, rng):
        for _ in range(20):
            model = random_binary_model(rng, 8, 5)
            on, off = solve_mip(model, presolve=True), solve_mip(model, presolve=False)
            assert on.status is off.status
            if on.status is Status.OPTIMAL:
                assert on.objective == pytest.approx(off.objective, abs=1e-9)
