"""Exact linearisation of products of binary variables."""

from __future__ import annotations

from .model import Model, ModelingError


def _is_binary(model: Model, var: int) -> bool:
    v = model.variables[var]
    return v.integer and v.lb >= 0.0 and v.ub <= 1.0


def linearize_binary_products(model: Model, pairs, sides: dict | None = None) -> dict[tuple[int, int], int]:
    """Add ``w_ij = x_i * x_j`` for each pair via the three McCormick rows.

    Pairs with ``i == j`` map back to ``x_i`` itself since ``x_i**2 == x_i``.
    ``sides`` may map a sorted pair to ``"lower"`` (only ``w >= x_i + x_j - 1``)
    or ``"upper"`` (only ``w <= x_i``, ``w <= x_j``). A one-sided product is
    exact only where the objective pushes ``w`` against that side.
    """
    sides = sides or {}
    out: dict[tuple[int, int], int] = {}
    for i, j in pairs:
        for var in (i, j):
            if not 0 <= var < model.num_vars:
                raise ModelingError(f"undeclared variable {var!r}")
            if not _is_binary(model, var):
                raise ModelingError(f"variable {model.variables[var].name} is not binary")
        key = (min(i, j), max(i, j))
        if key in out:
            continue
        if i == j:
            out[key] = i
            continue
        a, b = key
        w = model.add_var(0.0, 1.0, name=f"w_{model.variables[a].name}_{model.variables[b].name}")
        side = sides.get(key, "both")
        if side not in ("both", "lower", "upper"):
            raise ModelingError(f"unknown product side {side!r}")
        if side != "lower":
            model.add_constr({w: 1.0, a: -1.0}, "<=", 0.0)
            model.add_constr({w: 1.0, b: -1.0}, "<=", 0.0)
        if side != "upper":
            model.add_constr({w: 1.0, a: -1.0, b: -1.0}, ">=", -1.0)
        out[key] = w
    return out


def quadratic_objective_terms(model: Model, Q, h, x_vars, direction: str | None = None) -> tuple[dict[int, float], dict]:
    """Linear objective coefficients for ``x'Qx + h'x`` over binary ``x_vars``.

    With ``direction`` set, each product keeps only the McCormick side the
    objective pushes against, which halves the rows without changing the
    optimum. Without it all three rows are added.
    """
    n = len(x_vars)
    pairs, sides = [], {}
    for i in range(n):
        for j in range(i + 1, n):
            q = Q[i][j] + Q[j][i]
            if q == 0.0:
                continue
            pairs.append((x_vars[i], x_vars[j]))
            if direction is not None:
                lower = (q > 0.0) == (direction == "min")
                sides[(min(x_vars[i], x_vars[j]), max(x_vars[i], x_vars[j]))] = "lower" if lower else "upper"
    prods = linearize_binary_products(model, pairs, sides)
    coeffs: dict[int, float] = {}
    for i in range(n):
        coeffs[x_vars[i]] = coeffs.get(x_vars[i], 0.0) + float(Q[i][i]) + float(h[i])
    for i in range(n):
        for j in range(i + 1, n):
            q = float(Q[i][j]) + float(Q[j][i])
            if q != 0.0:
                w = prods[(min(x_vars[i], x_vars[j]), max(x_vars[i], x_vars[j]))]
                coeffs[w] = coeffs.get(w, 0.0) + q
    return coeffs, prods
