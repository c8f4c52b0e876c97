"""Networks that interpolate a complete value table on {0,1}^n."""

from __future__ import annotations

import itertools

import numpy as np

from .net import GNN, ISNN, Layer, ValueNet

GNN_FIT_GUARD = 12
ISNN_FIT_GUARD = 11


class IncompleteTableError(ValueError):
    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join("".join(map(str, p)) for p in self.missing[:8])
        more = "" if len(self.missing) <= 8 else f" (+{len(self.missing) - 8} more)"
        super().__init__(f"table misses {len(self.missing)} point(s): {shown}{more}")


def _table_array(table: dict, guard: int) -> tuple[int, np.ndarray]:
    if not table:
        raise ValueError("empty table")
    n = len(next(iter(table)))
    if n > guard:
        raise ValueError(f"exact fit refused for n={n} > {guard}")
    # index with the first coordinate as most significant bit
    values = np.empty(2 ** n)
    missing = []
    for idx, point in enumerate(itertools.product((0, 1), repeat=n)):
        v = table.get(point)
        if v is None:
            missing.append(point)
        else:
            values[idx] = float(v)
    if missing:
        raise IncompleteTableError(missing)
    return n, values


def multilinear_coefficients(values: np.ndarray, n: int) -> np.ndarray:
    """Coefficients ``a_T`` with ``phi(x) = sum_T a_T prod_{i in T} x_i`` (inverse zeta transform)."""
    a = values.astype(float).copy()
    for i in range(n):
        bit = 1 << (n - 1 - i)
        for idx in range(2 ** n):
            if idx & bit:
                a[idx] -= a[idx ^ bit]
    return a


def exact_fit_gnn(table: dict) -> ValueNet:
    """One hidden layer with a neuron ``relu(sum_{i in T} x_i - (|T| - 1))`` per subset ``|T| >= 2``.

    On binary inputs that neuron equals the monomial ``prod_{i in T} x_i``, so the
    multilinear expansion of the table is reproduced exactly; linear terms go
    through the passthrough and the constant into the output bias.
    """
    n, values = _table_array(table, GNN_FIT_GUARD)
    a = multilinear_coefficients(values, n)
    rows, biases, coefs = [], [], []
    out_d = np.zeros(n)
    for idx in sorted(range(2 ** n), key=lambda t: (bin(t).count("1"), -t)):
        members = [i for i in range(n) if idx & (1 << (n - 1 - i))]
        if len(members) == 1:
            out_d[members[0]] = a[idx]
        elif len(members) >= 2:
            w = np.zeros(n)
            w[members] = 1.0
            rows.append(w)
            biases.append(-(len(members) - 1.0))
            coefs.append(a[idx])
    hidden = [Layer(np.array(rows), np.array(biases))] if rows else []
    return ValueNet(GNN, n, hidden, np.array(coefs), float(a[0]), out_d)


def exact_fit_isnn(table: dict) -> ValueNet:
    """One neuron per tender ``z`` with weights ``[z; 1-z]`` and bias ``-(n-1)``.

    On linked inputs ``[x; 1-x]`` the neuron fires (with value 1) only at
    ``x = z``; output weights ``phi(z) - min phi`` are nonnegative.
    """
    n, values = _table_array(table, ISNN_FIT_GUARD)
    low = float(values.min())
    Z = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)
    W = np.hstack([Z, 1.0 - Z])
    layer = Layer(W, np.full(2 ** n, -(n - 1.0)))
    return ValueNet(ISNN, n, [layer], values - low, low, np.zeros(2 * n))
