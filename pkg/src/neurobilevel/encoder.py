"""Embedding value networks in MILP models: big-M ReLU rows and supermodular cuts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .milp import MipParams, MipSolution, Model, solve_mip
from .valuenet import ISNN, ValueNet

CUT_TOL = 1e-6


@dataclass
class NeuronBounds:
    """Interval bounds on pre-activations per hidden layer, plus the raw output."""

    lower: list[np.ndarray]
    upper: list[np.ndarray]
    out_lower: float
    out_upper: float

    def big_m(self, k: int) -> np.ndarray:
        return np.maximum(np.maximum(self.upper[k], -self.lower[k]), 1.0)


def _interval(W, lo, hi):
    Wp, Wn = np.maximum(W, 0.0), np.minimum(W, 0.0)
    return Wp @ lo + Wn @ hi, Wp @ hi + Wn @ lo


def activation_bounds(net: ValueNet) -> NeuronBounds:
    """Interval propagation over the input box ``[0, 1]^input_dim``."""
    d = net.input_dim
    x_lo, x_hi = np.zeros(d), np.ones(d)
    lowers, uppers = [], []
    z_lo = z_hi = None
    for k, layer in enumerate(net.hidden):
        if k == 0:
            lo, hi = _interval(layer.W, x_lo, x_hi)
        else:
            lo, hi = _interval(layer.W, z_lo, z_hi)
            dlo, dhi = _interval(layer.D, x_lo, x_hi)
            lo, hi = lo + dlo, hi + dhi
        lo, hi = lo + layer.b, hi + layer.b
        lowers.append(lo)
        uppers.append(hi)
        z_lo, z_hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
    out_lo, out_hi = _interval(net.out_d[None, :], x_lo, x_hi)
    if net.hidden:
        wlo, whi = _interval(net.out_w[None, :], z_lo, z_hi)
        out_lo, out_hi = out_lo + wlo, out_hi + whi
    return NeuronBounds(lowers, uppers, float(out_lo[0]) + net.out_b, float(out_hi[0]) + net.out_b)


@dataclass
class Embedding:
    """Variable handles created by :func:`embed_bigm` (indices into the model)."""

    phi: int
    xt: list[int]
    pre: list[list[int]]
    post: list[list[int]]
    delta: list[list[int]]
    bounds: NeuronBounds

    def completion(self, net: ValueNet, x) -> dict[int, float]:
        """Values of every added variable consistent with tender ``x``."""
        x = np.asarray(x, dtype=float)
        xt = net.transform(x)
        vals = {v: float(xt[i]) for i, v in enumerate(self.xt[net.n:], start=net.n)}
        pre = net.preactivations(xt) if net.hidden else []
        for k, a in enumerate(pre):
            a = a[0]
            for i in range(len(a)):
                vals[self.pre[k][i]] = float(a[i])
                vals[self.post[k][i]] = float(max(a[i], 0.0))
                lo, hi = self.bounds.lower[k][i], self.bounds.upper[k][i]
                on = a[i] > 0 or (lo >= 0 and hi > 0)
                vals[self.delta[k][i]] = 1.0 if on else 0.0
        vals[self.phi] = float(net.forward(x))
        return vals


def embed_bigm(model: Model, net: ValueNet, x_vars, prefix: str = "nn") -> tuple[int, Embedding]:
    """Add rows making a new variable equal the network value at binary ``x_vars``.

    Each neuron gets a pre-activation ``z'``, an activation ``z`` and a binary
    ``delta`` with ``0 <= z <= M delta`` and ``z' <= z <= z' + M (1 - delta)``.
    Neurons whose interval is one-signed get ``delta`` fixed by its bounds.
    """
    x_vars = list(x_vars)
    if len(x_vars) != net.n:
        raise ValueError(f"network expects {net.n} tender variables, got {len(x_vars)}")
    bounds = activation_bounds(net)
    xt = list(x_vars)
    if net.kind == ISNN:
        for i, xi in enumerate(x_vars):
            v = model.add_var(0.0, 1.0, name=f"{prefix}_xc{i}")
            model.add_constr({v: 1.0, xi: 1.0}, "=", 1.0, name=f"{prefix}_link{i}")
            xt.append(v)
    pre, post, delta = [], [], []
    prev: list[int] = []
    for k, layer in enumerate(net.hidden):
        M = bounds.big_m(k)
        lo, hi = bounds.lower[k], bounds.upper[k]
        zp_k, z_k, d_k = [], [], []
        for i in range(layer.width):
            tag = f"{prefix}_{k + 1}_{i}"
            zp = model.add_var(float(lo[i]), float(hi[i]), name=f"{tag}_pre")
            z = model.add_var(0.0, float(max(hi[i], 0.0)), name=f"{tag}_act")
            # a neuron that never activates is off, even when its interval is [0, 0]
            du = 0.0 if hi[i] <= 0.0 else 1.0
            dl = 1.0 if lo[i] >= 0.0 and du > 0.0 else 0.0
            dv = model.add_var(dl, du, integer=True, name=f"{tag}_on")
            row = {zp: 1.0}
            src = xt if k == 0 else prev
            for j, w in enumerate(layer.W[i]):
                if w != 0.0:
                    row[src[j]] = row.get(src[j], 0.0) - w
            if k > 0:
                for j, w in enumerate(layer.D[i]):
                    if w != 0.0:
                        row[xt[j]] = row.get(xt[j], 0.0) - w
            model.add_constr(row, "=", float(layer.b[i]), name=f"{tag}_def")
            m = float(M[i])
            model.add_constr({z: 1.0}, ">=", 0.0, name=f"{tag}_nonneg")
            model.add_constr({z: 1.0, dv: -m}, "<=", 0.0, name=f"{tag}_off")
            model.add_constr({z: 1.0, zp: -1.0}, ">=", 0.0, name=f"{tag}_above")
            model.add_constr({z: 1.0, zp: -1.0, dv: m}, "<=", m, name=f"{tag}_on_cap")
            zp_k.append(zp)
            z_k.append(z)
            d_k.append(dv)
        pre.append(zp_k)
        post.append(z_k)
        delta.append(d_k)
        prev = z_k
    s, t = net.scale, net.shift
    phi = model.add_var(s * bounds.out_lower + t, s * bounds.out_upper + t, name=f"{prefix}_phi")
    row = {phi: 1.0}
    for j, w in enumerate(net.out_w):
        if w != 0.0:
            row[prev[j]] = row.get(prev[j], 0.0) - s * w
    for j, w in enumerate(net.out_d):
        if w != 0.0:
            row[xt[j]] = row.get(xt[j], 0.0) - s * w
    model.add_constr(row, "=", s * net.out_b + t, name=f"{prefix}_out")
    return phi, Embedding(phi, xt, pre, post, delta, bounds)


# -- supermodular cuts ----------------------------------------------------------


def _require_isnn(net: ValueNet) -> None:
    if net.kind != ISNN:
        raise ValueError("supermodular cuts need an ISNN")


def _indicator(net: ValueNet, S) -> np.ndarray:
    v = np.zeros(net.input_dim)
    idx = list(S)
    if idx and (min(idx) < 0 or max(idx) >= net.input_dim):
        raise ValueError(f"set element outside the ground set of size {net.input_dim}")
    v[idx] = 1.0
    return v


def set_function_eval(net: ValueNet, S) -> float:
    """Raw network output at the indicator vector of ``S`` (a subset of range(2n))."""
    _require_isnn(net)
    return float(net.raw(_indicator(net, S)))


def rho(net: ValueNet, S, k: int) -> float:
    """Marginal value of adding ``k`` to ``S``."""
    _require_isnn(net)
    S = set(S)
    if k in S:
        raise ValueError(f"element {k} already in the set")
    return set_function_eval(net, S | {k}) - set_function_eval(net, S)


@dataclass(frozen=True)
class SupermodularCut:
    """``g >= scale * (const + coef . xt) + shift``, valid on the whole lattice of ``xt``.

    With base set ``S`` the raw right-hand side is
    ``phi(S) - sum_{k in S} rho(V-k, k)(1 - xt_k) + sum_{k not in S} rho(S, k) xt_k``.
    """

    n: int
    S: frozenset
    phi_S: float
    coef: np.ndarray
    const: float
    scale: float = 1.0
    shift: float = 0.0

    def rhs(self, xt) -> float:
        return self.scale * (self.const + float(self.coef @ np.asarray(xt, float))) + self.shift

    def violation(self, lhs_value: float, xt) -> float:
        return self.rhs(xt) - lhs_value

    def realize(self, g_coeffs: dict, x_vars=None, xt_vars=None) -> tuple[dict, str, float]:
        """Row ``(coeffs, '>=', rhs)`` over the ``g`` variables and either ``xt`` or ``x``.

        With ``x_vars`` the complement half is substituted as ``xt_{n+i} = 1 - x_i``.
        """
        coeffs = dict(g_coeffs)
        rhs = self.scale * self.const + self.shift
        if xt_vars is not None:
            for k, v in enumerate(xt_vars):
                coeffs[v] = coeffs.get(v, 0.0) - self.scale * self.coef[k]
        elif x_vars is not None:
            n = self.n
            rhs += self.scale * float(self.coef[n:].sum())
            for i, v in enumerate(x_vars):
                coeffs[v] = coeffs.get(v, 0.0) - self.scale * (self.coef[i] - self.coef[n + i])
        else:
            raise ValueError("need x_vars or xt_vars")
        return coeffs, ">=", rhs


def supermodular_cut(net: ValueNet, S) -> SupermodularCut:
    """The cut of the family with base set ``S``."""
    _require_isnn(net)
    d = net.input_dim
    S = frozenset(int(k) for k in S)
    base = _indicator(net, S)
    full = np.ones(d)
    pts = [base, full]
    for k in range(d):
        p = (full if k in S else base).copy()
        p[k] = 1.0 - p[k]
        pts.append(p)
    vals = net.raw(np.array(pts))
    phi_S, phi_V = float(vals[0]), float(vals[1])
    coef = np.empty(d)
    for k in range(d):
        coef[k] = phi_V - vals[2 + k] if k in S else vals[2 + k] - phi_S
    const = phi_S - sum(coef[k] for k in S)
    return SupermodularCut(net.n, S, phi_S, coef, const, net.scale, net.shift)


def separate_cut(net: ValueNet, x_hat, lhs_value: float, tol: float = CUT_TOL) -> SupermodularCut | None:
    """Most violated cut at binary ``x_hat``: the one based at ``S(xt_hat)``, if violated."""
    _require_isnn(net)
    xt = net.transform(np.round(np.asarray(x_hat, float)))
    cut = supermodular_cut(net, np.nonzero(xt > 0.5)[0])
    if lhs_value < cut.rhs(xt) - tol:
        return cut
    return None


def lazy_cut_solve(base_model: Model, net: ValueNet, x_vars, g_expr: dict,
                   params: MipParams | None = None, tol: float = CUT_TOL, start=None) -> MipSolution:
    """Solve ``base_model`` with ``g >= net(x)`` enforced by cuts added at candidate incumbents.

    ``g_expr`` maps variable indices to coefficients of ``g``. Every candidate
    integer point is separated; violated cuts enter the model globally and the
    node is re-solved. Hitting ``params.cut_limit`` ends with ``IterationLimit``
    and the flag ``possibly-infeasible`` on the last incumbent.
    """
    _require_isnn(net)
    x_vars = list(x_vars)

    def lazy(point):
        lhs = sum(a * point[v] for v, a in g_expr.items())
        cut = separate_cut(net, point[x_vars], lhs, tol)
        if cut is None:
            return []
        return [cut.realize(g_expr, x_vars=x_vars)]

    return solve_mip(base_model, params, lazy=lazy, start=start)
