"""Lattice supermodularity check and a Lipschitz bound for value networks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import ValueNet

SUPERMODULAR_GUARD = 14


@dataclass(frozen=True)
class SupermodularityResult:
    holds: bool
    witness: tuple | None = None  # (a, b) with f(a) + f(b) > f(a | b) + f(a & b)

    def __bool__(self) -> bool:
        return self.holds


def lattice_points(d: int) -> np.ndarray:
    idx = np.arange(2 ** d)
    return ((idx[:, None] >> np.arange(d - 1, -1, -1)) & 1).astype(float)


def check_supermodular(net: ValueNet, tol: float | None = None) -> SupermodularityResult:
    """Exhaustive check of ``f(a) + f(b) <= f(a|b) + f(a&b)`` for the raw output on ``{0,1}^d``.

    On a product of chains this is equivalent to nonnegative second differences
    ``f(x+e_i+e_j) - f(x+e_i) - f(x+e_j) + f(x) >= 0``, which is what is scanned;
    a failing square yields the witness ``(x+e_i, x+e_j)``.
    """
    d = net.input_dim
    if d > SUPERMODULAR_GUARD:
        raise ValueError(f"supermodularity check refused for input_dim={d} > {SUPERMODULAR_GUARD}")
    pts = lattice_points(d)
    f = net.raw(pts)
    if tol is None:
        tol = 1e-9 * (1.0 + float(np.max(np.abs(f))))
    idx = np.arange(2 ** d)
    for i in range(d):
        bi = 1 << (d - 1 - i)
        for j in range(i + 1, d):
            bj = 1 << (d - 1 - j)
            base = idx[(idx & bi == 0) & (idx & bj == 0)]
            second = f[base | bi | bj] - f[base | bi] - f[base | bj] + f[base]
            bad = np.nonzero(second < -tol)[0]
            if bad.size:
                x = base[bad[0]]
                a = tuple(int(v) for v in pts[x | bi])
                b = tuple(int(v) for v in pts[x | bj])
                return SupermodularityResult(False, (a, b))
    return SupermodularityResult(True)


def spectral_norm(M, tol: float = 1e-8, max_iter: int = 10000) -> float:
    """Largest singular value by power iteration on ``M'M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0 or not np.any(M):
        return 0.0
    G = M.T @ M
    v = np.ones(G.shape[0]) + np.linspace(0.0, 1e-3, G.shape[0])
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(max_iter):
        w = G @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # start vector in the null space; restart from a column of G
            w = G[:, int(np.argmax(np.abs(G).sum(axis=0)))].copy()
            norm = np.linalg.norm(w)
        v = w / norm
        if abs(norm - sigma2) <= tol * max(norm, 1e-300):
            sigma2 = norm
            break
        sigma2 = norm
    return float(np.sqrt(sigma2))


def lipschitz_bound(net: ValueNet) -> float:
    """``prod_k |W_k| + sum_{k>=2} |D_k| prod_{l>k} |W_l|`` in label units (2-norms)."""
    Ws = [layer.W for layer in net.hidden] + [net.out_w[None, :]]
    Ds = [layer.D for layer in net.hidden[1:]] + [net.out_d[None, :]]
    if not net.hidden:
        return net.scale * spectral_norm(net.out_d[None, :])
    w_norms = [spectral_norm(W) for W in Ws]
    total = float(np.prod(w_norms))
    for k, D in enumerate(Ds, start=1):
        total += spectral_norm(D) * float(np.prod(w_norms[k + 1:]))
    return net.scale * total
