"""Full-batch Adam training with an optional nonnegativity projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .net import ISNN, Layer, ValueNet, parse_kind
from .sizing import Architecture


@dataclass
class TrainConfig:
    epochs: int = 1000
    lr: float = 1e-3
    decay: float = 1e-3  # inverse-time schedule: lr / (1 + decay * epoch)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    # least-squares refit of the unconstrained output blocks after the Adam epochs
    polish: bool = True


def init_net(arch: Architecture, rng: np.random.Generator) -> ValueNet:
    """Uniform init on ``[-r, r]`` with ``r = 1/sqrt(fan_in)``.

    For ISNN the sign-constrained blocks start at the absolute value, and the
    hidden-to-hidden and output weights are fixed at one.
    """
    kind = parse_kind(arch.kind)
    isnn = kind == ISNN
    d = arch.n if not isnn else 2 * arch.n
    hidden = []
    prev = d
    for k, w in enumerate(arch.widths):
        fan = prev if k == 0 else prev + d
        r = 1.0 / np.sqrt(fan)
        W = rng.uniform(-r, r, size=(w, prev))
        b = rng.uniform(-r, r, size=w)
        D = None if k == 0 else rng.uniform(-r, r, size=(w, d))
        if isnn:
            if k == 0:
                W = np.abs(W)
            else:
                W = np.ones((w, prev))
                D = np.abs(D)
        hidden.append(Layer(W, b, D))
        prev = w
    fan = (prev if arch.widths else 0) + d
    r = 1.0 / np.sqrt(fan)
    out_w = rng.uniform(-r, r, size=prev) if arch.widths else np.zeros(0)
    if isnn:
        out_w = np.ones(len(out_w))
    out_b = float(rng.uniform(-r, r))
    out_d = rng.uniform(-r, r, size=d)
    return ValueNet(kind, arch.n, hidden, out_w, out_b, out_d)


def _params(net: ValueNet) -> list[tuple[str, int | None, np.ndarray]]:
    """Trainable arrays as (block, layer, array); arrays are updated in place."""
    isnn = net.kind == ISNN
    out = []
    for k, layer in enumerate(net.hidden):
        if k == 0 or not isnn:
            out.append(("W", k, layer.W))
        out.append(("b", k, layer.b))
        if k > 0:
            out.append(("D", k, layer.D))
    if not isnn and net.out_w.size:
        out.append(("ow", None, net.out_w))
    out.append(("ob", None, np.array([net.out_b])))
    out.append(("od", None, net.out_d))
    return out


def _forward_cache(net: ValueNet, xt: np.ndarray):
    zs, masks = [], []
    z = None
    for k, layer in enumerate(net.hidden):
        a = (xt @ layer.W.T if k == 0 else z @ layer.W.T + xt @ layer.D.T) + layer.b
        masks.append(a > 0)
        z = np.maximum(a, 0.0)
        zs.append(z)
    out = xt @ net.out_d + net.out_b
    if zs:
        out = out + zs[-1] @ net.out_w
    return out, zs, masks


def _gradients(net: ValueNet, xt: np.ndarray, t: np.ndarray):
    out, zs, masks = _forward_cache(net, xt)
    resid = out - t
    loss = float(np.mean(resid ** 2))
    g = 2.0 * resid / len(t)
    grads = {("ob", None): np.array([g.sum()]), ("od", None): xt.T @ g}
    if not net.hidden:
        return loss, grads
    grads[("ow", None)] = zs[-1].T @ g
    gz = np.outer(g, net.out_w)
    for k in range(net.depth - 1, -1, -1):
        ga = gz * masks[k]
        below = xt if k == 0 else zs[k - 1]
        grads[("W", k)] = ga.T @ below
        grads[("b", k)] = ga.sum(axis=0)
        if k > 0:
            grads[("D", k)] = ga.T @ xt
            gz = ga @ net.hidden[k].W
    return loss, grads


def project_isnn(net: ValueNet) -> None:
    """Clamp the sign-constrained ISNN blocks at zero, in place."""
    for k, layer in enumerate(net.hidden):
        np.maximum(layer.W, 0.0, out=layer.W)
        if k > 0:
            np.maximum(layer.D, 0.0, out=layer.D)
    np.maximum(net.out_w, 0.0, out=net.out_w)


def _polish(net: ValueNet, xt: np.ndarray, t: np.ndarray) -> None:
    z = np.maximum(net.preactivations(xt)[-1], 0.0) if net.hidden else np.zeros((len(t), 0))
    ones = np.ones((len(t), 1))
    if net.kind == ISNN:
        target = t - z.sum(axis=1)
        theta = np.linalg.lstsq(np.hstack([ones, xt]), target, rcond=None)[0]
        net.out_b, net.out_d[:] = float(theta[0]), theta[1:]
    else:
        theta = np.linalg.lstsq(np.hstack([z, ones, xt]), t, rcond=None)[0]
        w = z.shape[1]
        net.out_w[:] = theta[:w]
        net.out_b, net.out_d[:] = float(theta[w]), theta[w + 1:]


def train(arch: Architecture, X, labels, config: TrainConfig | None = None,
          on_step: Optional[Callable[[int, ValueNet], None]] = None) -> ValueNet:
    """Fit a network of the given architecture to ``labels`` at tenders ``X``.

    Labels are z-scored for training; the returned net maps back to label units.
    ``on_step(epoch, net)`` is called after every update (and projection).
    The final mean squared error in label units is stored in ``net.info``.
    """
    cfg = config or TrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[1] != arch.n or len(y) != len(X):
        raise ValueError("samples must be an (N, n) array with N labels")
    if len(y) < 2:
        raise ValueError("training needs at least 2 samples to standardise labels")
    rng = np.random.default_rng(cfg.seed)
    net = init_net(arch, rng)
    shift = float(y.mean())
    spread = float(y.std())
    scale = spread if spread > 1e-12 * max(1.0, abs(shift)) else 1.0
    t = (y - shift) / scale
    xt = net.transform(X)
    params = _params(net)
    m = [np.zeros_like(p) for _, _, p in params]
    v = [np.zeros_like(p) for _, _, p in params]
    isnn = net.kind == ISNN
    b1, b2 = cfg.beta1, cfg.beta2
    for epoch in range(cfg.epochs):
        _, grads = _gradients(net, xt, t)
        lr = cfg.lr / (1.0 + cfg.decay * epoch)
        step = epoch + 1
        for i, (block, k, p) in enumerate(params):
            g = grads[(block, k)]
            m[i] = b1 * m[i] + (1 - b1) * g
            v[i] = b2 * v[i] + (1 - b2) * g * g
            mhat = m[i] / (1 - b1 ** step)
            vhat = v[i] / (1 - b2 ** step)
            p -= lr * mhat / (np.sqrt(vhat) + cfg.eps)
        net.out_b = float(params[-2][2][0])
        if isnn:
            project_isnn(net)
        if on_step is not None:
            on_step(epoch, net)
    if cfg.polish:
        _polish(net, xt, t)
    net.scale, net.shift = scale, shift
    net.info["train_mse"] = float(np.mean((net.forward(X) - y) ** 2))
    return net
