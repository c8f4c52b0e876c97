"""ReLU networks with input passthrough, in label units via a positive affine map."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GNN = "GNN"
ISNN = "ISNN"
KINDS = (GNN, ISNN)


def parse_kind(kind: str) -> str:
    k = str(kind).upper()
    if k not in KINDS:
        raise ValueError(f"unknown network kind {kind!r}")
    return k


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    D: np.ndarray | None = None  # passthrough from the network input; absent on layer 1

    @property
    def width(self) -> int:
        return self.b.shape[0]


@dataclass
class ValueNet:
    """``z1 = relu(W1 xt + b1)``, ``zk = relu(Wk z_{k-1} + bk + Dk xt)``,
    ``out = w z_K + b + d xt``; the value in label units is ``scale * out + shift``.

    ``xt`` is ``x`` for GNN and ``[x; 1 - x]`` for ISNN.
    """

    kind: str
    n: int
    hidden: list[Layer]
    out_w: np.ndarray
    out_b: float
    out_d: np.ndarray
    scale: float = 1.0
    shift: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = parse_kind(self.kind)
        if self.scale <= 0:
            raise ValueError("label scale must be positive")
        d = self.input_dim
        prev = d
        for k, layer in enumerate(self.hidden):
            if layer.W.shape != (layer.width, prev):
                raise ValueError(f"layer {k + 1}: W has shape {layer.W.shape}, expected {(layer.width, prev)}")
            if k > 0 and (layer.D is None or layer.D.shape != (layer.width, d)):
                raise ValueError(f"layer {k + 1}: passthrough D must have shape {(layer.width, d)}")
            prev = layer.width
        if self.out_w.shape != ((prev,) if self.hidden else (0,)):
            raise ValueError(f"output weights have shape {self.out_w.shape}")
        if self.out_d.shape != (d,):
            raise ValueError(f"output passthrough has shape {self.out_d.shape}, expected {(d,)}")

    @property
    def input_dim(self) -> int:
        return self.n if self.kind == GNN else 2 * self.n

    @property
    def depth(self) -> int:
        return len(self.hidden)

    @property
    def widths(self) -> tuple:
        return tuple(layer.width for layer in self.hidden)

    @property
    def n_neurons(self) -> int:
        return sum(self.widths)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected tender of length {self.n}, got shape {x.shape}")
        if self.kind == GNN:
            return x
        return np.concatenate([x, 1.0 - x], axis=-1)

    def preactivations(self, xt) -> list[np.ndarray]:
        """Pre-activation values of every hidden layer for a batch of network inputs."""
        xt = np.atleast_2d(np.asarray(xt, dtype=float))
        pre = []
        z = None
        for k, layer in enumerate(self.hidden):
            a = (xt @ layer.W.T if k == 0 else z @ layer.W.T + xt @ layer.D.T) + layer.b
            pre.append(a)
            z = np.maximum(a, 0.0)
        return pre

    def raw(self, xt) -> np.ndarray:
        """Network output before the label map, for a batch (or single) input ``xt``."""
        xt = np.asarray(xt, dtype=float)
        single = xt.ndim == 1
        xt2 = np.atleast_2d(xt)
        if xt2.shape[1] != self.input_dim:
            raise ValueError(f"expected network input of length {self.input_dim}, got {xt2.shape[1]}")
        out = xt2 @ self.out_d + self.out_b
        if self.hidden:
            z = np.maximum(self.preactivations(xt2)[-1], 0.0)
            out = out + z @ self.out_w
        return out[0] if single else out

    def forward(self, x):
        """Value in label units at tender ``x`` (or a batch of tenders)."""
        return self.scale * self.raw(self.transform(x)) + self.shift

    __call__ = forward

    def sign_violations(self) -> list[str]:
        """Blocks breaking the nonnegativity an ISNN needs (empty for valid ISNN)."""
        bad = []
        for k, layer in enumerate(self.hidden):
            if np.any(layer.W < 0):
                bad.append(f"W{k + 1}")
            if k > 0 and np.any(layer.D < 0):
                bad.append(f"D{k + 1}")
        if np.any(self.out_w < 0):
            bad.append(f"W{self.depth + 1}")
        return bad

    def copy(self) -> "ValueNet":
        return ValueNet.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "hidden": [
                {"W": l.W.tolist(), "b": l.b.tolist(), "D": None if l.D is None else l.D.tolist()}
                for l in self.hidden
            ],
            "out_w": self.out_w.tolist(),
            "out_b": self.out_b,
            "out_d": self.out_d.tolist(),
            "label_affine": {"scale": self.scale, "shift": self.shift},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ValueNet":
        d = 2 * doc["n"] if parse_kind(doc["kind"]) == ISNN else doc["n"]
        hidden = []
        prev = d
        for l in doc["hidden"]:
            b = np.array(l["b"], dtype=float)
            W = np.array(l["W"], dtype=float).reshape(b.shape[0], prev)
            D = None if l["D"] is None else np.array(l["D"], dtype=float).reshape(b.shape[0], d)
            hidden.append(Layer(W, b, D))
            prev = b.shape[0]
        return cls(doc["kind"], int(doc["n"]), hidden, np.array(doc["out_w"], dtype=float),
                   float(doc["out_b"]), np.array(doc["out_d"], dtype=float),
                   float(doc["label_affine"]["scale"]), float(doc["label_affine"]["shift"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ValueNet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def count_parameters(net: ValueNet) -> int:
    """Trainable parameters under the kind's parameterisation.

    GNN trains every weight. ISNN keeps hidden-to-hidden and output weights
    fixed at one, so each neuron carries only its input row and bias.
    """
    d = net.input_dim
    if net.kind == GNN:
        total = sum(l.W.size + l.b.size + (0 if l.D is None else l.D.size) for l in net.hidden)
        return total + net.out_w.size + 1 + net.out_d.size
    return (net.n_neurons + 1) * (d + 1)


def zero_net(kind: str, n: int, widths=(), constant: float = 0.0) -> ValueNet:
    kind = parse_kind(kind)
    d = n if kind == GNN else 2 * n
    hidden = []
    prev = d
    for k, w in enumerate(widths):
        hidden.append(Layer(np.zeros((w, prev)), np.zeros(w), None if k == 0 else np.zeros((w, d))))
        prev = w
    return ValueNet(kind, n, hidden, np.zeros(prev if widths else 0), float(constant), np.zeros(d))


def closed_form_gnn() -> ValueNet:
    """``x1 + x2 - 1 - 2 relu(x1 + x2 - 1)`` on two binary inputs."""
    layer = Layer(np.array([[1.0, 1.0]]), np.array([-1.0]))
    return ValueNet(GNN, 2, [layer], np.array([-2.0]), -1.0, np.array([1.0, 1.0]))


def closed_form_isnn() -> ValueNet:
    """``x1 + (1 - x2) - 2 + 2 relu((1 - x1) + x2 - 1)`` on ``[x1, x2, 1-x1, 1-x2]``."""
    layer = Layer(np.array([[0.0, 1.0, 1.0, 0.0]]), np.array([-1.0]))
    return ValueNet(ISNN, 2, [layer], np.array([2.0]), -2.0, np.array([1.0, 0.0, 0.0, 1.0]))
