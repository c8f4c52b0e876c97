"""Width rules that give a network at least as many trainables as samples."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .net import GNN, ISNN, parse_kind


@dataclass(frozen=True)
class Architecture:
    kind: str
    n: int
    widths: tuple
    n_params: int

    @property
    def n_neurons(self) -> int:
        return sum(self.widths)

    @property
    def depth(self) -> int:
        return len(self.widths)


def _even(k: int) -> int:
    return k + (k % 2)


def _split(n_nr: int) -> tuple:
    return () if n_nr == 0 else (n_nr // 2, n_nr // 2)


def gnn_params(n: int, widths: tuple) -> int:
    total, prev = 0, n
    for k, w in enumerate(widths):
        total += w * prev + w + (w * n if k > 0 else 0)
        prev = w
    return total + (prev if widths else 0) + 1 + n


def gnn_min_neurons(n_samples: int, n: int) -> int:
    """Smallest integer ``N`` with ``N >= sqrt((2n+2)^2 + 4 N_s + 1) - (2n + 3)``, at least 0."""
    disc = (2 * n + 2) ** 2 + 4 * n_samples + 1
    root = math.isqrt(disc)
    if root * root < disc:
        root += 1
    return max(root - (2 * n + 3), 0)


def size_gnn(n_samples: int, n: int) -> Architecture:
    """Two equal hidden layers with an even total width.

    With widths ``(N/2, N/2)`` the trainable count is
    ``N^2/4 + N/2 + (n+1)(N+1)``, which is at least ``n_samples``.
    """
    if n_samples < 1 or n < 1:
        raise ValueError("n_samples and n must be positive")
    n_nr = _even(gnn_min_neurons(n_samples, n))
    widths = _split(n_nr)
    return Architecture(GNN, n, widths, n_nr * n_nr // 4 + n_nr // 2 + (n + 1) * (n_nr + 1))


def size_isnn(n_samples: int, n: int) -> Architecture:
    """Two equal hidden layers holding ``ceil(N_s/(2n+1)) - 1`` neurons, rounded up to even.

    Each neuron contributes its input row and bias, ``(N+1)(2n+1)`` in total.
    """
    if n_samples < 1 or n < 1:
        raise ValueError("n_samples and n must be positive")
    bound = max(-(-n_samples // (2 * n + 1)) - 1, 0)
    n_nr = _even(bound)
    return Architecture(ISNN, n, _split(n_nr), (n_nr + 1) * (2 * n + 1))


def size_for(kind: str, n_samples: int, n: int) -> Architecture:
    return size_gnn(n_samples, n) if parse_kind(kind) == GNN else size_isnn(n_samples, n)
