"""Univariate sinusoidal MLPs f: R -> R^r with an adjustable activation frequency.

A net of depth d holds weight matrices H_1 (m x 1), hidden H_q (m x m), and
H_d (r x m); hidden layers apply sin(omega * z), the last layer is linear.
Biases are carried (zero-initialized) and can be disabled at construction.
Forward and backward are plain numpy; backward returns exact reverse-mode
gradients and is validated against finite differences in the test suite.
"""

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from .tensor_ops import ShapeError


@dataclass
class MlpGrads:
    """Parameter gradients, shape-congruent to a net's weights and biases."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def scale(self, c):
        return MlpGrads([c * w for w in self.weights], [c * b for b in self.biases])

    def add_(self, other):
        for a, b in zip(self.weights, other.weights):
            a += b
        for a, b in zip(self.biases, other.biases):
            a += b
        return self


@dataclass
class SirenMlp:
    weights: List[np.ndarray]  # H_1 .. H_d
    biases: List[np.ndarray]
    omega: float
    use_bias: bool = True

    @property
    def depth(self):
        return len(self.weights)

    @property
    def width(self):
        return self.weights[0].shape[0]

    @property
    def out_dim(self):
        return self.weights[-1].shape[0]

    def zero_grads(self) -> MlpGrads:
        return MlpGrads(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
        )

    def param_count(self):
        n = sum(w.size for w in self.weights)
        if self.use_bias:
            n += sum(b.size for b in self.biases)
        return n


def init_siren(depth, width, out_dim, omega, seed, use_bias=True) -> SirenMlp:
    """Deterministic init: first layer U[-1, 1] (fan_in 1), deeper layers
    U[-sqrt(6/fan_in)/omega, +sqrt(6/fan_in)/omega], biases zero."""
    if depth < 2:
        raise ValueError("depth must be >= 2")
    if width < 1 or out_dim < 1:
        raise ValueError("width and out_dim must be >= 1")
    if omega <= 0:
        raise ValueError("omega must be positive")
    rng = np.random.default_rng(seed)
    sizes = [(width, 1)] + [(width, width)] * (depth - 2) + [(out_dim, width)]
    weights = []
    for q, (rows, cols) in enumerate(sizes):
        if q == 0:
            bound = 1.0 / cols
        else:
            bound = np.sqrt(6.0 / cols) / omega
        weights.append(rng.uniform(-bound, bound, size=(rows, cols)))
    biases = [np.zeros(rows) for rows, _ in sizes]
    return SirenMlp(weights=weights, biases=biases, omega=float(omega), use_bias=use_bias)


def forward_with_cache(net: SirenMlp, coords):
    """Forward pass over a batch of scalar coordinates.

    Returns (output, cache) where output is (len(coords), out_dim) and cache
    holds the pre-activations needed by backward_batch.
    """
    x = np.asarray(coords, dtype=np.float64).reshape(-1, 1)
    pre = []  # pre-activation z_q per layer, shape (batch, layer_out)
    a = x
    for q, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T
        if net.use_bias:
            z = z + b
        pre.append(z)
        if q < net.depth - 1:
            a = np.sin(net.omega * z)
        else:
            a = z
    return a, (x, pre)


def forward_batch(net: SirenMlp, coords):
    out, _ = forward_with_cache(net, coords)
    return out


def backward_batch(net: SirenMlp, coords, upstream, cache=None) -> MlpGrads:
    """Gradients of sum(upstream * output) w.r.t. every weight and bias."""
    if cache is None:
        out, cache = forward_with_cache(net, coords)
    x, pre = cache
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (x.shape[0], net.out_dim):
        raise ShapeError(
            f"upstream shape {upstream.shape} != output shape {(x.shape[0], net.out_dim)}"
        )
    grads = net.zero_grads()
    delta = upstream  # d loss / d z_q, walking down from the top layer
    for q in range(net.depth - 1, -1, -1):
        a_prev = x if q == 0 else np.sin(net.omega * pre[q - 1])
        grads.weights[q][...] = delta.T @ a_prev
        if net.use_bias:
            grads.biases[q][...] = delta.sum(axis=0)
        if q > 0:
            da = delta @ net.weights[q]
            delta = da * (net.omega * np.cos(net.omega * pre[q - 1]))
    return grads


def set_omega(net: SirenMlp, new_omega) -> SirenMlp:
    """Replace the activation frequency; weights and biases are shared, not copied."""
    if new_omega <= 0:
        raise ValueError("omega must be positive")
    return replace(net, omega=float(new_omega))
