"""Piecewise-linear feedforward network: layers, forward pass and input gradient.

A network is a chain of affine maps ``W x + b``. Every hidden layer is
followed by a ReLU, the last layer stays affine. Instances are immutable
(arrays are flagged read-only) so a single network can be shared between
the tree-search and gradient workers.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DimensionError, NetworkError


class Activation(str, Enum):
    """Activation applied after a layer's affine map"""
    RELU = "relu"
    LINEAR = "linear"


def _frozen(values, ndim: int, what: str, layer: int) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise DimensionError(f"{what} must be {ndim}-dimensional, got shape {array.shape}", layer=layer)
    if not np.all(np.isfinite(array)):
        raise NetworkError(f"layer {layer}: {what} contains non-finite values")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine map ``weights @ x + bias`` followed by ``activation``"""
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU
    index: int = field(default=0, compare=False)

    def __post_init__(self):
        weights = _frozen(self.weights, 2, "weights", self.index)
        bias = _frozen(self.bias, 1, "bias", self.index)
        if weights.shape[0] != bias.shape[0]:
            raise DimensionError(
                f"bias length {bias.shape[0]} does not match weight rows {weights.shape[0]}",
                layer=self.index,
            )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def preactivation(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ x + self.bias

    def activate(self, pre: np.ndarray) -> np.ndarray:
        if self.activation is Activation.RELU:
            return np.maximum(pre, 0.0)
        return pre


class Network:
    """Fully-connected ReLU network F(x0) = f_L(g(f_{L-1}(... g(f_1(x0)))))"""

    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise NetworkError("network needs at least one layer")
        indexed = []
        for i, layer in enumerate(layers):
            if layer.index != i:
                layer = Layer(layer.weights, layer.bias, layer.activation, index=i)
            indexed.append(layer)
        for prev, layer in zip(indexed, indexed[1:]):
            if layer.in_dim != prev.out_dim:
                raise DimensionError(
                    f"expects {layer.in_dim} inputs but layer {prev.index} produces {prev.out_dim}",
                    layer=layer.index,
                )
        if indexed[-1].activation is not Activation.LINEAR:
            raise NetworkError("last layer must be linear")
        for layer in indexed[:-1]:
            if layer.activation is not Activation.RELU:
                raise NetworkError(f"layer {layer.index}: hidden layers must use relu")
        self._layers: Tuple[Layer, ...] = tuple(indexed)

    @property
    def layers(self) -> Tuple[Layer, ...]:
        return self._layers

    @property
    def input_dim(self) -> int:
        return self._layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self._layers[-1].out_dim

    @property
    def depth(self) -> int:
        return len(self._layers)

    @property
    def widths(self) -> List[int]:
        return [layer.out_dim for layer in self._layers]

    @property
    def hidden_node_count(self) -> int:
        return sum(layer.out_dim for layer in self._layers[:-1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network) or other.depth != self.depth:
            return False
        return all(
            a.activation == b.activation
            and np.array_equal(a.weights, b.weights)
            and np.array_equal(a.bias, b.bias)
            for a, b in zip(self._layers, other.layers)
        )

    def __repr__(self) -> str:
        return f"Network({self.input_dim} -> {' -> '.join(str(w) for w in self.widths)})"

    def fingerprint(self) -> bytes:
        """Canonical byte string of all parameters, used for cache digests"""
        parts = []
        for layer in self._layers:
            parts.append(layer.activation.value.encode())
            parts.append(np.asarray(layer.weights.shape, dtype=np.int64).tobytes())
            parts.append(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
        return b"|".join(parts)


def _check_input(net: Network, x0) -> np.ndarray:
    x = np.asarray(x0, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise DimensionError(f"input has shape {x.shape}, network expects ({net.input_dim},)", layer=0)
    if not np.all(np.isfinite(x)):
        raise NetworkError("input contains non-finite values")
    return x


def preactivations(net: Network, x0) -> List[np.ndarray]:
    """Preactivation vector ``W^l x^{l-1} + b^l`` of every layer"""
    x = _check_input(net, x0)
    values = []
    for layer in net.layers:
        pre = layer.preactivation(x)
        values.append(pre)
        x = layer.activate(pre)
    return values


def forward(net: Network, x0) -> List[np.ndarray]:
    """Post-activation value of every layer, x^1 ... x^L

    Args:
        net: Network to evaluate
        x0: Input vector of length ``net.input_dim``

    Returns:
        List of layer outputs; the last entry is the network output x^L
    """
    x = _check_input(net, x0)
    values = []
    for layer in net.layers:
        x = layer.activate(layer.preactivation(x))
        values.append(x)
    return values


def evaluate(net: Network, x0) -> np.ndarray:
    """Network output x^L only"""
    return forward(net, x0)[-1]


def l1_objective(net: Network, x0, target) -> float:
    """``sum_j |x^L_j - t_j|`` for a single design and target"""
    t = np.asarray(target, dtype=float)
    return float(np.abs(evaluate(net, x0) - t).sum())


def gradient(net: Network, x0, target) -> np.ndarray:
    """Subgradient of ``sum_j |x^L_j - t_j|`` with respect to the input.

    Uses sign(0) = 0 for the absolute value and a zero ReLU derivative at
    preactivation exactly 0.
    """
    t = np.asarray(target, dtype=float)
    if t.ndim != 1 or t.shape[0] != net.output_dim:
        raise DimensionError(
            f"target has shape {t.shape}, network outputs ({net.output_dim},)",
            layer=net.depth - 1,
        )
    pres = preactivations(net, x0)
    output = pres[-1]
    g = np.sign(output - t)
    for layer, pre in zip(reversed(net.layers), reversed(pres)):
        if layer.activation is Activation.RELU:
            g = g * (pre > 0.0)
        g = layer.weights.T @ g
    return g
