"""Seeded random networks for benchmarks, tests and demos"""

from typing import Sequence

import numpy as np

from .model import Activation, Layer, Network


def random_network(
    input_dim: int,
    hidden_widths: Sequence[int],
    output_dim: int,
    seed: int = 0,
    bias_scale: float = 0.1,
) -> Network:
    """
    Build a fully-connected ReLU network with He-scaled Gaussian weights

    Args:
        input_dim: Number of design inputs m
        hidden_widths: Width of each hidden layer (may be empty)
        output_dim: Number of outputs n
        seed: Generator seed; identical arguments give identical networks
        bias_scale: Standard deviation of the biases

    Returns:
        Network whose hidden layers use ReLU and last layer is linear
    """
    rng = np.random.default_rng(seed)
    sizes = [input_dim, *hidden_widths, output_dim]
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
        weights = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        bias = rng.normal(0.0, bias_scale, size=fan_out)
        activation = Activation.LINEAR if i == len(sizes) - 2 else Activation.RELU
        layers.append(Layer(weights, bias, activation, index=i))
    return Network(layers)
