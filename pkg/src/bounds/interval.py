"""Interval arithmetic through affine layers and ReLU clamping"""

from typing import Tuple

import numpy as np

from ..errors import BoundsError, InfeasibleProblemError
from ..network.model import Activation, Layer, Network
from .table import BoundsTable


def affine_interval(layer: Layer, lower: np.ndarray, upper: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Exact per-coordinate range of ``W x + b`` over the box ``[lower, upper]``"""
    positive = np.maximum(layer.weights, 0.0)
    negative = np.minimum(layer.weights, 0.0)
    pre_lower = positive @ lower + negative @ upper + layer.bias
    pre_upper = positive @ upper + negative @ lower + layer.bias
    return pre_lower, pre_upper


def post_activation(layer: Layer, lower: np.ndarray, upper: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if layer.activation is Activation.RELU:
        return np.maximum(lower, 0.0), np.maximum(upper, 0.0)
    return lower, upper


def interval_bounds(net: Network, design_lower, design_upper) -> BoundsTable:
    """
    Sound but loose preactivation bounds of every node over a design box

    Args:
        net: Network
        design_lower: Lower corner of the design box
        design_upper: Upper corner of the design box

    Returns:
        BoundsTable with INTERVAL provenance everywhere

    Raises:
        BoundsError: non-finite or wrongly sized box
        InfeasibleProblemError: empty box
    """
    lower = np.asarray(design_lower, dtype=float)
    upper = np.asarray(design_upper, dtype=float)
    if lower.shape != (net.input_dim,) or upper.shape != (net.input_dim,):
        raise BoundsError(f"design box has shape {lower.shape}/{upper.shape}, network expects ({net.input_dim},)")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise BoundsError("interval bounds need a finite design box")
    if np.any(lower > upper):
        raise InfeasibleProblemError("design box is empty")

    pre_lowers, pre_uppers = [], []
    lo, hi = lower, upper
    for layer in net.layers:
        pre_lo, pre_hi = affine_interval(layer, lo, hi)
        pre_lowers.append(pre_lo)
        pre_uppers.append(pre_hi)
        lo, hi = post_activation(layer, pre_lo, pre_hi)
    return BoundsTable.from_intervals(net, pre_lowers, pre_uppers, lower, upper)


def repropagate(net: Network, table: BoundsTable, start_layer: int) -> None:
    """Tighten layers ``start_layer..`` in place by interval arithmetic from the previous layer's bounds.

    Existing bounds are intersected, never loosened.
    """
    if start_layer <= 0:
        lo, hi = table.design_lower, table.design_upper
    else:
        previous = net.layers[start_layer - 1]
        lo, hi = post_activation(previous, table.lower[start_layer - 1], table.upper[start_layer - 1])
    for l in range(start_layer, net.depth):
        layer = net.layers[l]
        pre_lo, pre_hi = affine_interval(layer, lo, hi)
        table.lower[l] = np.maximum(table.lower[l], pre_lo)
        table.upper[l] = np.minimum(table.upper[l], pre_hi)
        # both are sound, so a crossing is rounding noise on a degenerate node
        table.lower[l] = np.minimum(table.lower[l], table.upper[l])
        lo, hi = post_activation(layer, table.lower[l], table.upper[l])
