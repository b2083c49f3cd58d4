"""Big-M encoding of a network's layers into an existing MilpModel.

Shared by the inverse/robustness encoders and by the bound-tightening
subproblems, which encode only the layers before the node being bounded.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..bounds.table import Stability, classify
from ..milp.model import ConstraintSense, MilpModel, VarKind
from ..network.model import Activation, Layer, Network


@dataclass(frozen=True)
class NodeVars:
    """Variables of one node.

    ``value`` is the post-activation variable (``None`` when the node is
    stably inactive and dropped), ``binary`` the activation indicator of an
    unstable ReLU, and ``stability`` is ``None`` on the linear output layer.
    """
    value: Optional[int]
    binary: Optional[int]
    stability: Optional[Stability]


def preactivation_terms(
    layer: Layer, node: int, previous: Sequence[Optional[int]]
) -> Tuple[List[Tuple[int, float]], float]:
    """Sparse ``W x + b`` of one node over the previous layer's variables.

    Dropped (stably inactive) predecessors contribute nothing.
    """
    terms = [
        (var, float(w))
        for var, w in zip(previous, layer.weights[node])
        if var is not None and w != 0.0
    ]
    return terms, float(layer.bias[node])


def encode_layers(
    model: MilpModel,
    net: Network,
    lower: Sequence[np.ndarray],
    upper: Sequence[np.ndarray],
    inputs: Sequence[int],
    n_layers: Optional[int] = None,
    prefix: str = "",
) -> List[List[NodeVars]]:
    """
    Add the constraints of the first ``n_layers`` layers of ``net`` to ``model``

    Args:
        model: Model receiving variables and constraints
        net: Network to encode
        lower: Preactivation lower bounds per layer
        upper: Preactivation upper bounds per layer
        inputs: Variable indices of the design inputs x0
        n_layers: Number of layers to encode (all when None)
        prefix: Name prefix that keeps network copies apart

    Returns:
        NodeVars per layer and node
    """
    encoded: List[List[NodeVars]] = []
    previous: List[Optional[int]] = list(inputs)
    layers = net.layers if n_layers is None else net.layers[:n_layers]
    for l, layer in enumerate(layers):
        nodes = []
        for k in range(layer.out_dim):
            terms, bias = preactivation_terms(layer, k, previous)
            minus_pre = [(var, -w) for var, w in terms]
            name = f"{prefix}x[{l}][{k}]"

            if layer.activation is Activation.LINEAR:
                v = model.add_var(name, lower=-math.inf, upper=math.inf)
                model.add_constraint([(v, 1.0)] + minus_pre, ConstraintSense.EQ, bias, name=f"{prefix}affine[{l}][{k}]")
                nodes.append(NodeVars(v, None, None))
                continue

            lo, hi = float(lower[l][k]), float(upper[l][k])
            stability = classify(lo, hi)
            if stability is Stability.STABLY_INACTIVE:
                nodes.append(NodeVars(None, None, stability))
            elif stability is Stability.STABLY_ACTIVE:
                v = model.add_var(name, lower=-math.inf, upper=math.inf)
                model.add_constraint([(v, 1.0)] + minus_pre, ConstraintSense.EQ, bias, name=f"{prefix}active[{l}][{k}]")
                nodes.append(NodeVars(v, None, stability))
            else:
                v = model.add_var(name, lower=0.0, upper=hi)
                z = model.add_var(f"{prefix}z[{l}][{k}]", VarKind.BINARY)
                # x >= Wx + b
                model.add_constraint([(v, 1.0)] + minus_pre, ConstraintSense.GE, bias, name=f"{prefix}relu_pre[{l}][{k}]")
                # x <= Wx + b - l (1 - z)
                model.add_constraint(
                    [(v, 1.0)] + minus_pre + [(z, -lo)], ConstraintSense.LE, bias - lo, name=f"{prefix}relu_off[{l}][{k}]"
                )
                # x <= u z
                model.add_constraint([(v, 1.0), (z, -hi)], ConstraintSense.LE, 0.0, name=f"{prefix}relu_on[{l}][{k}]")
                nodes.append(NodeVars(v, z, stability))
        encoded.append(nodes)
        previous = [node.value for node in nodes]
    return encoded
