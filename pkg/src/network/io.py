"""Network file format (JSON, see agent_docs/file_formats.md)"""

import json
from pathlib import Path
from typing import List, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..errors import MilpInverseError, NetworkFormatError
from .model import Activation, Layer, Network

NETWORK_FORMAT_VERSION = 1


class LayerSpec(BaseModel):
    """One layer as stored on disk"""
    model_config = ConfigDict(allow_inf_nan=False, extra="forbid")

    weights: List[List[float]]
    bias: List[float]
    activation: Activation


class NetworkFile(BaseModel):
    """Top-level network document"""
    model_config = ConfigDict(allow_inf_nan=False, extra="forbid")

    format_version: int = Field(default=NETWORK_FORMAT_VERSION)
    layers: List[LayerSpec] = Field(min_length=1)


def format_location(loc) -> str:
    """Render a pydantic error location as ``layers[0].weights[1][2]``"""
    text = ""
    for part in loc:
        if isinstance(part, int):
            text += f"[{part}]"
        else:
            text += f".{part}" if text else str(part)
    return text


def network_from_document(document: dict) -> Network:
    """Validate a parsed document and build the network it describes"""
    try:
        spec = NetworkFile.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise NetworkFormatError(first["msg"], location=format_location(first["loc"])) from e

    if spec.format_version != NETWORK_FORMAT_VERSION:
        raise NetworkFormatError(
            f"unsupported format_version {spec.format_version}", location="format_version"
        )

    layers = []
    for i, layer_spec in enumerate(spec.layers):
        widths = {len(row) for row in layer_spec.weights}
        if len(widths) > 1:
            raise NetworkFormatError("weight rows have different lengths", location=f"layers[{i}].weights")
        try:
            layers.append(Layer(layer_spec.weights, layer_spec.bias, layer_spec.activation, index=i))
        except MilpInverseError as e:
            raise NetworkFormatError(str(e), location=f"layers[{i}]") from e

    try:
        return Network(layers)
    except MilpInverseError as e:
        raise NetworkFormatError(str(e), location="layers") from e


def network_to_document(net: Network) -> dict:
    return {
        "format_version": NETWORK_FORMAT_VERSION,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation.value,
            }
            for layer in net.layers
        ],
    }


def load_network(path: Union[str, Path]) -> Network:
    """
    Load a network file

    Args:
        path: JSON network file

    Returns:
        Validated Network

    Raises:
        NetworkFormatError: unreadable JSON or schema/invariant violation
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise NetworkFormatError(f"invalid JSON: {e.msg}", location=f"{path.name}:{e.lineno}:{e.colno}") from e
    except OSError as e:
        raise NetworkFormatError(f"cannot read network file: {e}", location=str(path)) from e

    net = network_from_document(document)
    logger.debug(f"Loaded network {net!r} from {path}")
    return net


def save_network(net: Network, path: Union[str, Path]) -> None:
    """Write ``net`` so that ``load_network`` reproduces it bit for bit"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        # float repr is the shortest round-trip form
        json.dump(network_to_document(net), f, indent=2)
    logger.debug(f"Saved network {net!r} to {path}")
