"""Pytest configuration and shared fixtures for testing"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.network.io import save_network
from src.network.model import Activation, Layer, Network
from src.network.synthetic import random_network


@pytest.fixture
def identity_net() -> Network:
    """Single linear layer W=[[1]], b=[0]"""
    return Network([Layer([[1.0]], [0.0], Activation.LINEAR)])


@pytest.fixture
def one_relu_net() -> Network:
    """x -> relu(x) with one hidden node"""
    return Network([
        Layer([[1.0]], [0.0], Activation.RELU),
        Layer([[1.0]], [0.0], Activation.LINEAR),
    ])


@pytest.fixture
def toy_net() -> Network:
    """2-2-1 network with two unstable hidden nodes on [-1, 1]^2"""
    return Network([
        Layer([[1.0, -1.0], [1.0, 1.0]], [0.0, -0.5], Activation.RELU),
        Layer([[1.0, -2.0]], [0.1], Activation.LINEAR),
    ])


@pytest.fixture
def make_net():
    """Factory for seeded random networks"""
    def _make(input_dim=2, hidden=(3,), output_dim=2, seed=0, bias_scale=0.1) -> Network:
        return random_network(input_dim, list(hidden), output_dim, seed=seed, bias_scale=bias_scale)
    return _make


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def write_json(tmp_path: Path):
    """Write a document to a file under tmp_path and return its path"""
    def _write(name: str, document) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def net_file(tmp_path: Path, toy_net: Network) -> Path:
    path = tmp_path / "net.json"
    save_network(toy_net, path)
    return path


def pytest_configure(config):
    """Configure pytest-asyncio and custom markers"""
    config.addinivalue_line(
        "markers", "asyncio: mark test as async"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow (can be skipped with -m 'not slow')"
    )
