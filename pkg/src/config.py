"""Application configuration loaded from config/config.yaml"""

import os
from pathlib import Path
from typing import List, Optional, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .adjoint.gradient_search import AdjointConfig
from .bounds.tightening import BoundsConfig
from .errors import ConfigError
from .milp.branch_and_bound import BnbConfig
from .network.io import format_location

DEFAULT_CONFIG_PATH = "config/config.yaml"
CONFIG_ENV_VAR = "MILPINV_CONFIG"


class BenchConfig(BaseModel):
    """Scalability sweep on seeded synthetic networks"""
    depths: List[int] = Field(default_factory=lambda: [2, 3, 4, 5, 6])
    depth_width: int = Field(default=10, ge=1)
    widths: List[int] = Field(default_factory=lambda: [10, 20, 30, 40])
    width_depth: int = Field(default=1, ge=1)
    input_dim: int = Field(default=4, ge=1)
    output_dim: int = Field(default=3, ge=1)
    repeats: int = Field(default=3, ge=1)
    time_limit: float = Field(default=60.0, gt=0)
    bounds_t_max: float = Field(default=5.0, gt=0)
    seed: int = Field(default=0, ge=0)


class OutputConfig(BaseModel):
    logs_dir: str = "logs"
    manifests_dir: str = "logs/manifests"
    history_path: str = "logs/run_history.json"
    history_limit: int = Field(default=1000, ge=1)


class AppConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    solver: BnbConfig = Field(default_factory=BnbConfig)
    bounds: BoundsConfig = Field(default_factory=BoundsConfig)
    adjoint: AdjointConfig = Field(default_factory=AdjointConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def snapshot(self) -> dict:
        """JSON-ready copy for run manifests"""
        return self.model_dump(mode="json")


def resolve_config_path(path: Optional[Union[str, Path]] = None) -> Path:
    """``--config`` beats ``$MILPINV_CONFIG`` beats the default location"""
    return Path(path or os.getenv(CONFIG_ENV_VAR) or DEFAULT_CONFIG_PATH)


def load_config(path: Optional[Union[str, Path]] = None) -> AppConfig:
    """
    Load and validate the YAML configuration

    A missing default file yields the built-in defaults; a missing file
    that was asked for explicitly is an error.

    Args:
        path: Explicit config path (``--config``)

    Returns:
        AppConfig

    Raises:
        ConfigError: unreadable YAML or invalid settings
    """
    config_path = resolve_config_path(path)
    explicit = path is not None or os.getenv(CONFIG_ENV_VAR) is not None
    if not config_path.exists():
        if explicit:
            raise ConfigError(f"config file not found: {config_path}")
        logger.debug(f"No config at {config_path}, using defaults")
        return AppConfig()
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {config_path}: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{config_path} must contain a mapping of sections")
    try:
        config = AppConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"{config_path}: {format_location(first['loc'])}: {first['msg']}") from e
    logger.debug(f"Loaded config from {config_path}")
    return config
