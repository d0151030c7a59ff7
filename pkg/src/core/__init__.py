"""
Core components for SGMNet Desk: configuration, errors and logging
"""

from importlib import import_module
from typing import Any

from src.core.errors import (
    CheckpointError, ConfigError, DataError, GradientError, ImageFormatError, MattingError, MissingGradientError,
    ShapeMismatchError,
)
from src.core.log import LOG_LEVEL_ENV, ColorFormatter, resolve_level, setup_logging

# config_manager imports the model and data packages, which import src.core.errors
_LAZY = {name: "src.core.config_manager" for name in ("CONFIG_FILE", "ConfigManager", "RunConfig", "TrainConfig")}

__all__ = [
    "CONFIG_FILE", "ConfigManager", "RunConfig", "TrainConfig",
    "CheckpointError", "ConfigError", "DataError", "GradientError", "ImageFormatError", "MattingError",
    "MissingGradientError", "ShapeMismatchError",
    "LOG_LEVEL_ENV", "ColorFormatter", "resolve_level", "setup_logging",
]


def __getattr__(name: str) -> Any:
    if name in _LAZY:
        return getattr(import_module(_LAZY[name]), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
