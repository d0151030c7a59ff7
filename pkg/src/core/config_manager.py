"""
Configuration Manager for SGMNet Desk
Handles the typed run configuration and its JSON copy in the run directory
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from src.core.errors import ConfigError
from src.data.synth import SynthConfig
from src.losses.matting_losses import LossWeights
from src.model.sgmnet import ModelConfig
from src.nn.optim import SgdConfig

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
DTYPES = ("float32", "float64")


@dataclass
class TrainConfig:
    """Loop settings; optimizer and loss weights live in their own sections"""

    epochs: int = 30
    batch: int = 4
    iterations: Optional[int] = None
    seed: int = 0
    band_radius: int = 3
    holdout: float = 0.125
    checkpoint_every: int = 10
    dtype: str = "float32"
    flip: bool = True
    crop_size: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("epochs", "batch", "band_radius", "checkpoint_every", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", {name: getattr(self, name)})
        if self.iterations is not None and self.iterations < 1:
            raise ConfigError("iterations must be >= 1 when set", {"iterations": self.iterations})
        if not 0.0 <= self.holdout < 1.0:
            raise ConfigError("holdout must lie in [0, 1)", {"holdout": self.holdout})
        if self.dtype not in DTYPES:
            raise ConfigError("unsupported dtype", {"dtype": self.dtype, "choices": list(DTYPES)})
        if self.crop_size is not None and (self.crop_size < 32 or self.crop_size % 32):
            raise ConfigError("crop_size must be a positive multiple of 32", {"crop_size": self.crop_size})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("unknown train config keys", {"keys": sorted(unknown)})
        return cls(**dict(data))


_SECTIONS = {
    "model": ModelConfig,
    "sgd": SgdConfig,
    "weights": LossWeights,
    "synth": SynthConfig,
    "train": TrainConfig,
}


@dataclass
class RunConfig:
    """Everything a run needs to be repeated bit-exactly"""

    model: ModelConfig = field(default_factory=ModelConfig)
    sgd: SgdConfig = field(default_factory=lambda: SgdConfig(decay_every=10))
    weights: LossWeights = field(default_factory=LossWeights)
    synth: SynthConfig = field(default_factory=SynthConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name).to_dict() for name in _SECTIONS}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Sections may be partial; missing keys keep their defaults"""
        if not isinstance(data, Mapping):
            raise ConfigError("run config must be a mapping", {"type": type(data).__name__})
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError("unknown config sections", {"sections": sorted(unknown)})
        return cls().merged(data)

    def merged(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """New config with per-section key overrides applied"""
        sections = {}
        for name, section_cls in _SECTIONS.items():
            values = getattr(self, name).to_dict()
            given = overrides.get(name) or {}
            if not isinstance(given, Mapping):
                raise ConfigError(f"config section '{name}' must be a mapping")
            values.update(given)
            sections[name] = section_cls.from_dict(values)
        return RunConfig(**sections)


class ConfigManager:
    """Manage the configuration stored in a run directory"""

    def __init__(self, run_dir: Union[str, Path]):
        self.base_dir = Path(run_dir)
        self.config_dir = self.base_dir
        self.config_file = self.config_dir / CONFIG_FILE

    def ensure_config_dir(self):
        """Ensure the run directory exists"""
        self.config_dir.mkdir(parents=True, exist_ok=True)

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from file, or defaults when the run has none"""
        if not self.config_file.exists():
            return self.get_default_config()
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            logger.error("Error loading config: %s", e)
            raise ConfigError("run config is not valid JSON", {"path": str(self.config_file)}) from e

    def save_config(self, config: Dict[str, Any]):
        """Save configuration to file"""
        self.ensure_config_dir()
        with open(self.config_file, 'w', encoding='utf-8') as f:
            json.dump(config, f, indent=4, ensure_ascii=False)
            f.write("\n")

    def get_default_config(self) -> Dict[str, Any]:
        """Get default configuration"""
        return RunConfig().to_dict()

    def load_run_config(self) -> RunConfig:
        return RunConfig.from_dict(self.load_config())

    def save_run_config(self, config: RunConfig):
        self.save_config(config.to_dict())
        logger.debug("saved run config to %s", self.config_file)

    def get_checkpoint_dir(self) -> Path:
        """Get checkpoint directory"""
        path = self.base_dir / "checkpoints"
        path.mkdir(parents=True, exist_ok=True)
        return path

    @staticmethod
    def load_overrides(path: Union[str, Path]) -> Dict[str, Any]:
        """Read a YAML or JSON override file into a section mapping"""
        path = Path(path)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                if path.suffix.lower() in (".yaml", ".yml"):
                    data = yaml.safe_load(f)
                else:
                    data = json.load(f)
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError("cannot parse config file", {"path": str(path), "reason": str(e)}) from e
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping", {"path": str(path)})
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError("unknown config sections", {"sections": sorted(unknown)})
        return data
