"""
SGD with momentum, coupled weight decay and a step learning-rate schedule
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Mapping

import numpy as np

from src.core.errors import ConfigError, MissingGradientError
from src.nn.params import ParamStore

logger = logging.getLogger(__name__)


@dataclass
class SgdConfig:
    lr: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 4.0e-5
    decay_factor: float = 0.1
    decay_every: int = 50

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("lr must be > 0", {"lr": self.lr})
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)", {"momentum": self.momentum})
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0", {"weight_decay": self.weight_decay})
        if not self.decay_factor > 0:
            raise ConfigError("decay_factor must be > 0", {"decay_factor": self.decay_factor})
        if self.decay_every < 1:
            raise ConfigError("decay_every must be >= 1", {"decay_every": self.decay_every})

    def lr_at(self, epoch: int) -> float:
        """lr * decay_factor ** floor(epoch / decay_every)"""
        return self.lr * self.decay_factor ** (epoch // self.decay_every)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SgdConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("unknown optimizer keys", {"keys": sorted(unknown)})
        return cls(**dict(data))


def sgd_step(params: ParamStore, grads: Mapping[str, np.ndarray], cfg: SgdConfig, epoch: int):
    """
    In-place update of every parameter:
        v <- momentum * v + g + weight_decay * theta
        theta <- theta - lr(epoch) * v
    """
    missing = [name for name in params if name not in grads]
    if missing:
        raise MissingGradientError(missing[0])
    lr = cfg.lr_at(epoch)
    for name, theta in params.items():
        velocity = params.momentum(name)
        grad = np.asarray(grads[name], dtype=theta.dtype)
        velocity *= cfg.momentum
        velocity += grad
        if cfg.weight_decay:
            velocity += cfg.weight_decay * theta
        theta -= lr * velocity
