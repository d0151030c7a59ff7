"""
Training losses for SGM-Net
Semantic, detail and alpha/compositional terms and their weighted sum.
All terms are recorded on the prediction's tape so the total can be differentiated.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from src.core.errors import ConfigError, DataError, ShapeMismatchError
from src.data.targets import SEMANTIC_DOWNSAMPLE, semantic_target
from src.tensor import Tensor4, abs_, add, affine, mean_all, mul, square, sub, sum_all

logger = logging.getLogger(__name__)


@dataclass
class LossWeights:
    lambda_s: float = 1.0
    lambda_d: float = 10.0
    lambda_alpha: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        negative = {k: v for k, v in asdict(self).items() if v < 0}
        if negative:
            raise ConfigError("loss weights must be >= 0", negative)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LossWeights":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("unknown loss weight keys", {"keys": sorted(unknown)})
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass
class LossBreakdown:
    """Scalar components kept for logging, plus the differentiable total"""

    l_s: float
    l_d: float
    l_alpha: float
    l_c: float
    total: float
    total_tensor: Optional[Tensor4] = None

    def as_row(self) -> Dict[str, float]:
        return {"l_s": self.l_s, "l_d": self.l_d, "l_alpha": self.l_alpha, "l_c": self.l_c, "total": self.total}


def _constant(array: Any, like: Tensor4) -> Tensor4:
    if isinstance(array, Tensor4):
        array = array.data
    return Tensor4(np.asarray(array, dtype=like.dtype))


def _same_shape(op: str, pred: Tensor4, target: Tensor4, **extra):
    if pred.shape != target.shape:
        raise ShapeMismatchError(op, "prediction and target differ", pred=pred.shape, target=target.shape, **extra)


def loss_s(s_po: Tensor4, alpha_g: Any, target: Optional[Any] = None) -> Tensor4:
    """1/2 * mean (s_po - G(alpha_g))^2; pass target to reuse a precomputed G(alpha_g)"""
    alpha_g = np.asarray(alpha_g.data if isinstance(alpha_g, Tensor4) else alpha_g)
    expected = (alpha_g.shape[0], 1, alpha_g.shape[2] // SEMANTIC_DOWNSAMPLE, alpha_g.shape[3] // SEMANTIC_DOWNSAMPLE)
    if s_po.shape != expected:
        raise ShapeMismatchError("loss_s", "semantic output must be at 1/16 of the matte resolution",
                                 s_po=s_po.shape, alpha=alpha_g.shape)
    g = _constant(semantic_target(alpha_g) if target is None else target, s_po)
    _same_shape("loss_s", s_po, g)
    return affine(mean_all(square(sub(s_po, g))), 0.5)


def check_binary(mask: np.ndarray):
    if not np.all((mask == 0) | (mask == 1)):
        raise DataError("transition mask must be binary", {"values": np.unique(mask)[:5].tolist()})


def loss_d(d_p: Tensor4, alpha_g: Any, m_d: Any) -> Tensor4:
    """sum m_d (d_p - alpha_g)^2 / max(1, |m_d|); an empty mask gives 0"""
    alpha = _constant(alpha_g, d_p)
    mask = _constant(m_d, d_p)
    _same_shape("loss_d", d_p, alpha)
    _same_shape("loss_d", d_p, mask)
    check_binary(mask.data)
    count = int(mask.data.sum())
    if count == 0:
        logger.debug("empty transition mask, detail loss is zero")
    return affine(sum_all(mul(square(sub(d_p, alpha)), mask)), 1.0 / max(1, count))


def loss_alpha(alpha_p: Tensor4, alpha_g: Any, image: Any,
               fg: Optional[Any] = None, bg: Optional[Any] = None) -> Tuple[Tensor4, Tensor4]:
    """
    Alpha and compositional losses.

    Returns (l_alpha, l_c) where l_alpha = mean |alpha_p - alpha_g| + l_c and
    l_c = mean |I - (alpha_p F + (1 - alpha_p) B)|, or zero without F and B.
    """
    if (fg is None) != (bg is None):
        raise DataError("foreground and background must be given together")
    alpha = _constant(alpha_g, alpha_p)
    _same_shape("loss_alpha", alpha_p, alpha)
    term = mean_all(abs_(sub(alpha_p, alpha)))
    if fg is None:
        return term, Tensor4.scalar(0.0, alpha_p.dtype)

    image, fg, bg = _constant(image, alpha_p), _constant(fg, alpha_p), _constant(bg, alpha_p)
    n, _, h, w = alpha_p.shape
    for label, plane in (("image", image), ("fg", fg), ("bg", bg)):
        if plane.shape != (n, 3, h, w):
            raise ShapeMismatchError("loss_alpha", f"{label} must be (n, 3, h, w) matching alpha",
                                     alpha=alpha_p.shape, **{label: plane.shape})
    recomposed = add(bg, mul(alpha_p, Tensor4(fg.data - bg.data)))
    l_c = mean_all(abs_(sub(image, recomposed)))
    return add(term, l_c), l_c


def total_loss(l_s: Tensor4, l_d: Tensor4, l_alpha: Tensor4, l_c: Tensor4,
               weights: Optional[LossWeights] = None) -> LossBreakdown:
    """lambda_s l_s + lambda_d l_d + lambda_alpha l_alpha, with the components kept"""
    weights = weights or LossWeights()
    weights.validate()
    total = add(add(affine(l_s, weights.lambda_s), affine(l_d, weights.lambda_d)),
                affine(l_alpha, weights.lambda_alpha))
    parts = (l_s.item(), l_d.item(), l_alpha.item())
    # float64 sum of the logged parts, independent of the tensor dtype
    value = weights.lambda_s * parts[0] + weights.lambda_d * parts[1] + weights.lambda_alpha * parts[2]
    return LossBreakdown(parts[0], parts[1], parts[2], l_c.item(), value, total)


def compute_losses(outputs, batch, weights: Optional[LossWeights] = None) -> LossBreakdown:
    """All loss terms for one forward pass over a Batch"""
    l_s = loss_s(outputs.s_po, batch.alpha, batch.semantic)
    l_d = loss_d(outputs.d_p, batch.alpha, batch.mask)
    l_alpha, l_c = loss_alpha(outputs.alpha_p, batch.alpha, batch.image, batch.fg, batch.bg)
    return total_loss(l_s, l_d, l_alpha, l_c, weights)
