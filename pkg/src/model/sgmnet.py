"""
SGM-Net forward pass
Semantic branch, foreground probability map module, detail branch and fusion branch
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from src.core.errors import CheckpointError, ConfigError, ShapeMismatchError
from src.nn.layers import conv, conv_block, down_stage, se_block, up_stage
from src.nn.params import ParamStore, load_checkpoint, save_checkpoint
from src.tensor import ops
from src.tensor.tensor import GradTape, Tensor4, as_tensor

logger = logging.getLogger(__name__)

# row -> (use_fpm, feed_sp_to_detail), as in the ablation table
ABLATION_ROWS: Dict[str, Tuple[bool, bool]] = {
    "i": (False, True),
    "ii": (True, True),
    "iii": (True, False),
}

BRANCHES = ("semantic", "fpm", "detail", "fusion")

# keeps s_po strictly inside (0, 1) once float32 sigmoids saturate
PROB_EPS = 1e-6


@dataclass
class ModelConfig:
    widths: List[int] = field(default_factory=lambda: [16, 32, 64, 128, 128])
    fpm_channels: int = 32
    detail_channels: int = 16
    fusion_channels: int = 16
    se_reduction: int = 4
    norm_groups: int = 4
    use_fpm: bool = True
    feed_sp_to_detail: bool = False
    input_size: int = 64

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        self.validate()

    def validate(self):
        if len(self.widths) != 5:
            raise ConfigError("encoder needs exactly 5 stage widths", {"widths": self.widths})
        if min(self.widths) < 1:
            raise ConfigError("stage widths must be positive", {"widths": self.widths})
        for name in ("fpm_channels", "detail_channels", "fusion_channels", "se_reduction"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", {name: getattr(self, name)})
        if self.norm_groups < 0:
            raise ConfigError("norm_groups must be >= 0", {"norm_groups": self.norm_groups})
        if self.widths[-1] % self.se_reduction:
            raise ConfigError("deepest width must be divisible by se_reduction",
                              {"width": self.widths[-1], "se_reduction": self.se_reduction})
        if self.input_size < 32 or self.input_size % 32:
            raise ConfigError("input_size must be a positive multiple of 32", {"input_size": self.input_size})

    @property
    def ablation_row(self) -> Optional[str]:
        for row, flags in ABLATION_ROWS.items():
            if flags == (self.use_fpm, self.feed_sp_to_detail):
                return row
        return None

    def with_ablation(self, row: str) -> "ModelConfig":
        if row not in ABLATION_ROWS:
            raise ConfigError(f"unknown ablation row '{row}'", {"choices": sorted(ABLATION_ROWS)})
        use_fpm, feed = ABLATION_ROWS[row]
        data = self.to_dict()
        data.update(use_fpm=use_fpm, feed_sp_to_detail=feed)
        return ModelConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError("unknown model config keys", {"keys": sorted(unknown)})
        return cls(**dict(data))


@dataclass
class SemanticFeatures:
    stages: List[Tensor4]
    deep: Tensor4
    s_po: Tensor4


@dataclass
class ForwardOutputs:
    s_po: Tensor4
    f_p: Tensor4
    d_p: Tensor4
    alpha_p: Tensor4
    low_level_feats: List[Tensor4]
    semantic_deep: Tensor4


class SGMNet:
    """Four-branch matting network over a ParamStore"""

    def __init__(self, cfg: Optional[ModelConfig] = None, params: Optional[ParamStore] = None,
                 seed: int = 0, dtype: str = "float32"):
        self.cfg = cfg or ModelConfig()
        self.params = params if params is not None else ParamStore(seed=seed, dtype=dtype)

    def initialize(self) -> "SGMNet":
        """Create every parameter by running one forward pass on zeros"""
        size = self.cfg.input_size
        self.forward(Tensor4(np.zeros((1, 3, size, size), dtype=self.params.dtype)))
        logger.debug("initialized %d parameter tensors (%d values)", len(self.params), self.params.count())
        return self

    def parameter_groups(self) -> Dict[str, List[str]]:
        groups: Dict[str, List[str]] = {branch: [] for branch in BRANCHES}
        for name in self.params:
            groups.setdefault(name.split(".", 1)[0], []).append(name)
        return groups

    def _check_image(self, image: Tensor4):
        if image.c != 3:
            raise ShapeMismatchError("sgmnet", "image must have 3 channels", image=image.shape)
        if image.h % 32 or image.w % 32:
            raise ShapeMismatchError("sgmnet", "image height and width must be divisible by 32",
                                     image=image.shape)

    def _prepare(self, image: Any) -> Tensor4:
        image = as_tensor(image)
        if image.dtype != self.params.dtype and not image.tracked:
            image = Tensor4(image.data.astype(self.params.dtype))
        self._check_image(image)
        return image

    def semantic_branch(self, image: Any, tape: Optional[GradTape] = None) -> SemanticFeatures:
        """Five encoder stages (strides 2, 4, 8, 16, 16), SE reweighting, 1x1 head + clipped sigmoid"""
        image = self._prepare(image)
        w, p, g = self.cfg.widths, self.params, self.cfg.norm_groups
        s1 = conv_block(image, p, "semantic.stage1", w[0], 3, stride=2, tape=tape, norm_groups=g)
        s2 = down_stage(s1, p, "semantic.stage2", w[1], tape=tape, norm_groups=g)
        s3 = down_stage(s2, p, "semantic.stage3", w[2], tape=tape, norm_groups=g)
        s4 = down_stage(s3, p, "semantic.stage4", w[3], tape=tape, norm_groups=g)
        s5 = conv_block(s4, p, "semantic.stage5", w[4], 3, stride=1, tape=tape, norm_groups=g)
        deep = se_block(s5, p, "semantic.se", self.cfg.se_reduction, tape=tape)
        logits = conv(deep, p, "semantic.head", 1, k=1, tape=tape)
        s_po = ops.clip(ops.sigmoid(logits), PROB_EPS, 1.0 - PROB_EPS)
        return SemanticFeatures(stages=[s1, s2, s3, s4, s5], deep=deep, s_po=s_po)

    def fpm_module(self, features: SemanticFeatures, tape: Optional[GradTape] = None) -> Tensor4:
        """Recombine all encoder scales coarse-to-fine and return the foreground probability"""
        if not self.cfg.use_fpm:
            raise ConfigError("fpm_module called with use_fpm disabled; substitute a constant map")
        ch, p, g = self.cfg.fpm_channels, self.params, self.cfg.norm_groups
        s1, s2, s3, s4, _ = features.stages
        deep = conv_block(features.deep, p, "fpm.proj5", ch, k=1, tape=tape, norm_groups=g)
        x = ops.concat_channels([deep, conv_block(s4, p, "fpm.proj4", ch, k=1, tape=tape, norm_groups=g)])
        x = conv_block(x, p, "fpm.fuse4", ch, 3, tape=tape, norm_groups=g)
        for level, feat in ((3, s3), (2, s2), (1, s1)):
            skip = conv_block(feat, p, f"fpm.proj{level}", ch, k=1, tape=tape, norm_groups=g)
            x = up_stage(x, p, f"fpm.fuse{level}", ch, skip=skip, tape=tape, norm_groups=g)
        x = ops.upsample(x, 2, "bilinear")
        probs = ops.channel_softmax(conv(x, p, "fpm.head", 2, k=1, tape=tape))
        return ops.slice_channels(probs, 1, 2)

    def detail_branch(self, image: Any, f_p: Optional[Tensor4], low_level_feats: List[Tensor4],
                      sp_deep: Optional[Tensor4] = None, tape: Optional[GradTape] = None) -> Tensor4:
        """High-resolution boundary branch on I_t = concat(I, replicate3(f_p))"""
        image = self._prepare(image)
        if f_p is None:
            raise ConfigError("detail branch needs a foreground probability map or a substitute")
        f_p = as_tensor(f_p)
        if f_p.shape != (image.n, 1, image.h, image.w):
            raise ShapeMismatchError("detail_branch", "f_p must be single-channel at image resolution",
                                     image=image.shape, f_p=f_p.shape)
        if self.cfg.feed_sp_to_detail and sp_deep is None:
            raise ConfigError("feed_sp_to_detail is set but no semantic feature was given")
        low = low_level_feats[0]
        if (low.h, low.w) != (image.h // 2, image.w // 2):
            raise ShapeMismatchError("detail_branch", "low-level feature must be at stride 2",
                                     image=image.shape, low=low.shape)
        dch, p, g = self.cfg.detail_channels, self.params, self.cfg.norm_groups

        merged = ops.concat_channels([image, ops.replicate_channels(f_p, 3)])
        x = ops.concat_channels([ops.avg_pool(merged, 2), low])
        enc1 = conv_block(x, p, "detail.enc1", dch, 3, tape=tape, norm_groups=g)
        enc2 = down_stage(enc1, p, "detail.enc2", 2 * dch, tape=tape, norm_groups=g)
        if self.cfg.feed_sp_to_detail:
            factor = enc2.h // sp_deep.h
            enc2 = ops.concat_channels([enc2, ops.upsample(sp_deep, factor, "bilinear")])
        dec = conv_block(enc2, p, "detail.dec2", dch, 3, tape=tape, norm_groups=g)
        dec = up_stage(dec, p, "detail.dec1", dch, skip=enc1, tape=tape, norm_groups=g)
        full = ops.concat_channels([ops.upsample(dec, 2, "bilinear"), image])
        refined = conv_block(full, p, "detail.refine", dch, 3, tape=tape, norm_groups=g)
        return ops.sigmoid(conv(refined, p, "detail.head", 1, 3, tape=tape))

    def fusion_branch(self, sp_deep: Tensor4, d_p: Tensor4, tape: Optional[GradTape] = None) -> Tensor4:
        """Upsample semantics x16, concat with details, two conv blocks, sigmoid head"""
        up = ops.upsample(sp_deep, 16, "bilinear")
        if (up.n, up.h, up.w) != (d_p.n, d_p.h, d_p.w):
            raise ShapeMismatchError("fusion_branch", "upsampled semantics do not match details",
                                     semantics=up.shape, details=d_p.shape)
        fch, p, g = self.cfg.fusion_channels, self.params, self.cfg.norm_groups
        x = ops.concat_channels([up, d_p])
        x = conv_block(x, p, "fusion.conv1", fch, k=1, tape=tape, norm_groups=g)
        x = conv_block(x, p, "fusion.conv2", fch, k=3, tape=tape, norm_groups=g)
        return ops.sigmoid(conv(x, p, "fusion.head", 1, k=1, tape=tape))

    def forward(self, image: Any, tape: Optional[GradTape] = None) -> ForwardOutputs:
        image = self._prepare(image)
        semantic = self.semantic_branch(image, tape)
        if self.cfg.use_fpm:
            f_p = self.fpm_module(semantic, tape)
        else:
            f_p = Tensor4(np.full((image.n, 1, image.h, image.w), 0.5, dtype=image.dtype))
        low = [semantic.stages[0]]
        sp_feed = semantic.deep if self.cfg.feed_sp_to_detail else None
        d_p = self.detail_branch(image, f_p, low, sp_feed, tape)
        alpha_p = self.fusion_branch(semantic.deep, d_p, tape)
        return ForwardOutputs(s_po=semantic.s_po, f_p=f_p, d_p=d_p, alpha_p=alpha_p,
                              low_level_feats=low, semantic_deep=semantic.deep)

    def predict(self, image: Any) -> np.ndarray:
        """Alpha matte (n, 1, H, W) without recording gradients"""
        return self.forward(image).alpha_p.data


def save_model(path: Union[str, Path], model: SGMNet, extra: Optional[Dict[str, Any]] = None):
    config = {"model": model.cfg.to_dict()}
    config.update(extra or {})
    save_checkpoint(path, model.params, config)


def load_model(path: Union[str, Path]) -> Tuple[SGMNet, Dict[str, Any]]:
    """Rebuild a model from a checkpoint; fails if parameters disagree with the stored config"""
    params, config = load_checkpoint(path)
    if "model" not in config:
        raise CheckpointError("checkpoint has no model config", {"path": str(path)})
    model = SGMNet(ModelConfig.from_dict(config["model"]), params=params)
    expected = SGMNet(model.cfg, seed=params.seed, dtype=params.dtype.name).initialize().params
    stored = {name: params[name].shape for name in params}
    wanted = {name: expected[name].shape for name in expected}
    if stored != wanted:
        missing = sorted(set(wanted) - set(stored))
        extra = sorted(set(stored) - set(wanted))
        raise CheckpointError("checkpoint parameters do not match its model config",
                              {"missing": missing[:5], "unexpected": extra[:5]})
    return model, config
