"""
Dataset directory layout, held-out split, augmentation and batching
Layout: <root>/{image,alpha,fg,bg}/<id>.png plus index.txt with one id per line
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import ConfigError, DataError
from src.data.compositing import MattingSample
from src.data.image_io import read_alpha, read_image, write_image
from src.data.targets import DEFAULT_BAND_RADIUS, semantic_target, transition_mask

logger = logging.getLogger(__name__)

INDEX_FILE = "index.txt"
IMAGE_DIR, ALPHA_DIR, FG_DIR, BG_DIR = "image", "alpha", "fg", "bg"


def save_dataset(samples: Sequence[MattingSample], root: Union[str, Path]) -> Path:
    root = Path(root)
    ids = [s.id for s in samples]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate sample ids", {"count": len(ids) - len(set(ids))})
    for sample in samples:
        write_image(root / IMAGE_DIR / f"{sample.id}.png", sample.image)
        write_image(root / ALPHA_DIR / f"{sample.id}.png", sample.alpha)
        if sample.has_fg_bg:
            write_image(root / FG_DIR / f"{sample.id}.png", sample.fg)
            write_image(root / BG_DIR / f"{sample.id}.png", sample.bg)
    (root / INDEX_FILE).write_text("".join(f"{i}\n" for i in ids), encoding="utf-8")
    logger.info("wrote %d samples to %s", len(ids), root)
    return root


def read_index(root: Union[str, Path]) -> List[str]:
    index = Path(root) / INDEX_FILE
    if not index.is_file():
        raise DataError("dataset has no index file", {"path": str(index)})
    ids = [line.strip() for line in index.read_text(encoding="utf-8").splitlines() if line.strip()]
    if len(set(ids)) != len(ids):
        raise DataError("index lists duplicate ids", {"path": str(index)})
    return ids


def load_dataset(root: Union[str, Path], ids: Optional[Sequence[str]] = None) -> List[MattingSample]:
    """Load samples in index order (or the given order); missing files are reported together"""
    root = Path(root)
    ids = list(ids) if ids is not None else read_index(root)
    missing = [i for i in ids
               if not (root / IMAGE_DIR / f"{i}.png").is_file() or not (root / ALPHA_DIR / f"{i}.png").is_file()]
    if missing:
        raise DataError("missing image or alpha files", {"ids": missing[:10], "count": len(missing)})

    samples = []
    for sample_id in ids:
        fg_path, bg_path = root / FG_DIR / f"{sample_id}.png", root / BG_DIR / f"{sample_id}.png"
        if fg_path.is_file() != bg_path.is_file():
            raise DataError("foreground and background must be present together", {"id": sample_id})
        sample = MattingSample(
            sample_id,
            read_image(root / IMAGE_DIR / f"{sample_id}.png"),
            read_alpha(root / ALPHA_DIR / f"{sample_id}.png"),
            read_image(fg_path) if fg_path.is_file() else None,
            read_image(bg_path) if bg_path.is_file() else None,
        )
        samples.append(sample.validate())
    return samples


def holdout_split(ids: Sequence[str], fraction: float) -> Tuple[List[str], List[str]]:
    """The last ceil(fraction * N) ids are held out"""
    if not 0.0 <= fraction < 1.0:
        raise ConfigError("holdout fraction must lie in [0, 1)", {"fraction": fraction})
    ids = list(ids)
    k = math.ceil(fraction * len(ids)) if fraction > 0 else 0
    if k >= len(ids):
        raise DataError("holdout leaves no training ids", {"ids": len(ids), "fraction": fraction})
    return ids[:len(ids) - k], ids[len(ids) - k:]


def random_flip(sample: MattingSample, rng: np.random.Generator) -> MattingSample:
    return sample.flipped() if rng.random() < 0.5 else sample


def random_crop(sample: MattingSample, size: int, rng: np.random.Generator) -> MattingSample:
    h, w = sample.size
    if h < size or w < size:
        raise DataError("sample smaller than crop size", {"id": sample.id, "size": (h, w), "crop": size})
    if (h, w) == (size, size):
        return sample
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return sample.cropped(top, left, size)


def augment(sample: MattingSample, rng: np.random.Generator, crop_size: int, flip: bool = True) -> MattingSample:
    if flip:
        sample = random_flip(sample, rng)
    return random_crop(sample, crop_size, rng)


@dataclass
class Batch:
    """Stacked training arrays with their derived supervision targets"""

    ids: List[str]
    image: np.ndarray
    alpha: np.ndarray
    semantic: np.ndarray
    mask: np.ndarray
    fg: Optional[np.ndarray] = None
    bg: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.ids)


def make_batch(samples: Sequence[MattingSample], band_radius: int = DEFAULT_BAND_RADIUS,
               dtype: Union[str, np.dtype] = np.float64) -> Batch:
    if not samples:
        raise DataError("cannot batch zero samples")
    sizes = {s.size for s in samples}
    if len(sizes) != 1:
        raise DataError("samples in a batch must share one size", {"sizes": sorted(sizes)})

    def stack(arrays):
        return np.concatenate(arrays, axis=0).astype(dtype)

    alpha = stack([s.alpha for s in samples])
    with_fg_bg = all(s.has_fg_bg for s in samples)
    return Batch(
        ids=[s.id for s in samples],
        image=stack([s.image for s in samples]),
        alpha=alpha,
        semantic=semantic_target(alpha).astype(dtype),
        mask=transition_mask(alpha, band_radius),
        fg=stack([s.fg for s in samples]) if with_fg_bg else None,
        bg=stack([s.bg for s in samples]) if with_fg_bg else None,
    )
