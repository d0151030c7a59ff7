"""
Linear alpha compositing and the matting sample record
Arrays use the Tensor4 layout (n, c, h, w)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.errors import DataError, ShapeMismatchError

# I = alpha F + (1 - alpha) B holds to within one 8-bit step
COMPOSITE_TOLERANCE = 1.0 / 255.0


def _check_range(name: str, array: np.ndarray):
    if not np.all(np.isfinite(array)):
        raise DataError(f"{name} contains non-finite values")
    low, high = float(array.min()), float(array.max())
    if low < 0.0 or high > 1.0:
        raise DataError(f"{name} must lie in [0, 1]", {"min": low, "max": high})


def composite(fg: np.ndarray, bg: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """I = alpha * F + (1 - alpha) * B, alpha broadcast over colour channels"""
    fg, bg, alpha = np.asarray(fg), np.asarray(bg), np.asarray(alpha)
    if fg.shape != bg.shape:
        raise ShapeMismatchError("composite", "foreground and background differ", fg=fg.shape, bg=bg.shape)
    if alpha.ndim != fg.ndim or alpha.shape[1] != 1 or alpha.shape[:1] + alpha.shape[2:] != fg.shape[:1] + fg.shape[2:]:
        raise ShapeMismatchError("composite", "alpha must be (n, 1, h, w) matching the colour planes",
                                 alpha=alpha.shape, fg=fg.shape)
    for name, array in (("foreground", fg), ("background", bg), ("alpha", alpha)):
        _check_range(name, array)
    blended = alpha * fg + (1.0 - alpha) * bg
    return np.clip(blended, 0.0, 1.0)


@dataclass
class MattingSample:
    """Image, ground-truth matte and optional ground-truth foreground/background"""

    id: str
    image: np.ndarray
    alpha: np.ndarray
    fg: Optional[np.ndarray] = None
    bg: Optional[np.ndarray] = None

    @property
    def size(self):
        return self.image.shape[2], self.image.shape[3]

    @property
    def has_fg_bg(self) -> bool:
        return self.fg is not None and self.bg is not None

    def validate(self) -> "MattingSample":
        n, c, h, w = self.image.shape
        if (n, c) != (1, 3):
            raise ShapeMismatchError("MattingSample", "image must be (1, 3, h, w)", image=self.image.shape)
        if self.alpha.shape != (1, 1, h, w):
            raise ShapeMismatchError("MattingSample", "alpha must be (1, 1, h, w)",
                                     image=self.image.shape, alpha=self.alpha.shape)
        if (self.fg is None) != (self.bg is None):
            raise DataError("foreground and background must be given together", {"id": self.id})
        _check_range("image", self.image)
        _check_range("alpha", self.alpha)
        if self.has_fg_bg:
            error = float(np.abs(composite(self.fg, self.bg, self.alpha) - self.image).max())
            if error > COMPOSITE_TOLERANCE + 1e-9:
                raise DataError("image is not the composite of fg, bg and alpha",
                                {"id": self.id, "max_error": error})
        return self

    def flipped(self) -> "MattingSample":
        """Horizontal mirror of every plane"""
        def flip(array):
            return None if array is None else np.ascontiguousarray(array[..., ::-1])
        return MattingSample(self.id, flip(self.image), flip(self.alpha), flip(self.fg), flip(self.bg))

    def cropped(self, top: int, left: int, size: int) -> "MattingSample":
        def crop(array):
            return None if array is None else np.ascontiguousarray(array[..., top:top + size, left:left + size])
        return MattingSample(self.id, crop(self.image), crop(self.alpha), crop(self.fg), crop(self.bg))
