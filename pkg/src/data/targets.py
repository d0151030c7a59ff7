"""
Supervision targets derived from the ground-truth matte
Blurred low-resolution semantic target and the transition-band mask
"""

import numpy as np
from scipy import ndimage

from src.core.errors import ConfigError, ShapeMismatchError

SEMANTIC_DOWNSAMPLE = 16
BLUR_SIGMA = 1.0
BLUR_RADIUS = 2
DEFAULT_BAND_RADIUS = 3


def semantic_target(alpha: np.ndarray) -> np.ndarray:
    """16x16 average-pool downsample, then 5x5 Gaussian blur (sigma 1, reflect padding)"""
    alpha = np.asarray(alpha, dtype=np.float64)
    n, c, h, w = alpha.shape
    k = SEMANTIC_DOWNSAMPLE
    if h % k or w % k:
        raise ShapeMismatchError("semantic_target", f"matte dims must be divisible by {k}", alpha=alpha.shape)
    pooled = alpha.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))
    blurred = ndimage.gaussian_filter(pooled, sigma=(0, 0, BLUR_SIGMA, BLUR_SIGMA),
                                      truncate=BLUR_RADIUS / BLUR_SIGMA, mode="reflect")
    return np.clip(blurred, 0.0, 1.0)


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


def _per_plane(fn, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 2:
        return fn(mask)
    out = np.empty_like(mask)
    for index in np.ndindex(*mask.shape[:-2]):
        out[index] = fn(mask[index])
    return out


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a (2r+1)^2 square; outside the image counts as background"""
    return _per_plane(lambda m: ndimage.binary_dilation(m, structure=_square(radius), border_value=0), mask)


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion with a (2r+1)^2 square; outside the image counts as foreground"""
    return _per_plane(lambda m: ndimage.binary_erosion(m, structure=_square(radius), border_value=1), mask)


def transition_mask(alpha: np.ndarray, band_radius: int = DEFAULT_BAND_RADIUS) -> np.ndarray:
    """
    Binary unknown-region mask m_d with the shape of alpha.

    B = alpha > 0.5; m_d = (dilate(B) and not erode(B)) or (0 < alpha < 1).
    """
    if band_radius < 1:
        raise ConfigError("band_radius must be >= 1", {"band_radius": band_radius})
    alpha = np.asarray(alpha)
    hard = alpha > 0.5
    band = dilate(hard, band_radius) & ~erode(hard, band_radius)
    soft = (alpha > 0.0) & (alpha < 1.0)
    return (band | soft).astype(alpha.dtype if np.issubdtype(alpha.dtype, np.floating) else np.float64)
