"""
Matting quality metrics: SAD, MSE, MAD, Grad and Conn
Computed over whole images. SAD, Grad and Conn are reported scaled by 1e-3.
"""

import math
from functools import lru_cache
from typing import Any, Tuple

import numpy as np
from scipy import ndimage

from src.core.errors import ConfigError, DataError, ShapeMismatchError

SCALE = 1000.0
GRAD_SIGMA = 1.4
CONN_STEP = 0.1
CONN_TOLERANCE = 0.15


def _pair(op: str, pred: Any, gt: Any) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(getattr(pred, "data", pred), dtype=np.float64)
    gt = np.asarray(getattr(gt, "data", gt), dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(op, "prediction and ground truth differ", pred=pred.shape, gt=gt.shape)
    for name, array in (("pred", pred), ("gt", gt)):
        if array.size and (not np.all(np.isfinite(array)) or array.min() < 0.0 or array.max() > 1.0):
            raise DataError(f"{op}: {name} must lie in [0, 1]")
    return pred, gt


def _plane(op: str, array: np.ndarray) -> np.ndarray:
    squeezed = np.squeeze(array)
    if squeezed.ndim != 2:
        raise ShapeMismatchError(op, "expected a single-channel matte", shape=array.shape)
    return squeezed


def sad(pred: Any, gt: Any) -> float:
    pred, gt = _pair("sad", pred, gt)
    return float(np.abs(pred - gt).sum() / SCALE)


def mse(pred: Any, gt: Any) -> float:
    pred, gt = _pair("mse", pred, gt)
    return float(np.mean((pred - gt) ** 2))


def mad(pred: Any, gt: Any) -> float:
    pred, gt = _pair("mad", pred, gt)
    return float(np.mean(np.abs(pred - gt)))


def _gauss(x: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-x ** 2 / (2 * sigma ** 2)) / (sigma * math.sqrt(2 * math.pi))


@lru_cache(maxsize=8)
def gaussian_derivative_kernels(sigma: float = GRAD_SIGMA) -> Tuple[np.ndarray, np.ndarray]:
    """First-order Gaussian derivative filters (x, y), truncated at ceil(3 sigma), unit L2 norm"""
    half = int(math.ceil(3 * sigma))
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    smooth = _gauss(offsets, sigma)
    deriv = -offsets * smooth / sigma ** 2
    hx = np.outer(smooth, deriv)
    hx /= np.sqrt(np.sum(hx ** 2))
    hx.setflags(write=False)
    hy = hx.T.copy()
    hy.setflags(write=False)
    return hx, hy


def gradient_magnitude(matte: np.ndarray, sigma: float = GRAD_SIGMA) -> np.ndarray:
    hx, hy = gaussian_derivative_kernels(sigma)
    gx = ndimage.convolve(matte, hx, mode="nearest")
    gy = ndimage.convolve(matte, hy, mode="nearest")
    return np.sqrt(gx ** 2 + gy ** 2)


def grad_metric(pred: Any, gt: Any, sigma: float = GRAD_SIGMA) -> float:
    """sum (|grad pred| - |grad gt|)^2 / 1000 with Gaussian-derivative gradients"""
    pred, gt = _pair("grad", pred, gt)
    pred, gt = _plane("grad", pred), _plane("grad", gt)
    size = gaussian_derivative_kernels(sigma)[0].shape[0]
    if pred.shape[0] < size or pred.shape[1] < size:
        raise ShapeMismatchError("grad", f"matte smaller than the {size}x{size} kernel", shape=pred.shape)
    diff = gradient_magnitude(pred, sigma) - gradient_magnitude(gt, sigma)
    return float(np.sum(diff ** 2) / SCALE)


def conn_thresholds(step: float) -> np.ndarray:
    count = int(math.ceil(1.0 / step - 1e-9))
    return np.minimum(np.arange(count + 1) * step, 1.0)


def largest_component(region: np.ndarray) -> np.ndarray:
    """Largest 4-connected component; ties go to the component met first in raster order"""
    labels, count = ndimage.label(region)
    if count == 0:
        return np.zeros_like(region, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    return labels == int(np.argmax(sizes)) + 1


def connectivity_levels(pred: np.ndarray, gt: np.ndarray, step: float = CONN_STEP) -> np.ndarray:
    """Per-pixel level l_i: the last threshold before the pixel leaves the shared largest component"""
    thresholds = conn_thresholds(step)
    levels = np.full(pred.shape, -1.0)
    for i in range(1, len(thresholds)):
        t = thresholds[i]
        omega = largest_component((pred >= t) & (gt >= t))
        levels[(levels == -1.0) & ~omega] = thresholds[i - 1]
    levels[levels == -1.0] = 1.0
    return levels


def conn_metric(pred: Any, gt: Any, step: float = CONN_STEP) -> float:
    if not 0.0 < step < 1.0:
        raise ConfigError("conn step must lie in (0, 1)", {"step": step})
    pred, gt = _pair("conn", pred, gt)
    pred, gt = _plane("conn", pred), _plane("conn", gt)
    levels = connectivity_levels(pred, gt, step)
    pred_d, gt_d = pred - levels, gt - levels
    pred_phi = 1.0 - pred_d * (pred_d >= CONN_TOLERANCE)
    gt_phi = 1.0 - gt_d * (gt_d >= CONN_TOLERANCE)
    return float(np.sum(np.abs(pred_phi - gt_phi)) / SCALE)
