"""
Single-image inference: alpha prediction, foreground extraction and background replacement
"""

import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from PIL import Image

from src.core.errors import ShapeMismatchError
from src.data.compositing import composite
from src.data.image_io import read_image, to_uint8, write_image
from src.model.sgmnet import SGMNet, load_model

logger = logging.getLogger(__name__)

SIZE_MULTIPLE = 32


def center_crop(image: np.ndarray, multiple: int = SIZE_MULTIPLE) -> Tuple[np.ndarray, bool]:
    """Crop (n, c, h, w) to the largest centred window whose sides are multiples of `multiple`"""
    h, w = image.shape[2], image.shape[3]
    th, tw = h - h % multiple, w - w % multiple
    if th == 0 or tw == 0:
        raise ShapeMismatchError("center_crop", f"image smaller than {multiple}x{multiple}", image=image.shape)
    if (th, tw) == (h, w):
        return image, False
    top, left = (h - th) // 2, (w - tw) // 2
    logger.warning("cropping %dx%d input to %dx%d", w, h, tw, th)
    return np.ascontiguousarray(image[:, :, top:top + th, left:left + tw]), True


def load_input(path: Union[str, Path]) -> np.ndarray:
    image = read_image(path)
    if image.shape[1] == 1:
        image = np.repeat(image, 3, axis=1)
    image, _ = center_crop(image)
    return image


def predict_alpha(model: SGMNet, image: np.ndarray) -> np.ndarray:
    """(1, 1, h, w) float64 matte for a (1, 3, h, w) image"""
    return model.predict(image).astype(np.float64)


def extract_foreground(image: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """alpha * I over black"""
    return alpha * image


def fit_background(background: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Resize a (1, c, h, w) background to (h, w) = size and give it 3 channels"""
    if background.shape[1] == 1:
        background = np.repeat(background, 3, axis=1)
    if background.shape[2:] == size:
        return background
    logger.warning("resizing background from %dx%d to %dx%d",
                   background.shape[3], background.shape[2], size[1], size[0])
    pixels = to_uint8(background[0].transpose(1, 2, 0))
    resized = Image.fromarray(pixels).resize((size[1], size[0]), Image.Resampling.BILINEAR)
    return np.asarray(resized, dtype=np.float64).transpose(2, 0, 1)[None] / 255.0


def replace_background(image: np.ndarray, alpha: np.ndarray, background: np.ndarray) -> np.ndarray:
    """alpha * I + (1 - alpha) * bg, the input image standing in for the foreground"""
    background = fit_background(background, image.shape[2:])
    return composite(image, background, alpha)


def run_infer(image_path: Union[str, Path], ckpt: Union[str, Path], alpha_out: Union[str, Path],
              foreground_out: Optional[Union[str, Path]] = None) -> np.ndarray:
    model, _ = load_model(ckpt)
    image = load_input(image_path)
    alpha = predict_alpha(model, image)
    write_image(alpha_out, alpha)
    if foreground_out:
        write_image(foreground_out, extract_foreground(image, alpha))
    logger.info("wrote matte %s", alpha_out)
    return alpha


def run_composite(image_path: Union[str, Path], ckpt: Union[str, Path], bg_path: Union[str, Path],
                  out: Union[str, Path]) -> np.ndarray:
    model, _ = load_model(ckpt)
    image = load_input(image_path)
    alpha = predict_alpha(model, image)
    result = replace_background(image, alpha, read_image(bg_path))
    write_image(out, result)
    logger.info("wrote composite %s", out)
    return result
