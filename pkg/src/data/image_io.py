"""
8-bit image file I/O
PNG is the primary format; PPM/PGM are accepted as a fallback.
"""

from pathlib import Path
from typing import Any, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from src.core.errors import ImageFormatError
from src.tensor import Tensor4

SUFFIX_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM", ".pnm": "PPM"}

# modes converted on read; anything else (16-bit, float, CMYK) is rejected
_READ_CONVERSIONS = {"L": "L", "RGB": "RGB", "1": "L", "LA": "L", "P": "RGB", "RGBA": "RGB"}


def read_image(path: Union[str, Path]) -> np.ndarray:
    """Read an 8-bit grayscale or RGB file as a (1, c, h, w) float64 array of v/255"""
    path = Path(path)
    try:
        with Image.open(path) as image:
            image.load()
            mode = image.mode
            if mode not in _READ_CONVERSIONS:
                raise ImageFormatError("unsupported image mode, expected 8-bit grayscale or RGB",
                                       {"path": str(path), "mode": mode})
            if mode != _READ_CONVERSIONS[mode]:
                image = image.convert(_READ_CONVERSIONS[mode])
            pixels = np.asarray(image, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        raise ImageFormatError("cannot decode image", {"path": str(path), "reason": str(exc)}) from exc
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    return pixels.transpose(2, 0, 1)[None].astype(np.float64) / 255.0


def read_alpha(path: Union[str, Path]) -> np.ndarray:
    """Read a matte; colour files contribute their first channel"""
    array = read_image(path)
    return array[:, :1] if array.shape[1] != 1 else array


def _planes(tensor: Any) -> np.ndarray:
    array = tensor.numpy() if isinstance(tensor, Tensor4) else np.asarray(tensor, dtype=np.float64)
    if array.ndim == 4:
        if array.shape[0] != 1:
            raise ImageFormatError("can only write a single image", {"shape": array.shape})
        array = array[0]
    if array.ndim == 2:
        array = array[None]
    if array.ndim != 3 or array.shape[0] not in (1, 3):
        raise ImageFormatError("expected 1 or 3 channels", {"shape": array.shape})
    if not np.all(np.isfinite(array)):
        raise ImageFormatError("cannot write non-finite values")
    return array


def to_uint8(array: np.ndarray) -> np.ndarray:
    """[0, 1] floats to 8-bit with round-half-up"""
    return np.floor(np.clip(array, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_image(path: Union[str, Path], tensor: Any):
    """Write a (1, c, h, w), (c, h, w) or (h, w) array in [0, 1] as an 8-bit file"""
    path = Path(path)
    fmt = SUFFIX_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise ImageFormatError("unsupported file extension", {"path": str(path), "supported": sorted(SUFFIX_FORMATS)})
    planes = _planes(tensor)
    pixels = to_uint8(planes.transpose(1, 2, 0))
    if pixels.shape[2] == 1:
        image = Image.fromarray(np.ascontiguousarray(pixels[:, :, 0]))
    else:
        image = Image.fromarray(pixels)
    path.parent.mkdir(parents=True, exist_ok=True)
    image.save(path, format=fmt)
