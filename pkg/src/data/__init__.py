"""
Matting data: compositing, supervision targets, synthetic generation and file I/O
"""

from src.data.compositing import COMPOSITE_TOLERANCE, MattingSample, composite
from src.data.dataset import (
    Batch, augment, holdout_split, load_dataset, make_batch, random_crop, random_flip, read_index, save_dataset,
)
from src.data.image_io import read_alpha, read_image, to_uint8, write_image
from src.data.synth import SynthConfig, generate_sample, quantize, sample_id, synth_dataset
from src.data.targets import DEFAULT_BAND_RADIUS, dilate, erode, semantic_target, transition_mask

__all__ = [
    "COMPOSITE_TOLERANCE", "MattingSample", "composite",
    "Batch", "augment", "holdout_split", "load_dataset", "make_batch", "random_crop", "random_flip",
    "read_index", "save_dataset",
    "read_alpha", "read_image", "to_uint8", "write_image",
    "SynthConfig", "generate_sample", "quantize", "sample_id", "synth_dataset",
    "DEFAULT_BAND_RADIUS", "dilate", "erode", "semantic_target", "transition_mask",
]
