"""
Tensor core for the SGM-Net toolkit
"""

from src.tensor.tensor import Function, GradTape, Tensor4, as_tensor, backward
from src.tensor.ops import (
    abs_, add, affine, avg_pool, channel_softmax, clip, concat_channels, conv2d,
    global_avg_pool, group_norm, mean_all, mul, relu, replicate_channels, sigmoid,
    slice_channels, square, sub, sum_all, upsample,
)

__all__ = [
    "Function", "GradTape", "Tensor4", "as_tensor", "backward",
    "abs_", "add", "affine", "avg_pool", "channel_softmax", "clip", "concat_channels",
    "conv2d", "global_avg_pool", "group_norm", "mean_all", "mul", "relu", "replicate_channels",
    "sigmoid", "slice_channels", "square", "sub", "sum_all", "upsample",
]
