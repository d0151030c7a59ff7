"""
Parameterized building blocks shared by all branches
"""

import math
from typing import Optional

from src.core.errors import ShapeMismatchError
from src.nn.params import ParamStore
from src.tensor import ops
from src.tensor.tensor import GradTape, Tensor4


def conv(x: Tensor4, params: ParamStore, name: str, out_c: int, k: int = 3, stride: int = 1,
         tape: Optional[GradTape] = None, bias: bool = True) -> Tensor4:
    """Convolution with padding k // 2, no activation"""
    weight = params.variable(f"{name}.weight", (out_c, x.c, k, k), tape, fan_in=x.c * k * k)
    if not bias:
        return ops.conv2d(x, weight, stride=stride, padding=k // 2)
    offset = params.variable(f"{name}.bias", (1, out_c, 1, 1), tape, init="zeros")
    return ops.conv2d(x, weight, offset, stride=stride, padding=k // 2)


def norm(x: Tensor4, params: ParamStore, name: str, groups: int,
         tape: Optional[GradTape] = None) -> Tensor4:
    """Group normalization with learned per-channel scale (ones) and shift (zeros)"""
    gamma = params.variable(f"{name}.gamma", (1, x.c, 1, 1), tape, init="ones")
    beta = params.variable(f"{name}.beta", (1, x.c, 1, 1), tape, init="zeros")
    return ops.group_norm(x, gamma, beta, math.gcd(x.c, groups))


def conv_block(x: Tensor4, params: ParamStore, name: str, out_c: int, k: int = 3, stride: int = 1,
               tape: Optional[GradTape] = None, norm_groups: int = 0) -> Tensor4:
    """
    conv2d followed by ReLU.

    With norm_groups > 0 the convolution drops its bias and is followed by
    group normalization over gcd(out_c, norm_groups) groups.
    """
    if not norm_groups:
        return ops.relu(conv(x, params, name, out_c, k, stride, tape))
    y = conv(x, params, name, out_c, k, stride, tape, bias=False)
    return ops.relu(norm(y, params, f"{name}.norm", norm_groups, tape))


def se_block(x: Tensor4, params: ParamStore, name: str, reduction: int = 4,
             tape: Optional[GradTape] = None) -> Tensor4:
    """
    Squeeze-and-excitation: y = x * sigmoid(W2 relu(W1 gap(x))).

    The two excitation maps are bias-free 1x1 convolutions, so the per-channel
    gates are exactly 0.5 when both weight tensors are zero.
    """
    if reduction < 1 or x.c % reduction:
        raise ShapeMismatchError("se_block", f"channels not divisible by reduction {reduction}",
                                 x=x.shape, reduction=reduction)
    hidden = x.c // reduction
    w1 = params.variable(f"{name}.fc1.weight", (hidden, x.c, 1, 1), tape, fan_in=x.c)
    w2 = params.variable(f"{name}.fc2.weight", (x.c, hidden, 1, 1), tape, fan_in=hidden)
    squeezed = ops.global_avg_pool(x)
    gates = ops.sigmoid(ops.conv2d(ops.relu(ops.conv2d(squeezed, w1)), w2))
    return ops.mul(x, gates)


def down_stage(x: Tensor4, params: ParamStore, name: str, out_c: int, k: int = 3,
               tape: Optional[GradTape] = None, norm_groups: int = 0) -> Tensor4:
    """Stride-2 conv block"""
    return conv_block(x, params, name, out_c, k, stride=2, tape=tape, norm_groups=norm_groups)


def up_stage(x: Tensor4, params: ParamStore, name: str, out_c: int, skip: Optional[Tensor4] = None,
             k: int = 3, mode: str = "bilinear", tape: Optional[GradTape] = None,
             norm_groups: int = 0) -> Tensor4:
    """Upsample x2, optionally concat a skip feature, then a conv block"""
    up = ops.upsample(x, 2, mode)
    if skip is not None:
        if (skip.n, skip.h, skip.w) != (up.n, up.h, up.w):
            raise ShapeMismatchError("up_stage", "skip feature does not match upsampled input",
                                     upsampled=up.shape, skip=skip.shape)
        up = ops.concat_channels([up, skip])
    return conv_block(up, params, name, out_c, k, tape=tape, norm_groups=norm_groups)
