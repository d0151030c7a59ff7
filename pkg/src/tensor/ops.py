"""
Differentiable primitives on Tensor4
Convolution, resampling, pooling, group normalization, activations, channel concat and elementwise arithmetic
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from src.core.errors import ConfigError, ShapeMismatchError
from src.tensor.tensor import Function, Tensor4, as_tensor


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand shape"""
    if grad.shape == shape:
        return grad
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    return grad.sum(axis=axes, keepdims=True).reshape(shape)


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

class Conv2dFn(Function):
    name = "conv2d"

    def forward(self, x, weight, bias=None, stride=1, padding=0):
        padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        kh, kw = weight.shape[2], weight.shape[3]
        windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if bias is not None:
            out = out + bias
        self.windows = windows
        self.weight = weight
        self.x_shape = x.shape
        self.padded_shape = padded.shape
        self.stride = stride
        self.padding = padding
        self.has_bias = bias is not None
        return np.ascontiguousarray(out)

    def backward(self, grad):
        weight, stride, pad = self.weight, self.stride, self.padding
        kh, kw = weight.shape[2], weight.shape[3]
        oh, ow = grad.shape[2], grad.shape[3]
        grad_w = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))
        cols = np.tensordot(grad, weight, axes=([1], [0]))  # n, oh, ow, c, kh, kw
        grad_padded = np.zeros(self.padded_shape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                grad_padded[:, :, i:i + stride * (oh - 1) + 1:stride, j:j + stride * (ow - 1) + 1:stride] += \
                    cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        h, w = self.x_shape[2], self.x_shape[3]
        grad_x = grad_padded[:, :, pad:pad + h, pad:pad + w] if pad else grad_padded
        grads = [np.ascontiguousarray(grad_x), grad_w]
        if self.has_bias:
            grads.append(grad.sum(axis=(0, 2, 3)).reshape(1, -1, 1, 1))
        return grads


def conv2d(x: Tensor4, weight: Tensor4, bias: Optional[Tensor4] = None,
           stride: int = 1, padding: int = 0) -> Tensor4:
    """Zero-padded 2-D convolution; weight is (outC, inC, kh, kw), bias (1, outC, 1, 1)"""
    x, weight = as_tensor(x), as_tensor(weight)
    out_c, in_c, kh, kw = weight.shape
    if x.c != in_c:
        raise ShapeMismatchError("conv2d", "input channels do not match weight", x=x.shape, weight=weight.shape)
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeMismatchError("conv2d", "kernel sizes must be odd", weight=weight.shape)
    if stride < 1 or padding < 0:
        raise ShapeMismatchError("conv2d", "stride must be >= 1 and padding >= 0", stride=stride, padding=padding)
    if x.h + 2 * padding < kh or x.w + 2 * padding < kw:
        raise ShapeMismatchError("conv2d", "kernel larger than padded input", x=x.shape, weight=weight.shape)
    if bias is None:
        return Conv2dFn.apply(x, weight, stride=stride, padding=padding)
    bias = as_tensor(bias)
    if bias.shape != (1, out_c, 1, 1):
        raise ShapeMismatchError("conv2d", "bias must have shape (1, outC, 1, 1)", bias=bias.shape, weight=weight.shape)
    return Conv2dFn.apply(x, weight, bias, stride=stride, padding=padding)


# ---------------------------------------------------------------------------
# Resampling and pooling
# ---------------------------------------------------------------------------

def bilinear_matrix(size: int, factor: int, dtype=np.float64) -> np.ndarray:
    """Interpolation matrix (size*factor, size) for align-corners=false upsampling"""
    out = size * factor
    src = (np.arange(out, dtype=np.float64) + 0.5) / factor - 0.5
    src = np.clip(src, 0.0, None)
    lower = np.minimum(np.floor(src).astype(np.int64), size - 1)
    upper = np.minimum(lower + 1, size - 1)
    frac = src - lower
    matrix = np.zeros((out, size), dtype=np.float64)
    rows = np.arange(out)
    np.add.at(matrix, (rows, lower), 1.0 - frac)
    np.add.at(matrix, (rows, upper), frac)
    return matrix.astype(dtype)


class UpsampleNearestFn(Function):
    name = "upsample_nearest"

    def forward(self, x, factor=1):
        self.factor = factor
        return np.repeat(np.repeat(x, factor, axis=2), factor, axis=3)

    def backward(self, grad):
        f = self.factor
        n, c, h, w = grad.shape
        return [grad.reshape(n, c, h // f, f, w // f, f).sum(axis=(3, 5))]


class UpsampleBilinearFn(Function):
    name = "upsample_bilinear"

    def forward(self, x, factor=1):
        self.rows = bilinear_matrix(x.shape[2], factor, x.dtype)
        self.cols = bilinear_matrix(x.shape[3], factor, x.dtype)
        return np.matmul(np.matmul(self.rows, x), self.cols.T)

    def backward(self, grad):
        return [np.matmul(np.matmul(self.rows.T, grad), self.cols)]


def upsample(x: Tensor4, factor: int, mode: str = "bilinear") -> Tensor4:
    """Integer-factor upsampling, nearest or bilinear (align-corners=false)"""
    x = as_tensor(x)
    if factor < 1:
        raise ShapeMismatchError("upsample", "factor must be >= 1", factor=factor)
    if mode == "nearest":
        return UpsampleNearestFn.apply(x, factor=factor)
    if mode == "bilinear":
        return UpsampleBilinearFn.apply(x, factor=factor)
    raise ShapeMismatchError("upsample", f"unknown mode '{mode}'", mode=mode)


class AvgPoolFn(Function):
    name = "avg_pool"

    def forward(self, x, k=1):
        self.k = k
        n, c, h, w = x.shape
        return x.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def backward(self, grad):
        k = self.k
        spread = np.repeat(np.repeat(grad, k, axis=2), k, axis=3)
        return [spread / (k * k)]


def avg_pool(x: Tensor4, k: int) -> Tensor4:
    """Non-overlapping k x k mean pooling; dims must divide evenly"""
    x = as_tensor(x)
    if k < 1:
        raise ShapeMismatchError("avg_pool", "window must be >= 1", k=k)
    if x.h % k or x.w % k:
        raise ShapeMismatchError("avg_pool", f"spatial dims not divisible by {k}; crop the input first",
                                 x=x.shape, k=k)
    return AvgPoolFn.apply(x, k=k)


class GlobalAvgPoolFn(Function):
    name = "global_avg_pool"

    def forward(self, x):
        self.spatial = x.shape[2:]
        return x.mean(axis=(2, 3), keepdims=True)

    def backward(self, grad):
        h, w = self.spatial
        return [np.broadcast_to(grad / (h * w), grad.shape[:2] + (h, w)).copy()]


def global_avg_pool(x: Tensor4) -> Tensor4:
    return GlobalAvgPoolFn.apply(as_tensor(x))


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

class GroupNormFn(Function):
    name = "group_norm"

    def forward(self, x, gamma, beta, groups=1, eps=1e-5):
        n, c, h, w = x.shape
        grouped = x.reshape(n, groups, -1)
        mean = grouped.mean(axis=2, keepdims=True)
        var = grouped.var(axis=2, keepdims=True)
        self.inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype, copy=False)
        self.x_hat = ((grouped - mean) * self.inv_std).reshape(n, c, h, w)
        self.gamma = gamma
        self.groups = groups
        return self.x_hat * gamma + beta

    def backward(self, grad):
        n, c, h, w = grad.shape
        grad_gamma = (grad * self.x_hat).sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
        grad_beta = grad.sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
        d_hat = (grad * self.gamma).reshape(n, self.groups, -1)
        x_hat = self.x_hat.reshape(n, self.groups, -1)
        grad_x = self.inv_std * (d_hat - d_hat.mean(axis=2, keepdims=True)
                                 - x_hat * (d_hat * x_hat).mean(axis=2, keepdims=True))
        return [grad_x.reshape(n, c, h, w), grad_gamma, grad_beta]


def group_norm(x: Tensor4, gamma: Tensor4, beta: Tensor4, groups: int, eps: float = 1e-5) -> Tensor4:
    """
    Per-sample normalization over channel groups, then a per-channel affine map.

    Statistics come from each sample alone, so the result does not depend on
    the batch and training and inference behave the same.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if groups < 1 or x.c % groups:
        raise ShapeMismatchError("group_norm", f"channels not divisible into {groups} groups",
                                 x=x.shape, groups=groups)
    for label, t in (("gamma", gamma), ("beta", beta)):
        if t.shape != (1, x.c, 1, 1):
            raise ShapeMismatchError("group_norm", f"{label} must be (1, c, 1, 1)", x=x.shape, **{label: t.shape})
    return GroupNormFn.apply(x, gamma, beta, groups=groups, eps=eps)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

class ReluFn(Function):
    name = "relu"

    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad):
        return [grad * self.mask]


class SigmoidFn(Function):
    name = "sigmoid"

    def forward(self, x):
        self.out = expit(x)
        return self.out

    def backward(self, grad):
        return [grad * self.out * (1 - self.out)]


class ChannelSoftmaxFn(Function):
    name = "channel_softmax"

    def forward(self, x):
        shifted = np.exp(x - x.max(axis=1, keepdims=True))
        self.out = shifted / shifted.sum(axis=1, keepdims=True)
        return self.out

    def backward(self, grad):
        y = self.out
        return [y * (grad - (grad * y).sum(axis=1, keepdims=True))]


class ClipFn(Function):
    name = "clip"

    def forward(self, x, low=0.0, high=1.0):
        self.inside = (x > low) & (x < high)
        return np.clip(x, low, high)

    def backward(self, grad):
        return [grad * self.inside]


def relu(x: Tensor4) -> Tensor4:
    return ReluFn.apply(as_tensor(x))


def sigmoid(x: Tensor4) -> Tensor4:
    return SigmoidFn.apply(as_tensor(x))


def clip(x: Tensor4, low: float, high: float) -> Tensor4:
    """Clamp to [low, high]; clamped entries pass no gradient"""
    if not low < high:
        raise ConfigError("clip bounds must satisfy low < high", {"low": low, "high": high})
    return ClipFn.apply(as_tensor(x), low=low, high=high)


def channel_softmax(x: Tensor4) -> Tensor4:
    """Softmax over the channel axis at every (n, h, w)"""
    x = as_tensor(x)
    if x.c < 2:
        raise ShapeMismatchError("channel_softmax", "needs at least 2 channels", x=x.shape)
    return ChannelSoftmaxFn.apply(x)


# ---------------------------------------------------------------------------
# Channel plumbing
# ---------------------------------------------------------------------------

class ConcatChannelsFn(Function):
    name = "concat_channels"

    def forward(self, *xs):
        self.bounds = np.cumsum([0] + [x.shape[1] for x in xs])
        return np.concatenate(xs, axis=1)

    def backward(self, grad):
        b = self.bounds
        return [grad[:, b[i]:b[i + 1]] for i in range(len(b) - 1)]


def concat_channels(xs: Sequence[Tensor4]) -> Tensor4:
    """Concatenate along channels; every input must share n, h, w"""
    tensors = [as_tensor(x) for x in xs]
    if not tensors:
        raise ShapeMismatchError("concat_channels", "needs at least one input")
    ref = tensors[0].shape
    for index, t in enumerate(tensors[1:], start=1):
        if (t.n, t.h, t.w) != (ref[0], ref[2], ref[3]):
            raise ShapeMismatchError("concat_channels", f"input {index} differs in n/h/w from input 0",
                                     index=index, first=ref, offending=t.shape)
    return ConcatChannelsFn.apply(*tensors)


class SliceChannelsFn(Function):
    name = "slice_channels"

    def forward(self, x, start=0, stop=None):
        self.in_shape = x.shape
        self.start, self.stop = start, stop
        return x[:, start:stop].copy()

    def backward(self, grad):
        full = np.zeros(self.in_shape, dtype=grad.dtype)
        full[:, self.start:self.stop] = grad
        return [full]


def slice_channels(x: Tensor4, start: int, stop: int) -> Tensor4:
    x = as_tensor(x)
    if not 0 <= start < stop <= x.c:
        raise ShapeMismatchError("slice_channels", "invalid channel range", x=x.shape, start=start, stop=stop)
    return SliceChannelsFn.apply(x, start=start, stop=stop)


# ---------------------------------------------------------------------------
# Elementwise arithmetic and reductions
# ---------------------------------------------------------------------------

def _check_broadcast(op: str, a: Tensor4, b: Tensor4):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(op, "operands do not broadcast", left=a.shape, right=b.shape) from None


class AddFn(Function):
    name = "add"

    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return [_unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])]


class SubFn(Function):
    name = "sub"

    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return [_unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])]


class MulFn(Function):
    name = "mul"

    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return [_unbroadcast(grad * self.b, self.a.shape), _unbroadcast(grad * self.a, self.b.shape)]


class AffineFn(Function):
    name = "affine"

    def forward(self, x, scale=1.0, shift=0.0):
        self.scale = scale
        return (x * scale + shift).astype(x.dtype, copy=False)

    def backward(self, grad):
        return [grad * self.scale]


class AbsFn(Function):
    name = "abs"

    def forward(self, x):
        self.sign = np.sign(x)
        return np.abs(x)

    def backward(self, grad):
        return [grad * self.sign]


class SquareFn(Function):
    name = "square"

    def forward(self, x):
        self.x = x
        return x * x

    def backward(self, grad):
        return [2 * grad * self.x]


class SumFn(Function):
    name = "sum"

    def forward(self, x):
        self.in_shape = x.shape
        return x.sum().reshape(1, 1, 1, 1)

    def backward(self, grad):
        return [np.broadcast_to(grad.reshape(1, 1, 1, 1), self.in_shape).copy()]


def add(a: Tensor4, b: Tensor4) -> Tensor4:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return AddFn.apply(a, b)


def sub(a: Tensor4, b: Tensor4) -> Tensor4:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return SubFn.apply(a, b)


def mul(a: Tensor4, b: Tensor4) -> Tensor4:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return MulFn.apply(a, b)


def affine(x: Tensor4, scale: float, shift: float = 0.0) -> Tensor4:
    """y = scale * x + shift"""
    return AffineFn.apply(as_tensor(x), scale=scale, shift=shift)


def abs_(x: Tensor4) -> Tensor4:
    return AbsFn.apply(as_tensor(x))


def square(x: Tensor4) -> Tensor4:
    return SquareFn.apply(as_tensor(x))


def sum_all(x: Tensor4) -> Tensor4:
    return SumFn.apply(as_tensor(x))


def mean_all(x: Tensor4) -> Tensor4:
    x = as_tensor(x)
    return affine(sum_all(x), 1.0 / x.data.size)


def replicate_channels(x: Tensor4, copies: int) -> Tensor4:
    return concat_channels([x] * copies)

