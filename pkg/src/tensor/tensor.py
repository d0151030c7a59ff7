"""
Tensor4 and the gradient tape
Dense (batch, channel, height, width) arrays with reverse-mode differentiation
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import GradientError, ShapeMismatchError

logger = logging.getLogger(__name__)

Scalar = Union[int, float]


class Tensor4:
    """Rank-4 array value, optionally tracked on a GradTape"""

    __slots__ = ("data", "tape", "vid", "name")

    def __init__(self, data: Any, tape: Optional["GradTape"] = None,
                 vid: Optional[int] = None, name: Optional[str] = None):
        array = np.asarray(data)
        if array.ndim != 4:
            raise ShapeMismatchError("Tensor4", "expected rank-4 data (n, c, h, w)", shape=array.shape)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data = array
        self.tape = tape
        self.vid = vid
        self.name = name

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return self.data.shape

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def c(self) -> int:
        return self.data.shape[1]

    @property
    def h(self) -> int:
        return self.data.shape[2]

    @property
    def w(self) -> int:
        return self.data.shape[3]

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatchError("item", "only scalar tensors convert to float", shape=self.shape)
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor4":
        return Tensor4(self.data)

    @staticmethod
    def scalar(value: Scalar, dtype: Any = np.float64) -> "Tensor4":
        return Tensor4(np.full((1, 1, 1, 1), value, dtype=dtype))

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor4(shape={self.shape}, dtype={self.dtype}{label}, tracked={self.tracked})"

    # Arithmetic dispatches to the recorded primitives in src.tensor.ops

    def __add__(self, other):
        from src.tensor import ops
        if isinstance(other, Tensor4):
            return ops.add(self, other)
        return ops.affine(self, 1.0, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        from src.tensor import ops
        if isinstance(other, Tensor4):
            return ops.sub(self, other)
        return ops.affine(self, 1.0, -float(other))

    def __rsub__(self, other):
        from src.tensor import ops
        return ops.affine(self, -1.0, float(other))

    def __mul__(self, other):
        from src.tensor import ops
        if isinstance(other, Tensor4):
            return ops.mul(self, other)
        return ops.affine(self, float(other), 0.0)

    __rmul__ = __mul__

    def __neg__(self):
        from src.tensor import ops
        return ops.affine(self, -1.0, 0.0)


def as_tensor(value: Any) -> Tensor4:
    """Wrap arrays as untracked tensors; pass tensors through"""
    return value if isinstance(value, Tensor4) else Tensor4(value)


@dataclass
class TapeRecord:
    """One primitive application"""
    fn: "Function"
    inputs: Tuple[Optional[int], ...]
    output: int


class GradTape:
    """Ordered record of primitive applications with gradient buffers"""

    def __init__(self):
        self.records: List[TapeRecord] = []
        self.grads: Dict[int, np.ndarray] = {}
        self._shapes: Dict[int, Tuple[int, ...]] = {}
        self._leaves: Dict[int, Tensor4] = {}
        self._named: Dict[str, Tensor4] = {}
        self._next_vid = 0

    def _new_vid(self, shape: Tuple[int, ...]) -> int:
        vid = self._next_vid
        self._next_vid += 1
        self._shapes[vid] = tuple(shape)
        return vid

    def watch(self, data: Any, name: Optional[str] = None) -> Tensor4:
        """Register a leaf value; a name already watched returns the same leaf"""
        if name is not None and name in self._named:
            return self._named[name]
        raw = data.data if isinstance(data, Tensor4) else data
        leaf = Tensor4(raw, tape=self, name=name)
        leaf.vid = self._new_vid(leaf.shape)
        self._leaves[leaf.vid] = leaf
        if name is not None:
            self._named[name] = leaf
        return leaf

    def record(self, fn: "Function", inputs: Sequence[Tensor4], out: np.ndarray) -> Tensor4:
        result = Tensor4(out, tape=self)
        result.vid = self._new_vid(result.shape)
        ids = tuple(t.vid if t.tape is self else None for t in inputs)
        self.records.append(TapeRecord(fn=fn, inputs=ids, output=result.vid))
        return result

    @property
    def named_leaves(self) -> Dict[str, Tensor4]:
        return dict(self._named)

    def _accumulate(self, vid: int, grad: np.ndarray):
        expected = self._shapes[vid]
        if grad.shape != expected:
            raise ShapeMismatchError("backward", "gradient shape differs from value shape",
                                     gradient=grad.shape, value=expected)
        if vid in self.grads:
            self.grads[vid] = self.grads[vid] + grad
        else:
            self.grads[vid] = grad

    def backward(self, loss: Tensor4) -> Dict[int, np.ndarray]:
        """Propagate d(loss)/d(value) to every leaf, in reverse record order"""
        if loss.tape is not self:
            raise GradientError("loss was not recorded on this tape")
        if loss.shape != (1, 1, 1, 1):
            raise GradientError("loss must be a scalar tensor of shape (1, 1, 1, 1)",
                                {"shape": loss.shape})
        self.grads = {}
        self._accumulate(loss.vid, np.ones(loss.shape, dtype=loss.dtype))
        for record in reversed(self.records):
            upstream = self.grads.pop(record.output, None)
            if upstream is None:
                continue
            input_grads = record.fn.backward(upstream)
            for vid, grad in zip(record.inputs, input_grads):
                if vid is None or grad is None:
                    continue
                self._accumulate(vid, grad)
        logger.debug("backward over %d records, %d leaf gradients", len(self.records), len(self.grads))
        return self.grads

    def grad(self, tensor: Tensor4) -> np.ndarray:
        """Gradient of a leaf; zeros when the loss does not depend on it"""
        if tensor.tape is not self or tensor.vid not in self._leaves:
            raise GradientError("gradients are kept only for leaves watched on this tape",
                                {"tensor": repr(tensor)})
        found = self.grads.get(tensor.vid)
        return found if found is not None else np.zeros(tensor.shape, dtype=tensor.dtype)

    def named_grads(self) -> Dict[str, np.ndarray]:
        return {name: self.grad(leaf) for name, leaf in self._named.items()}


class Function:
    """Differentiable primitive: forward on arrays, vector-Jacobian products on backward"""

    name = "function"

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__}.forward")

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError(f"{type(self).__name__}.backward")

    @classmethod
    def apply(cls, *tensors: Tensor4, **kwargs: Any) -> Tensor4:
        tapes = {id(t.tape): t.tape for t in tensors if t.tape is not None}
        if len(tapes) > 1:
            raise GradientError(f"{cls.name}: inputs recorded on different tapes")
        fn = cls()
        out = fn.forward(*(t.data for t in tensors), **kwargs)
        if not tapes:
            return Tensor4(out)
        tape = next(iter(tapes.values()))
        return tape.record(fn, tensors, out)


def backward(tape: GradTape, loss: Tensor4) -> Dict[str, np.ndarray]:
    """Run the backward pass and return gradients of all named leaves"""
    tape.backward(loss)
    return tape.named_grads()
