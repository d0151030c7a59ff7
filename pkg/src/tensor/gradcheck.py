"""
Finite-difference verification of tape gradients
"""

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.tensor.tensor import GradTape, Tensor4


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||), 0 when both vanish"""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def central_difference(evaluate: Callable[[], float], array: np.ndarray,
                       index: Tuple[int, ...], eps: float) -> float:
    """d evaluate / d array[index], perturbing array in place and restoring it"""
    saved = array[index]
    array[index] = saved + eps
    upper = evaluate()
    array[index] = saved - eps
    lower = evaluate()
    array[index] = saved
    return (upper - lower) / (2.0 * eps)


def check_gradients(fn: Callable[..., Tensor4], inputs: Sequence[np.ndarray],
                    eps: float = 1e-4, samples: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None) -> float:
    """
    Compare tape gradients of a scalar-valued fn against central differences.

    Every input array is watched as a leaf. With samples set, only that many
    random coordinates per input are sampled. Returns the largest relative
    error over the inputs.
    """
    arrays = [np.array(a, dtype=np.float64) for a in inputs]
    tape = GradTape()
    leaves = [tape.watch(a) for a in arrays]
    tape.backward(fn(*leaves))
    analytic = [tape.grad(leaf) for leaf in leaves]

    def evaluate() -> float:
        return fn(*(Tensor4(a) for a in arrays)).item()

    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for array, grad in zip(arrays, analytic):
        coords = _coordinates(array.shape, samples, rng)
        numeric = [central_difference(evaluate, array, idx, eps) for idx in coords]
        sampled = [grad[idx] for idx in coords]
        worst = max(worst, relative_error(np.array(sampled), np.array(numeric)))
    return worst


def check_named_gradients(evaluate: Callable[[], float], arrays: Dict[str, np.ndarray],
                          analytic: Dict[str, np.ndarray],
                          coords: Iterable[Tuple[str, Tuple[int, ...]]],
                          eps: float = 1e-6) -> float:
    """Relative error over a set of (name, index) coordinates of named parameter arrays"""
    sampled: List[float] = []
    numeric: List[float] = []
    for name, idx in coords:
        sampled.append(float(analytic[name][idx]))
        numeric.append(central_difference(evaluate, arrays[name], idx, eps))
    return relative_error(np.array(sampled), np.array(numeric))


def _coordinates(shape: Tuple[int, ...], samples: Optional[int],
                 rng: np.random.Generator) -> List[Tuple[int, ...]]:
    if samples is None or samples >= int(np.prod(shape)):
        return list(np.ndindex(*shape))
    flat = rng.choice(int(np.prod(shape)), size=samples, replace=False)
    return [tuple(int(i) for i in np.unravel_index(f, shape)) for f in flat]
