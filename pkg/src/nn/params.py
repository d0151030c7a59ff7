"""
Parameter storage and the checkpoint file format
Parameters are created lazily on first use, seeded per name
"""

import json
import logging
import math
import struct
import zlib
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple, Union

import numpy as np

from src.core.errors import CheckpointError, ConfigError, ShapeMismatchError
from src.tensor.tensor import GradTape, Tensor4

logger = logging.getLogger(__name__)

MAGIC = b"SGMN"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
TENSOR_KINDS = ("param", "momentum")


class ParamStore:
    """Ordered name -> (tensor, momentum buffer) map with deterministic initialization"""

    def __init__(self, seed: int = 0, dtype: Union[str, np.dtype] = "float32"):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self._params: Dict[str, np.ndarray] = {}
        self._momentum: Dict[str, np.ndarray] = {}

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name]

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def momentum(self, name: str) -> np.ndarray:
        return self._momentum[name]

    def _initial_value(self, name: str, shape: Tuple[int, ...], init: str, fan_in: Optional[int]) -> np.ndarray:
        if init == "zeros":
            return np.zeros(shape, dtype=self.dtype)
        if init == "ones":
            return np.ones(shape, dtype=self.dtype)
        if init != "he":
            raise ConfigError(f"unknown initializer '{init}'")
        # He-uniform; the stream depends only on (seed, name) so creation order is irrelevant
        rng = np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])
        fan = fan_in if fan_in else int(np.prod(shape[1:]))
        bound = np.sqrt(6.0 / fan)
        return rng.uniform(-bound, bound, size=shape).astype(self.dtype)

    def get(self, name: str, shape: Tuple[int, ...], init: str = "he",
            fan_in: Optional[int] = None) -> np.ndarray:
        """Return the named array, creating it on first request"""
        shape = tuple(int(s) for s in shape)
        existing = self._params.get(name)
        if existing is not None:
            if existing.shape != shape:
                raise ShapeMismatchError("ParamStore.get", f"parameter '{name}' exists with another shape",
                                         existing=existing.shape, requested=shape)
            return existing
        value = self._initial_value(name, shape, init, fan_in)
        self._params[name] = value
        self._momentum[name] = np.zeros_like(value)
        return value

    def variable(self, name: str, shape: Tuple[int, ...], tape: Optional[GradTape] = None,
                 init: str = "he", fan_in: Optional[int] = None) -> Tensor4:
        """The named parameter as a Tensor4, watched on tape when one is given"""
        array = self.get(name, shape, init=init, fan_in=fan_in)
        if tape is None:
            return Tensor4(array, name=name)
        return tape.watch(array, name=name)

    def set(self, name: str, value: np.ndarray, momentum: Optional[np.ndarray] = None):
        """Overwrite (or create) a parameter; the shape must match an existing entry"""
        value = np.array(value, dtype=self.dtype)
        existing = self._params.get(name)
        if existing is not None and existing.shape != value.shape:
            raise ShapeMismatchError("ParamStore.set", f"parameter '{name}' exists with another shape",
                                     existing=existing.shape, requested=value.shape)
        if existing is not None:
            existing[...] = value
        else:
            self._params[name] = value
        buffer = np.zeros_like(value) if momentum is None else np.array(momentum, dtype=self.dtype)
        if buffer.shape != value.shape:
            raise ShapeMismatchError("ParamStore.set", "momentum shape differs from parameter",
                                     momentum=buffer.shape, parameter=value.shape)
        if name in self._momentum:
            self._momentum[name][...] = buffer
        else:
            self._momentum[name] = buffer

    def count(self) -> int:
        return int(sum(p.size for p in self._params.values()))


def _le_dtype(dtype: np.dtype) -> np.dtype:
    return np.dtype(dtype).newbyteorder("<")


def save_checkpoint(path: Union[str, Path], params: ParamStore, config: Optional[Dict[str, Any]] = None):
    """Write magic, format version, JSON manifest, then raw little-endian tensors"""
    entries = []
    blobs = []
    for kind, source in zip(TENSOR_KINDS, (params._params, params._momentum)):
        for name, array in source.items():
            entries.append({"name": name, "kind": kind, "shape": list(array.shape), "dtype": array.dtype.name})
            blobs.append(np.ascontiguousarray(array, dtype=_le_dtype(array.dtype)).tobytes())
    manifest = {
        "format_version": FORMAT_VERSION,
        "seed": params.seed,
        "dtype": params.dtype.name,
        "config": config or {},
        "tensors": entries,
    }
    encoded = json.dumps(manifest, ensure_ascii=False).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(encoded)))
        f.write(encoded)
        for blob in blobs:
            f.write(blob)
    logger.debug("saved %d tensors to %s", len(entries), path)


def load_checkpoint(path: Union[str, Path]) -> Tuple[ParamStore, Dict[str, Any]]:
    """Read a checkpoint; returns the parameter store and the manifest config"""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e}", {"path": str(path)}) from e
    if len(raw) < _HEADER.size:
        raise CheckpointError("checkpoint truncated", {"path": str(path)})
    magic, version, length = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError("not an SGMN checkpoint", {"path": str(path), "magic": magic})
    if version != FORMAT_VERSION:
        raise CheckpointError("unsupported checkpoint version", {"path": str(path), "version": version})
    offset = _HEADER.size
    try:
        manifest = json.loads(raw[offset:offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt manifest: {e}", {"path": str(path)}) from e
    offset += length
    if not isinstance(manifest, dict) or not isinstance(manifest.get("tensors", []), list):
        raise CheckpointError("manifest must be an object with a tensor list", {"path": str(path)})

    try:
        params = ParamStore(seed=int(manifest.get("seed", 0)), dtype=_float_dtype(manifest.get("dtype", "float32")))
    except (TypeError, ValueError) as e:
        raise CheckpointError(f"bad manifest header: {e}", {"path": str(path)}) from e
    loaded: Dict[str, Dict[str, np.ndarray]] = {kind: {} for kind in TENSOR_KINDS}
    for index, entry in enumerate(manifest.get("tensors", [])):
        name, kind, shape, dtype = _parse_entry(entry, index, path)
        count = math.prod(shape)
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(raw):
            raise CheckpointError("tensor data truncated", {"path": str(path), "tensor": name})
        array = np.frombuffer(raw, dtype=_le_dtype(dtype), count=count, offset=offset)
        loaded[kind][name] = array.reshape(shape).astype(dtype)
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError("trailing bytes after tensor data", {"path": str(path)})
    orphans = sorted(set(loaded["momentum"]) - set(loaded["param"]))
    if orphans:
        raise CheckpointError("momentum entries without a parameter", {"path": str(path), "names": orphans[:5]})
    try:
        for name, value in loaded["param"].items():
            params.set(name, value, loaded["momentum"].get(name))
    except ShapeMismatchError as e:
        raise CheckpointError(f"inconsistent tensors: {e}", {"path": str(path)}) from e
    return params, manifest.get("config", {})


def _float_dtype(value: Any) -> np.dtype:
    dtype = np.dtype(value)
    if not np.issubdtype(dtype, np.floating):
        raise ValueError(f"tensor dtype must be floating, got {dtype.name}")
    return dtype


def _parse_entry(entry: Any, index: int, path: Path) -> Tuple[str, str, Tuple[int, ...], np.dtype]:
    """Validated (name, kind, shape, dtype) of one manifest tensor entry"""
    details = {"path": str(path), "entry": index}
    if not isinstance(entry, dict):
        raise CheckpointError("manifest tensor entry is not an object", details)
    missing = [key for key in ("name", "kind", "shape", "dtype") if key not in entry]
    if missing:
        raise CheckpointError("manifest tensor entry lacks keys", {**details, "missing": missing})
    name, kind, shape = entry["name"], entry["kind"], entry["shape"]
    if not isinstance(name, str):
        raise CheckpointError("tensor name must be a string", details)
    if kind not in TENSOR_KINDS:
        raise CheckpointError(f"unknown tensor kind '{kind}'", {**details, "choices": list(TENSOR_KINDS)})
    if not isinstance(shape, list) or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0
                                              for s in shape):
        raise CheckpointError("tensor shape must be a list of non-negative integers", {**details, "shape": shape})
    try:
        dtype = _float_dtype(entry["dtype"])
    except (TypeError, ValueError) as e:
        raise CheckpointError(f"bad tensor dtype: {e}", {**details, "dtype": entry["dtype"]}) from e
    return name, kind, tuple(shape), dtype
