"""Binary checkpoint container for model parameters and training state.

Layout (all integers little-endian):

    magic      8 bytes  b"METASRCK"
    version    u32
    config     u32 length + UTF-8 text, one "key=<json value>" per line
    count      u32 number of tensors
    index      per tensor: u16 name length, name, u8 dtype code, u8 ndim,
               u32 × ndim dims, u64 offset into data section, u64 byte length
    data       raw little-endian tensor bytes

See docs/checkpoint_format.md.
"""
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .errors import CheckpointError
from .model import MetaSR, ModelConfig
from .optim import Adam, AdamState

MAGIC = b"METASRCK"
FORMAT_VERSION = 1

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR_DTYPE = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}

_FIRST_MOMENT = "adam.m."
_SECOND_MOMENT = "adam.v."


@dataclass
class ModelCheckpoint:
    """Everything needed to rebuild a model and resume its training."""

    model_config: ModelConfig
    params: Dict[str, np.ndarray]
    metadata: Dict[str, object] = field(default_factory=dict)
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def build_model(self) -> MetaSR:
        """Model with this checkpoint's configuration and parameter values."""
        dtypes = {a.dtype for a in self.params.values()}
        dtype = dtypes.pop() if len(dtypes) == 1 else np.float32
        model = MetaSR(self.model_config, rng=None, dtype=dtype)
        params = model.parameters()
        missing = sorted(set(params) - set(self.params))
        extra = sorted(set(self.params) - set(params))
        if missing or extra:
            raise CheckpointError(
                f"checkpoint parameters do not match the configured model "
                f"(missing: {missing or 'none'}, unexpected: {extra or 'none'})"
            )
        for name, p in params.items():
            value = self.params[name]
            if value.shape != p.shape:
                raise CheckpointError(f"parameter '{name}' has shape {value.shape}, model expects {p.shape}")
            p.data = value.astype(p.dtype, copy=True)
        return model

    def build_optimizer(self, model: MetaSR) -> Optional[Adam]:
        """Adam restored to its saved moments, or None if none were saved."""
        if not self.first_moment:
            return None
        optimizer = Adam(model.parameters(), learning_rate=float(self.metadata.get("learning_rate", 1e-4)))
        optimizer.state = AdamState(
            learning_rate=float(self.metadata.get("learning_rate", 1e-4)),
            step_count=int(self.metadata.get("adam_step_count", 0)),
            first_moment={k: v.copy() for k, v in self.first_moment.items()},
            second_moment={k: v.copy() for k, v in self.second_moment.items()},
        )
        return optimizer


def _encode_config(values: Dict[str, object]) -> bytes:
    lines = [f"{key}={json.dumps(value, sort_keys=True)}" for key, value in values.items()]
    return "\n".join(lines).encode("utf-8")


def _decode_config(blob: bytes) -> Dict[str, object]:
    values = {}
    for line in blob.decode("utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"malformed config line in checkpoint: {line!r}")
        values[key] = json.loads(value)
    return values


def save_checkpoint(
    path,
    model: MetaSR,
    optimizer: Adam = None,
    metadata: Dict[str, object] = None,
) -> Path:
    """
    Write model parameters (and optionally Adam moments) to ``path``.

    Args:
        path: Output file
        model: Model to save
        optimizer: Optimizer whose moments should be kept for resuming
        metadata: Training metadata (epoch, step, seed, learning rate, ...)

    Returns:
        Path written
    """
    path = Path(path)
    metadata = dict(metadata or {})
    tensors: Dict[str, np.ndarray] = {name: p.data for name, p in model.parameters().items()}
    if optimizer is not None:
        metadata["adam_step_count"] = optimizer.state.step_count
        metadata["learning_rate"] = optimizer.state.learning_rate
        for name, m in optimizer.state.first_moment.items():
            tensors[_FIRST_MOMENT + name] = m
        for name, v in optimizer.state.second_moment.items():
            tensors[_SECOND_MOMENT + name] = v

    config_blob = _encode_config({"model": model.config.to_dict(), "metadata": metadata})

    index = bytearray()
    data = bytearray()
    for name, array in tensors.items():
        dtype = np.dtype(array.dtype)
        if dtype not in _CODE_FOR_DTYPE:
            raise CheckpointError(f"cannot store tensor '{name}' of dtype {dtype}")
        raw = np.ascontiguousarray(array, dtype=dtype.newbyteorder("<")).tobytes()
        encoded = name.encode("utf-8")
        index += struct.pack("<H", len(encoded)) + encoded
        index += struct.pack("<BB", _CODE_FOR_DTYPE[dtype], array.ndim)
        index += struct.pack(f"<{array.ndim}I", *array.shape)
        index += struct.pack("<QQ", len(data), len(raw))
        data += raw

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(config_blob)))
        f.write(config_blob)
        f.write(struct.pack("<I", len(tensors)))
        f.write(index)
        f.write(data)
    return path


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError("checkpoint file is truncated")
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> ModelCheckpoint:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointError: If the file is missing, malformed or of another format version
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    reader = _Reader(blob)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path} is not a Meta-SR checkpoint (bad magic bytes)")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has checkpoint format version {version}; this build reads version {FORMAT_VERSION}"
        )
    (config_len,) = reader.unpack("<I")
    try:
        config = _decode_config(reader.take(config_len))
        model_config = ModelConfig.from_dict(config["model"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"invalid config block in {path}: {e}") from e

    (count,) = reader.unpack("<I")
    entries = []
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        code, ndim = reader.unpack("<BB")
        if code not in _DTYPE_CODES:
            raise CheckpointError(f"tensor '{name}' has unknown dtype code {code}")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        offset, nbytes = reader.unpack("<QQ")
        entries.append((name, _DTYPE_CODES[code], tuple(shape), offset, nbytes))

    data_start = reader.pos
    params, first, second = {}, {}, {}
    for name, dtype, shape, offset, nbytes in entries:
        start = data_start + offset
        if start + nbytes > len(blob) or nbytes != dtype.itemsize * int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"tensor '{name}' is truncated or has an inconsistent size")
        array = np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize, offset=start)
        array = array.reshape(shape).astype(dtype.newbyteorder("="), copy=True)
        if name.startswith(_FIRST_MOMENT):
            first[name[len(_FIRST_MOMENT):]] = array
        elif name.startswith(_SECOND_MOMENT):
            second[name[len(_SECOND_MOMENT):]] = array
        else:
            params[name] = array

    return ModelCheckpoint(
        model_config=model_config,
        params=params,
        metadata=config.get("metadata", {}),
        first_moment=first,
        second_moment=second,
    )
