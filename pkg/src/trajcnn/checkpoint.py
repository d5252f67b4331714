"""Binary checkpoint container.

Layout::

    b"TCNN"  version:u8=1  manifest_len:u32le  manifest (UTF-8 JSON)
    tensor data: float32 little-endian, concatenated in manifest order

The manifest is ``{"model_kind", "config", "tensors": [{"tensor_name", "shape"}]}``.
"""
from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .baselines import LstmConfig, LstmModel
from .model import ModelConfig, TrajCnnModel
from .tensor import Tensor

MAGIC = b"TCNN"
VERSION = 1

_KINDS = {
    "cnn": (ModelConfig, TrajCnnModel),
    "lstm": (LstmConfig, LstmModel),
}


class CheckpointError(ValueError):
    pass


def to_bytes(model) -> bytes:
    manifest = {
        "model_kind": model.kind,
        "config": model.config.to_dict(),
        "tensors": [{"tensor_name": n, "shape": list(t.shape)} for n, t in model.params.items()],
    }
    head = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blobs = [np.ascontiguousarray(t.data, dtype="<f4").tobytes() for t in model.params.values()]
    return MAGIC + bytes([VERSION]) + struct.pack("<I", len(head)) + head + b"".join(blobs)


def from_bytes(buf: bytes):
    if len(buf) < 9 or buf[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    if buf[4] != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {buf[4]}")
    (n,) = struct.unpack("<I", buf[5:9])
    if 9 + n > len(buf):
        raise CheckpointError("truncated checkpoint manifest")
    try:
        manifest = json.loads(buf[9:9 + n].decode("utf-8"))
        config_cls, model_cls = _KINDS[manifest["model_kind"]]
        config = config_cls.from_dict(manifest["config"])
        entries = manifest["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CheckpointError(f"corrupt checkpoint manifest: {exc}") from exc

    params = OrderedDict()
    offset = 9 + n
    for e in entries:
        shape = tuple(e["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 4 * count
        if end > len(buf):
            raise CheckpointError(f"missing bytes for tensor {e['tensor_name']!r}")
        data = np.frombuffer(buf, dtype="<f4", count=count, offset=offset).reshape(shape)
        params[e["tensor_name"]] = Tensor(data.astype(np.float32), requires_grad=True, name=e["tensor_name"])
        offset = end
    if offset != len(buf):
        raise CheckpointError(f"{len(buf) - offset} trailing bytes after tensor data")
    return model_cls(config, params)


def save(model, path) -> None:
    Path(path).write_bytes(to_bytes(model))


def load(path):
    return from_bytes(Path(path).read_bytes())
