"""Checkpoint archive: JSON header plus concatenated raw float32 blobs.

Layout: an 8-byte little-endian header length, the UTF-8 JSON header
(format version, master seed, training step, free-form config, optimizer
state, tensor directory with byte offsets), then every tensor's raw
little-endian float32 data back to back. Save/load roundtrips bit-exactly.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from ..errors import CheckpointError
from .params import ParameterSet

FORMAT_VERSION = 1
_LEN = struct.Struct("<Q")


@dataclasses.dataclass
class Checkpoint:
    """Decoded archive contents."""

    seed: int
    step: int
    config: dict
    step_count: int
    tensors: dict

    def restore(self, params: ParameterSet) -> None:
        params.load_state_arrays(self.tensors, self.step_count)


def save_checkpoint(path, params: ParameterSet, *, seed: int = 0, step: int = 0, config=None):
    """Write the parameter set (values + moments) to ``path``."""
    directory = []
    blobs = []
    offset = 0
    for name, array in params.state_arrays().items():
        raw = np.ascontiguousarray(array, dtype="<f4").tobytes()
        directory.append({"name": name, "shape": list(array.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "seed": int(seed),
        "step": int(step),
        "config": dict(config or {}),
        "optimizer": {"step_count": int(params.step_count)},
        "tensors": directory,
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(_LEN.pack(len(encoded)))
        handle.write(encoded)
        for raw in blobs:
            handle.write(raw)
    return path


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as handle:
        payload = handle.read()
    if len(payload) < _LEN.size:
        raise CheckpointError(f"{path}: too short for a header length")
    (header_len,) = _LEN.unpack_from(payload)
    if len(payload) < _LEN.size + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(payload[_LEN.size : _LEN.size + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header ({exc})") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {header.get('format_version')} != {FORMAT_VERSION}"
        )
    blob = payload[_LEN.size + header_len :]
    tensors = {}
    total = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(blob):
            raise CheckpointError(f"{path}: tensor {entry['name']!r} exceeds the data blob")
        tensors[entry["name"]] = np.frombuffer(blob[start:end], dtype="<f4").reshape(shape)
        total = max(total, end)
    if total != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - total} trailing bytes after tensor data")
    return Checkpoint(
        seed=int(header.get("seed", 0)),
        step=int(header.get("step", 0)),
        config=dict(header.get("config", {})),
        step_count=int(header.get("optimizer", {}).get("step_count", 0)),
        tensors=tensors,
    )
