"""
Tensor checkpoint format.

Layout:
    8 bytes   magic b"EMOLABTN"
    8 bytes   little-endian uint64 header length
    N bytes   UTF-8 JSON header {"tensors": [{"name", "shape", "offset", "count"}], "metadata": {}}
    rest      little-endian float64 values, tensors concatenated in header order

Offsets and counts are in float64 elements. The JSON header is written with
sorted keys and no whitespace so identical tensors give identical bytes.
"""

import hashlib
import json
import struct
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

from lib.errors import ShapeMismatch

MAGIC = b"EMOLABTN"


def serialize_tensors(
    arrays: Mapping[str, np.ndarray], metadata: Optional[Dict[str, Any]] = None
) -> bytes:
    entries = []
    blobs = []
    offset = 0
    for name, array in arrays.items():
        values = np.asarray(array, dtype="<f8")
        entries.append(
            {"name": name, "shape": list(values.shape), "offset": offset, "count": int(values.size)}
        )
        blobs.append(values.tobytes())
        offset += values.size

    header = json.dumps(
        {"tensors": entries, "metadata": metadata or {}}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(blobs)


def deserialize_tensors(payload: bytes) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    if payload[: len(MAGIC)] != MAGIC:
        raise ValueError("Not a tensor checkpoint (bad magic)")
    cursor = len(MAGIC)
    (header_len,) = struct.unpack("<Q", payload[cursor : cursor + 8])
    cursor += 8
    header = json.loads(payload[cursor : cursor + header_len].decode("utf-8"))
    cursor += header_len

    body = np.frombuffer(payload, dtype="<f8", offset=cursor)
    arrays: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start = entry["offset"]
        values = body[start : start + entry["count"]]
        if values.size != entry["count"]:
            raise ValueError(f"Checkpoint truncated while reading '{entry['name']}'")
        arrays[entry["name"]] = values.astype(np.float64).reshape(entry["shape"])
    return arrays, header.get("metadata", {})


def save_tensors(
    path: str, arrays: Mapping[str, np.ndarray], metadata: Optional[Dict[str, Any]] = None
) -> None:
    with open(path, "wb") as f:
        f.write(serialize_tensors(arrays, metadata))


def load_tensors(path: str) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    with open(path, "rb") as f:
        return deserialize_tensors(f.read())


def tensors_digest(arrays: Mapping[str, np.ndarray]) -> str:
    """SHA-256 of the serialized checkpoint bytes."""
    return hashlib.sha256(serialize_tensors(arrays)).hexdigest()


def check_shapes(
    arrays: Mapping[str, np.ndarray], expected: Mapping[str, Tuple[int, ...]]
) -> None:
    """Raise ShapeMismatch unless `arrays` holds exactly the expected names and shapes."""
    missing = sorted(set(expected) - set(arrays))
    unexpected = sorted(set(arrays) - set(expected))
    if missing or unexpected:
        raise ShapeMismatch(f"Checkpoint tensors differ: missing={missing} unexpected={unexpected}")
    for name, shape in expected.items():
        if tuple(arrays[name].shape) != tuple(shape):
            raise ShapeMismatch(
                f"Checkpoint tensor '{name}' has shape {arrays[name].shape}, "
                f"expected {tuple(shape)}"
            )
