"""Versioned binary checkpoints.

Layout: 8-byte magic, uint32 version, uint32 header length, canonical JSON
header, then every tensor as little-endian float64 in header order.
"""
from __future__ import annotations
import hashlib
import json
import struct
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from app.core.errors import CheckpointError
from app.model.params import ModelParams, ModelShapes

MAGIC = b"IAHCKPT\x00"
VERSION = 1
_PREFIX = struct.Struct("<II")


def serialize_checkpoint(params: ModelParams, config_hash: str = "") -> bytes:
    header = dict(params.shapes.header())
    header["config_hash"] = config_hash
    header["tensors"] = [[name, list(t.shape)] for name, t in params]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, _PREFIX.pack(VERSION, len(blob)), blob]
    for _, t in params:
        parts.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return b"".join(parts)


def checkpoint_hash(params: ModelParams, config_hash: str = "") -> str:
    return hashlib.sha256(serialize_checkpoint(params, config_hash)).hexdigest()


def save_checkpoint(params: ModelParams, path: Path, config_hash: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize_checkpoint(params, config_hash))
    return path


def _compare(expected: ModelShapes, found: ModelShapes) -> None:
    exp, got = expected.header(), found.header()
    for key in ("kind", "c", "in_channels", "hidden_channels", "d", "b", "q", "pyramid"):
        if exp[key] != got[key]:
            raise CheckpointError(f"checkpoint field '{key}' is {got[key]!r}, expected {exp[key]!r}")


def load_checkpoint(path: Path, expected: Optional[ModelShapes] = None) -> Tuple[ModelParams, Dict[str, object]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    offset = len(MAGIC)
    if len(data) < offset + _PREFIX.size:
        raise CheckpointError(f"{path} is truncated")
    version, header_len = _PREFIX.unpack_from(data, offset)
    if version != VERSION:
        raise CheckpointError(f"checkpoint field 'version' is {version}, expected {VERSION}")
    offset += _PREFIX.size
    try:
        header = json.loads(data[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path} has an unreadable header: {e}") from e
    offset += header_len

    shapes = ModelShapes.from_header(header)
    if expected is not None:
        _compare(expected, shapes)
    declared = [(name, tuple(shape)) for name, shape in header.get("tensors", [])]
    if declared != [(name, tuple(shape)) for name, shape in shapes.tensor_shapes()]:
        raise CheckpointError("checkpoint field 'tensors' does not match the declared model shapes")

    tensors = {}
    for name, shape in declared:
        n = int(np.prod(shape)) if shape else 1
        end = offset + 8 * n
        if end > len(data):
            raise CheckpointError(f"checkpoint tensor '{name}' is truncated")
        tensors[name] = np.frombuffer(data, dtype="<f8", count=n, offset=offset).astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise CheckpointError(f"{path} has {len(data) - offset} trailing bytes")
    return ModelParams(shapes, tensors), header
