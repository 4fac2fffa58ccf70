"""Portable parameter checkpoints.

Layout (all integers little-endian)::

    magic      8 bytes   b"ECCNCKPT"
    version    uint32    1
    meta_len   uint32    length of the metadata block
    meta       utf-8     "key=value" lines joined by "\\n"
    count      uint32    number of tensors
    per tensor:
      name_len uint32, name utf-8
      ndim     uint32, dims uint64 * ndim
      data     float64 little-endian, row-major, prod(dims) values

Scalars are stored with ``ndim = 0`` and one value. Metadata carries at least
``kind`` (``rnn``, ``multi_rnn`` or ``ffn``) and ``constrained`` (``0``/``1``).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fileio import atomic_write_bytes
from .rnn import FeedForwardParams, MultiLayerRnnParams, SingleLayerRnnParams

MAGIC = b"ECCNCKPT"
VERSION = 1

_KINDS = {
    "rnn": SingleLayerRnnParams,
    "multi_rnn": MultiLayerRnnParams,
    "ffn": FeedForwardParams,
}


class CheckpointError(ValueError):
    pass


def dumps(params, meta: dict[str, str] | None = None) -> bytes:
    meta = {"kind": params.kind, "constrained": str(int(params.constrained)), **(meta or {})}
    for k, v in meta.items():
        if "\n" in f"{k}{v}" or "=" in k:
            raise CheckpointError(f"metadata entry {k!r} cannot be encoded")
    meta_blob = "\n".join(f"{k}={v}" for k, v in meta.items()).encode()
    tensors = params.tensors()
    out = [MAGIC, struct.pack("<II", VERSION, len(meta_blob)), meta_blob,
           struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8", order="C")
        raw = name.encode()
        out.append(struct.pack("<I", len(raw)) + raw)
        out.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def loads(blob: bytes):
    """Return ``(params, metadata)``."""
    view = memoryview(blob)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(8)) != MAGIC:
        raise CheckpointError("not an eccnbench checkpoint")
    version, meta_len = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta_text = bytes(take(meta_len)).decode()
    meta = dict(line.split("=", 1) for line in meta_text.split("\n") if line)
    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode()
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(bytes(take(8 * size)), dtype="<f8").astype(np.float64)
        tensors[name] = data.reshape(shape)
    if pos != len(view):
        raise CheckpointError("trailing bytes after last tensor")
    cls = _KINDS.get(meta.get("kind", ""))
    if cls is None:
        raise CheckpointError(f"unknown model kind {meta.get('kind')!r}")
    params = cls.from_tensors(tensors, constrained=meta.get("constrained") == "1")
    return params, meta


def save(path, params, meta: dict[str, str] | None = None) -> None:
    atomic_write_bytes(path, dumps(params, meta))


def load(path):
    return loads(Path(path).read_bytes())
