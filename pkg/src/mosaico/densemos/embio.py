"""Binary file formats for layer embeddings and model checkpoints.

EMB1 (one file per stimulus, little-endian):
  bytes 0-3  ASCII "EMB1"
  u16        version = 1
  u16        n_layers = 13
  u32        dim = 768
  u32        flags (bit 0: time-averaged)
  payload    n_layers x dim IEEE-754 binary32, layer-major, layer 0 first

DMOS checkpoint (little-endian):
  bytes 0-3  ASCII "DMOS"
  u16        version = 1
  u32        param_count
  payload    param_count binary32 in canonical parameter order
  sidecar    <path>.json with config and training history
"""

from __future__ import annotations

import struct

import numpy as np

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1
N_LAYERS = 13
EMB_DIM = 768
FLAG_TIME_AVERAGED = 0x1

CKPT_MAGIC = b"DMOS"
CKPT_VERSION = 1

_EMB_HEADER = struct.Struct("<4sHHII")
_CKPT_HEADER = struct.Struct("<4sHI")


class EmbeddingFormatError(ValueError):
    """Malformed or truncated EMB1 file."""


class CheckpointFormatError(ValueError):
    """Malformed or truncated DMOS checkpoint file."""


def write_embedding(path, layers: np.ndarray) -> None:
    """Write a 13 x 768 time-averaged embedding tensor as EMB1."""
    layers = np.asarray(layers)
    if layers.shape != (N_LAYERS, EMB_DIM):
        raise EmbeddingFormatError(
            f"expected ({N_LAYERS}, {EMB_DIM}) embedding, got {layers.shape}"
        )
    if not np.all(np.isfinite(layers)):
        raise EmbeddingFormatError("embedding contains non-finite values")
    header = _EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, N_LAYERS, EMB_DIM, FLAG_TIME_AVERAGED)
    payload = layers.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_embedding(path) -> np.ndarray:
    """Read an EMB1 file, returning float32 (13, 768); validates the header."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _EMB_HEADER.size:
        raise EmbeddingFormatError(f"{path}: truncated header")
    magic, version, n_layers, dim, _flags = _EMB_HEADER.unpack_from(raw)
    if magic != EMB_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
    if version != EMB_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version}")
    if n_layers != N_LAYERS or dim != EMB_DIM:
        raise EmbeddingFormatError(
            f"{path}: expected {N_LAYERS} x {EMB_DIM}, header says {n_layers} x {dim}"
        )
    expected = _EMB_HEADER.size + N_LAYERS * EMB_DIM * 4
    if len(raw) < expected:
        raise EmbeddingFormatError(f"{path}: truncated payload ({len(raw)} < {expected} bytes)")
    payload = np.frombuffer(raw, dtype="<f4", count=N_LAYERS * EMB_DIM, offset=_EMB_HEADER.size)
    if not np.all(np.isfinite(payload)):
        raise EmbeddingFormatError(f"{path}: non-finite values in payload")
    return payload.reshape(N_LAYERS, EMB_DIM).copy()


def write_param_vector(path, vector: np.ndarray) -> None:
    """Write the flat parameter vector as a DMOS checkpoint body."""
    vector = np.asarray(vector)
    header = _CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, len(vector))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(vector.astype("<f4").tobytes())


def read_param_vector(path, expected_count: int) -> np.ndarray:
    """Read a DMOS checkpoint body back into a float64 parameter vector."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CKPT_HEADER.size:
        raise CheckpointFormatError(f"{path}: truncated header")
    magic, version, count = _CKPT_HEADER.unpack_from(raw)
    if magic != CKPT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    if count != expected_count:
        raise CheckpointFormatError(f"{path}: parameter count {count} != {expected_count}")
    if len(raw) < _CKPT_HEADER.size + 4 * count:
        raise CheckpointFormatError(f"{path}: truncated payload")
    vec = np.frombuffer(raw, dtype="<f4", count=count, offset=_CKPT_HEADER.size)
    return vec.astype(np.float64)
