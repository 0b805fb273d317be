"""Binary checkpoint container for named float64 parameter arrays.

Layout (all integers little-endian):

    magic          4 bytes  b"HFT1"
    config digest 32 bytes  sha256 of the config JSON bytes
    config length  u32
    config JSON    utf-8, keys sorted
    block count    u32
    per block:
        name length  u16
        name         utf-8
        ndim         u8
        dims         ndim x u32
        data         prod(dims) x float64 LE

Arrays round-trip bit exactly; the digest detects a config block that was
edited after saving.
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Any

import numpy as np

CHECKPOINT_MAGIC = b"HFT1"


class CheckpointError(RuntimeError):
    """Raised for bad magic, digest mismatch, or truncated data."""


def _config_bytes(config: dict[str, Any]) -> bytes:
    return json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(path, config: dict[str, Any], params: dict[str, np.ndarray]) -> None:
    cfg = _config_bytes(config)
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += hashlib.sha256(cfg).digest()
    out += struct.pack("<I", len(cfg))
    out += cfg
    out += struct.pack("<I", len(params))
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype=np.float64)
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF:
            raise CheckpointError(f"parameter name too long: {name[:32]!r}...")
        if arr.ndim > 0xFF:
            raise CheckpointError(f"parameter {name!r} has too many dimensions")
        out += struct.pack("<H", len(nb))
        out += nb
        out += struct.pack("<B", arr.ndim)
        for d in arr.shape:
            out += struct.pack("<I", d)
        out += arr.astype("<f8", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))


def load_checkpoint(path) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    view = memoryview(raw)
    pos = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError(f"truncated checkpoint while reading {what}")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    magic = bytes(take(4, "magic"))
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    digest = bytes(take(32, "config digest"))
    (cfg_len,) = struct.unpack("<I", take(4, "config length"))
    cfg_bytes = bytes(take(cfg_len, "config"))
    if hashlib.sha256(cfg_bytes).digest() != digest:
        raise CheckpointError("config digest mismatch")
    try:
        config = json.loads(cfg_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"config block is not valid JSON: {exc}") from exc

    (count,) = struct.unpack("<I", take(4, "block count"))
    params: dict[str, np.ndarray] = {}
    for i in range(count):
        (name_len,) = struct.unpack("<H", take(2, f"block {i} name length"))
        name = bytes(take(name_len, f"block {i} name")).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1, f"{name} ndim"))
        shape = tuple(
            struct.unpack("<I", take(4, f"{name} dim {k}"))[0] for k in range(ndim)
        )
        n_items = 1
        for d in shape:
            n_items *= d
        data = take(8 * n_items, f"{name} data")
        arr = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
        params[name] = arr
    if pos != len(view):
        raise CheckpointError(f"{len(view) - pos} trailing bytes after last block")
    return config, params
