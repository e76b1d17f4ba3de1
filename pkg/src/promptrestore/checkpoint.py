"""Bit-exact binary checkpoints.

Layout:

    magic "DTPR" | version u32 LE | header_len u64 LE | header JSON (UTF-8)
    | parameter blob | moment blobs (m then v) | sha256 footer (32 bytes)

The header carries the config snapshot, step counter, RNG state, and the
ordered parameter table (name -> shape); every array is stored as
little-endian float64 in table order. The footer checksum covers the whole
preceding file, so any byte flip is rejected at load.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

MAGIC = b"DTPR"
VERSION = 1
_FOOTER = 32


class CheckpointError(ValueError):
    """Malformed, truncated, or inconsistent checkpoint file."""


@dataclass
class CheckpointState:
    config: dict
    step: int
    rng_state: dict | None
    params: dict          # name -> np.ndarray
    moments_m: dict       # name -> np.ndarray
    moments_v: dict


def _blob(arrays: dict, table: list) -> bytes:
    parts = []
    for name, shape in table:
        arr = np.asarray(arrays[name], dtype="<f8")
        if tuple(arr.shape) != tuple(shape):
            raise CheckpointError(f"array '{name}' has shape {arr.shape}, "
                                  f"table says {tuple(shape)}")
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


def save_checkpoint(path, config: dict, step: int, rng_state: dict | None,
                    params: dict, moments_m: dict | None = None,
                    moments_v: dict | None = None):
    """Write a checkpoint; byte-identical output for identical state."""
    table = [[name, list(np.asarray(params[name]).shape)] for name in params]
    has_moments = bool(moments_m)
    header = {
        "config": config,
        "step": int(step),
        "rng_state": rng_state,
        "params": table,
        "has_moments": has_moments,
    }
    header_bytes = json.dumps(header, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    body = [MAGIC,
            VERSION.to_bytes(4, "little"),
            len(header_bytes).to_bytes(8, "little"),
            header_bytes,
            _blob(params, table)]
    if has_moments:
        body.append(_blob(moments_m, table))
        body.append(_blob(moments_v, table))
    payload = b"".join(body)
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(digest)


def load_checkpoint(path) -> CheckpointState:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 4 + 8 + _FOOTER:
        raise CheckpointError(f"file too short ({len(raw)} bytes)")
    payload, digest = raw[:-_FOOTER], raw[-_FOOTER:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError("checksum mismatch: file corrupted")
    if payload[:4] != MAGIC:
        raise CheckpointError(f"bad magic {payload[:4]!r} at offset 0")
    version = int.from_bytes(payload[4:8], "little")
    if version != VERSION:
        raise CheckpointError(f"unsupported format version {version} "
                              f"(expected {VERSION})")
    header_len = int.from_bytes(payload[8:16], "little")
    pos = 16
    if pos + header_len > len(payload):
        raise CheckpointError(f"truncated header at offset {pos}: "
                              f"need {header_len} bytes")
    try:
        header = json.loads(payload[pos:pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unparseable header at offset {pos}: {exc}") from None
    pos += header_len

    table = [(name, tuple(shape)) for name, shape in header["params"]]

    def read_blob():
        nonlocal pos
        out = {}
        for name, shape in table:
            count = int(np.prod(shape)) if shape else 1
            nbytes = 8 * count
            if pos + nbytes > len(payload):
                raise CheckpointError(f"truncated data for '{name}' at "
                                      f"offset {pos}: need {nbytes} bytes")
            arr = np.frombuffer(payload[pos:pos + nbytes], dtype="<f8").copy()
            out[name] = arr.reshape(shape)
            pos += nbytes
        return out

    params = read_blob()
    moments_m, moments_v = {}, {}
    if header.get("has_moments"):
        moments_m = read_blob()
        moments_v = read_blob()
    if pos != len(payload):
        raise CheckpointError(f"{len(payload) - pos} unexpected trailing "
                              f"bytes at offset {pos}")
    return CheckpointState(config=header["config"], step=header["step"],
                           rng_state=header["rng_state"], params=params,
                           moments_m=moments_m, moments_v=moments_v)
