"""Single-file checkpoints for models, optimizer state and run metadata.

Layout (all little-endian): magic "BFCK", u32 version, u32 descriptor
length, descriptor (JSON), u64 count of 64-bit payload values, the payload
(model parameters followed by any optimizer moment sections, as declared
by the descriptor), u64 checksum over everything between the version and
the checksum.  The checksum is FNV-1a, enough to catch corruption, not an
integrity guarantee.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from . import nn
from .errors import FormatError
from .fields import FieldModel

CHECKPOINT_MAGIC = b"BFCK"
CHECKPOINT_VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a(data: bytes, state: int = _FNV_OFFSET) -> int:
    for byte in data:
        state ^= byte
        state = (state * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return state


def save_checkpoint(path, model: FieldModel, opt_state: nn.AdamState | None = None, metadata=None):
    """Write model (and optionally Adam moments) with metadata to ``path``."""
    sections = [("params", model.params)]
    descriptor = {
        "kind": model.kind,
        "frame_dim": model.frame_dim,
        "net": {
            "input_dim": model.net.input_dim,
            "hidden_dims": list(model.net.hidden_dims),
            "output_dim": model.net.output_dim,
            "activation": model.net.activation,
            "coord_embedding": model.net.coord_embedding,
            "n_frequencies": model.net.n_frequencies,
        },
        "metadata": dict(metadata or {}),
    }
    if opt_state is not None:
        sections.append(("adam_m", opt_state.m))
        sections.append(("adam_v", opt_state.v))
        descriptor["adam_step"] = opt_state.step
    descriptor["sections"] = [[name, int(arr.size)] for name, arr in sections]

    desc_bytes = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    payload = np.concatenate([np.asarray(arr, dtype=np.float64).ravel() for name, arr in sections])
    body = (
        struct.pack("<I", len(desc_bytes))
        + desc_bytes
        + struct.pack("<Q", payload.size)
        + payload.astype("<f8").tobytes()
    )
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(body)
        fh.write(struct.pack("<Q", _fnv1a(body)))


def load_checkpoint(path):
    """Read a checkpoint; returns (model, adam_state or None, metadata)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise FormatError(f"truncated checkpoint: {len(raw)} bytes", offset=len(raw))
    if raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {CHECKPOINT_MAGIC!r}", offset=0)
    (version,) = struct.unpack_from("<I", raw, 4)
    if version > CHECKPOINT_VERSION:
        raise FormatError(
            f"unsupported checkpoint version {version} (newest known: {CHECKPOINT_VERSION})",
            offset=4,
        )
    if len(raw) < 8 + 4 + 8 + 8:
        raise FormatError("truncated checkpoint body", offset=len(raw))
    body, stored = raw[8:-8], raw[-8:]
    (checksum,) = struct.unpack("<Q", stored)
    if _fnv1a(body) != checksum:
        raise FormatError("checksum mismatch: checkpoint is corrupted", offset=len(raw) - 8)

    off = 0
    (desc_len,) = struct.unpack_from("<I", body, off)
    off += 4
    if off + desc_len > len(body):
        raise FormatError("truncated descriptor", offset=8 + off)
    try:
        descriptor = json.loads(body[off : off + desc_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable descriptor: {exc}", offset=8 + off) from exc
    off += desc_len
    (count,) = struct.unpack_from("<Q", body, off)
    off += 8
    if off + 8 * count != len(body):
        raise FormatError(
            f"payload holds {len(body) - off} bytes, descriptor expects {8 * count}",
            offset=8 + off,
        )
    payload = np.frombuffer(body, dtype="<f8", count=count, offset=off).astype(np.float64)

    parts = {}
    pos = 0
    for name, size in descriptor["sections"]:
        parts[name] = payload[pos : pos + size]
        pos += size
    if pos != count:
        raise FormatError(f"sections cover {pos} values, payload has {count}")

    net_desc = descriptor["net"]
    spec = nn.NetSpec(
        net_desc["input_dim"],
        tuple(net_desc["hidden_dims"]),
        net_desc["output_dim"],
        net_desc["activation"],
        net_desc["coord_embedding"],
        net_desc["n_frequencies"],
    )
    model = FieldModel(descriptor["kind"], descriptor["frame_dim"], spec, parts["params"])
    opt_state = None
    if "adam_m" in parts:
        opt_state = nn.AdamState(parts["adam_m"].copy(), parts["adam_v"].copy(), descriptor["adam_step"])
    return model, opt_state, descriptor.get("metadata", {})
