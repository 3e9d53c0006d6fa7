"""Binary checkpoint container for all three model kinds.

Layout (little-endian)::

    bytes 0-7   magic b"TRUGCKPT"
    bytes 8-11  u32 format version (1)
    bytes 12-15 u32 header length L
    next L      UTF-8 JSON header
    rest        float64 blocks, row-major, in header order

The header holds ``kind``, the truncation ``mode`` and training flags, the
scalar ``sigma2`` for the TGGM, and ``blocks``: a list of ``[name, shape]``.
Truncation points are stored as blocks ``xi_lower`` / ``xi_upper`` and may
be infinite.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .rbm import RbmModel
from .tggm import TggmModel
from .training import ARRAYS, model_kind
from .trbm import TrbmModel
from .trug import TrugParams

MAGIC = b"TRUGCKPT"
VERSION = 1
_PREFIX = struct.Struct("<8sII")
_CLASSES = {"rbm": RbmModel, "trbm": TrbmModel, "tggm": TggmModel}


class CheckpointError(ValueError):
    """Unreadable checkpoint, or one holding a different model kind."""


def to_bytes(model) -> bytes:
    kind = model_kind(model)
    names = list(ARRAYS[kind]) + ([] if kind == "tggm" else ["d"])
    blocks = [(n, np.asarray(getattr(model, n), dtype="<f8")) for n in names]
    blocks += [("xi_lower", model.trug.lower.astype("<f8")), ("xi_upper", model.trug.upper.astype("<f8"))]
    header = {
        "kind": kind,
        "trug": {"mode": model.trug.mode, "train_lower": bool(model.trug.train_lower),
                 "train_upper": bool(model.trug.train_upper)},
        "blocks": [[n, list(a.shape)] for n, a in blocks],
    }
    if kind == "tggm":
        header["sigma2"] = model.sigma2
    hb = json.dumps(header, sort_keys=True).encode()
    return _PREFIX.pack(MAGIC, VERSION, len(hb)) + hb + b"".join(np.ascontiguousarray(a).tobytes() for _, a in blocks)


def from_bytes(raw: bytes, expect_kind: str | None = None):
    if len(raw) < _PREFIX.size:
        raise CheckpointError(f"checkpoint truncated at byte {len(raw)}")
    magic, version, hlen = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(raw[_PREFIX.size:_PREFIX.size + hlen])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    kind = header.get("kind")
    if kind not in _CLASSES:
        raise CheckpointError(f"unknown model kind {kind!r}")
    if expect_kind is not None and kind != expect_kind:
        raise CheckpointError(f"checkpoint holds a {kind} model, expected {expect_kind}")
    off = _PREFIX.size + hlen
    arrays = {}
    for name, shape in header["blocks"]:
        size = int(np.prod(shape, dtype=np.int64)) * 8
        if off + size > len(raw):
            raise CheckpointError(f"block {name!r} truncated at byte {len(raw)}")
        arrays[name] = np.frombuffer(raw, "<f8", size // 8, off).reshape(shape).astype(float)
        off += size
    if off != len(raw):
        raise CheckpointError(f"{len(raw) - off} trailing bytes after offset {off}")
    t = header["trug"]
    trug = TrugParams(t["mode"], arrays.pop("xi_lower"), arrays.pop("xi_upper"),
                      train_lower=t["train_lower"], train_upper=t["train_upper"])
    if kind == "tggm":
        return TggmModel(sigma2=header["sigma2"], trug=trug, **arrays)
    return _CLASSES[kind](trug=trug, **arrays)


def save(path, model) -> None:
    """Write atomically, so an interrupted save keeps the previous file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(model))
    os.replace(tmp, path)


def load(path, expect_kind: str | None = None):
    return from_bytes(Path(path).read_bytes(), expect_kind)
