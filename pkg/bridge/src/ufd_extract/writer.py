"""Feature bank file writer (.ufdb version 1).

Independent implementation of the bank format so this package has no
code dependency on the consumer side; the file itself is the interface.

Layout (little-endian):

    magic "UFDB" | u32 version=1 | u32 dim | u64 entry_count
    u32 metadata_len | metadata (UTF-8 JSON)
    per entry:
        u8 label | i32 class_id
        u16 tag_len | source_tag bytes
        u16 ref_len | image_ref bytes
        dim * f32 raw | dim * f32 unit
    u32 CRC32 of every preceding byte
"""

from __future__ import annotations

import json
import struct
import zlib
from typing import Mapping, Sequence

import numpy as np

MAGIC = b"UFDB"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIQI")
_ENTRY_HEAD = struct.Struct("<Bi")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")

_LABELS = {"real": 0, "fake": 1, 0: 0, 1: 1}


def as_label_byte(label) -> int:
    key = label.lower() if isinstance(label, str) else int(label)
    if key not in _LABELS:
        raise ValueError(f"label must be real/fake or 0/1, got {label!r}")
    return _LABELS[key]


def unit_rows(vectors: np.ndarray) -> np.ndarray:
    """L2-normalized copy; norms taken in float64 before the f32 cast."""
    v64 = vectors.astype(np.float64)
    norms = np.linalg.norm(v64, axis=1)
    bad = np.flatnonzero(norms < 1e-12)
    if bad.size:
        raise ValueError(f"zero-norm vector at index {int(bad[0])}")
    return (v64 / norms[:, None]).astype(np.float32)


def write_bank(
    path,
    vectors: np.ndarray,
    labels: Sequence,
    *,
    class_ids: Sequence[int] | None = None,
    source_tags: Sequence[str] | str = "",
    image_refs: Sequence[str] | None = None,
    metadata: Mapping | None = None,
) -> int:
    """Write one bank; returns the byte count. Entry order == input order."""
    raw = np.ascontiguousarray(np.atleast_2d(np.asarray(vectors, dtype="<f4")))
    n, dim = raw.shape
    if n == 0 or dim == 0:
        raise ValueError(f"need a non-empty (n, dim) array, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("vectors contain NaN or infinity")
    label_bytes = [as_label_byte(x) for x in labels]
    if len(label_bytes) != n:
        raise ValueError(f"{n} vectors but {len(label_bytes)} labels")
    cids = [-1] * n if class_ids is None else [int(c) for c in class_ids]
    tags = [source_tags] * n if isinstance(source_tags, str) else [str(t) for t in source_tags]
    refs = [""] * n if image_refs is None else [str(r) for r in image_refs]
    if not (len(cids) == len(tags) == len(refs) == n):
        raise ValueError("class_ids / source_tags / image_refs length mismatch")
    unit = unit_rows(raw)
    meta = json.dumps(dict(metadata or {}), sort_keys=True, ensure_ascii=False).encode("utf-8")

    crc = 0
    written = 0
    with open(path, "wb") as fh:
        def put(chunk: bytes):
            nonlocal crc, written
            crc = zlib.crc32(chunk, crc)
            written += fh.write(chunk)

        put(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, n, len(meta)))
        put(meta)
        for i in range(n):
            tag = tags[i].encode("utf-8")
            ref = refs[i].encode("utf-8")
            if len(tag) > 0xFFFF or len(ref) > 0xFFFF:
                raise ValueError(f"entry {i}: tag/ref longer than 65535 bytes")
            put(_ENTRY_HEAD.pack(label_bytes[i], cids[i]))
            put(_U16.pack(len(tag)))
            put(tag)
            put(_U16.pack(len(ref)))
            put(ref)
            put(raw[i].tobytes())
            put(unit[i].tobytes())
        written += fh.write(_U32.pack(crc))
    return written
