"""Labeled feature banks and their on-disk format.

A bank is an immutable set of labeled embedding vectors plus provenance
metadata. Vectors are stored twice: raw as given and unit-normalized, so
cosine scoring never renormalizes at query time.

File format (.ufdb, little-endian):

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

import copy
import json
import struct
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    ChecksumMismatch,
    DimensionMismatch,
    EmptyInput,
    EncoderMismatch,
    FormatVersionUnsupported,
    InsufficientEntries,
    MissingClassIds,
    NonFiniteValue,
    TruncatedFile,
    ZeroNormVector,
)
from .labels import Label, as_label

MAGIC = b"UFDB"
FORMAT_VERSION = 1
ZERO_NORM_EPS = 1e-12

_HEADER = struct.Struct("<4sIIQI")
_ENTRY_HEAD = struct.Struct("<Bi")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class BankEntry:
    """One labeled vector. `vector` is raw, `unit_vector` L2-normalized."""

    vector: np.ndarray
    unit_vector: np.ndarray
    label: Label
    class_id: int = -1
    source_tag: str = ""
    image_ref: str = ""

    def as_record(self) -> tuple:
        return (self.vector, self.label, self.class_id, self.source_tag, self.image_ref)


@dataclass(frozen=True, eq=False)
class FeatureBank:
    """Immutable column store of labeled vectors.

    Arrays are read-only; every edit operation returns a new bank.
    """

    dim: int
    vectors: np.ndarray        # (n, dim) float32
    unit_vectors: np.ndarray   # (n, dim) float32, each row L2 norm ~1
    labels: np.ndarray         # (n,) uint8, 0 real / 1 fake
    class_ids: np.ndarray      # (n,) int32, -1 when unknown
    source_tags: tuple[str, ...]
    image_refs: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.vectors, self.unit_vectors, self.labels, self.class_ids):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def entry(self, i: int) -> BankEntry:
        return BankEntry(
            vector=self.vectors[i],
            unit_vector=self.unit_vectors[i],
            label=Label(int(self.labels[i])),
            class_id=int(self.class_ids[i]),
            source_tag=self.source_tags[i],
            image_ref=self.image_refs[i],
        )

    def __iter__(self) -> Iterator[BankEntry]:
        return (self.entry(i) for i in range(len(self)))

    def label_indices(self, label: Label) -> np.ndarray:
        return np.flatnonzero(self.labels == int(label))

    def count(self, label: Label) -> int:
        return int(np.count_nonzero(self.labels == int(label)))

    @property
    def encoder_id(self) -> str:
        return str(self.metadata.get("encoder_id", "unknown"))

    @property
    def layer_id(self) -> str:
        return str(self.metadata.get("layer_id", "unknown"))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureBank):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.vectors.tobytes() == other.vectors.tobytes()
            and self.unit_vectors.tobytes() == other.unit_vectors.tobytes()
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.class_ids, other.class_ids)
            and self.source_tags == other.source_tags
            and self.image_refs == other.image_refs
            and self.metadata == other.metadata
        )

    def summary(self) -> dict:
        """Counts and provenance in a JSON-friendly shape (used by `bank inspect`)."""
        per_source: dict[str, int] = {}
        for tag in self.source_tags:
            per_source[tag] = per_source.get(tag, 0) + 1
        classes = np.unique(self.class_ids)
        return {
            "dim": self.dim,
            "entries": len(self),
            "real": self.count(Label.REAL),
            "fake": self.count(Label.FAKE),
            "distinct_class_ids": int(classes.size),
            "per_source": dict(sorted(per_source.items())),
            "metadata": self.metadata,
        }


def _normalize_rows(raw: np.ndarray) -> np.ndarray:
    # norms in float64, then back to f32; rejects rows the f32 grid collapsed
    norms = np.linalg.norm(raw.astype(np.float64), axis=1)
    bad = np.flatnonzero(norms < ZERO_NORM_EPS)
    if bad.size:
        raise ZeroNormVector(f"zero-norm vector at index {int(bad[0])}")
    return (raw.astype(np.float64) / norms[:, None]).astype(np.float32)


def build_bank(
    records: Iterable,
    dim: int,
    metadata: Mapping | None = None,
) -> FeatureBank:
    """Assemble a bank from (vector, label, class_id, source_tag, image_ref) records.

    BankEntry instances are accepted in place of tuples. Trailing tuple fields
    may be omitted (class_id -1, empty tag/ref). Vectors are cast to float32;
    non-finite values and zero norms are rejected, as is any length != dim.
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    raws: list[np.ndarray] = []
    labels: list[int] = []
    class_ids: list[int] = []
    tags: list[str] = []
    refs: list[str] = []
    for i, rec in enumerate(records):
        if isinstance(rec, BankEntry):
            vec, label, cid, tag, ref = rec.as_record()
        else:
            parts = tuple(rec)
            if not 2 <= len(parts) <= 5:
                raise ValueError(f"record {i}: expected 2..5 fields, got {len(parts)}")
            vec = parts[0]
            label = parts[1]
            cid = parts[2] if len(parts) > 2 else -1
            tag = parts[3] if len(parts) > 3 else ""
            ref = parts[4] if len(parts) > 4 else ""
        arr = np.asarray(vec, dtype=np.float32).reshape(-1)
        if arr.shape[0] != dim:
            raise DimensionMismatch(f"record {i}: vector has {arr.shape[0]} dims, bank declares {dim}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"record {i}: vector contains NaN or infinity")
        if int(cid) < -1:
            raise ValueError(f"record {i}: class_id must be >= -1, got {cid}")
        raws.append(arr)
        labels.append(int(as_label(label)))
        class_ids.append(int(cid))
        tags.append(str(tag))
        refs.append(str(ref))
    if not raws:
        raise EmptyInput("no records to build a bank from")

    vectors = np.stack(raws)
    units = _normalize_rows(vectors)
    meta = dict(copy.deepcopy(dict(metadata))) if metadata else {}
    meta.setdefault("encoder_id", "unknown")
    meta.setdefault("layer_id", "unknown")
    meta.setdefault("sources", sorted(set(tags)))
    meta["norm_precomputed"] = True
    return FeatureBank(
        dim=dim,
        vectors=vectors,
        unit_vectors=units,
        labels=np.asarray(labels, dtype=np.uint8),
        class_ids=np.asarray(class_ids, dtype=np.int32),
        source_tags=tuple(tags),
        image_refs=tuple(refs),
        metadata=meta,
    )


def _subset(bank: FeatureBank, indices: np.ndarray, extra_meta: Mapping | None = None) -> FeatureBank:
    idx = np.asarray(indices, dtype=np.int64)
    meta = copy.deepcopy(bank.metadata)
    if extra_meta:
        meta.update(copy.deepcopy(dict(extra_meta)))
    return FeatureBank(
        dim=bank.dim,
        vectors=bank.vectors[idx].copy(),
        unit_vectors=bank.unit_vectors[idx].copy(),
        labels=bank.labels[idx].copy(),
        class_ids=bank.class_ids[idx].copy(),
        source_tags=tuple(bank.source_tags[i] for i in idx),
        image_refs=tuple(bank.image_refs[i] for i in idx),
        metadata=meta,
    )


def merge_banks(banks: Sequence[FeatureBank]) -> FeatureBank:
    """Concatenate banks (no dedup). Entry order: banks[0] first, then banks[1], ...

    All banks must share dim, encoder_id and layer_id. Metadata comes from the
    first bank; `sources` becomes the sorted union when more than one bank is
    merged (a single-bank merge returns an equal bank untouched).
    """
    if not banks:
        raise EmptyInput("nothing to merge")
    first = banks[0]
    if len(banks) == 1:
        return _subset(first, np.arange(len(first)))
    for b in banks[1:]:
        if b.dim != first.dim:
            raise DimensionMismatch(f"cannot merge dim {b.dim} into dim {first.dim}")
        if (b.encoder_id, b.layer_id) != (first.encoder_id, first.layer_id):
            raise EncoderMismatch(
                f"cannot merge {b.encoder_id}/{b.layer_id} into {first.encoder_id}/{first.layer_id}"
            )
    meta = copy.deepcopy(first.metadata)
    sources: set[str] = set()
    for b in banks:
        sources.update(b.metadata.get("sources", []))
        sources.update(b.source_tags)
    meta["sources"] = sorted(sources)
    meta["norm_precomputed"] = all(b.metadata.get("norm_precomputed", False) for b in banks)
    tags: list[str] = []
    refs: list[str] = []
    for b in banks:
        tags.extend(b.source_tags)
        refs.extend(b.image_refs)
    return FeatureBank(
        dim=first.dim,
        vectors=np.concatenate([b.vectors for b in banks]),
        unit_vectors=np.concatenate([b.unit_vectors for b in banks]),
        labels=np.concatenate([b.labels for b in banks]),
        class_ids=np.concatenate([b.class_ids for b in banks]),
        source_tags=tuple(tags),
        image_refs=tuple(refs),
        metadata=meta,
    )


def subsample_bank(
    bank: FeatureBank,
    *,
    mode: str = "uniform",
    target_total: int | None = None,
    class_count: int | None = None,
    seed: int = 0,
) -> FeatureBank:
    """Seeded, reproducible subsampling; original entry order is preserved.

    uniform: draw target_total entries stratified so real/fake counts stay
    equal up to +-1 (the odd entry goes to real). by_class_count: keep every
    entry of `class_count` classes chosen by a seeded shuffle of the distinct
    class_ids; requires class_id >= 0 on all entries.
    """
    rng = np.random.default_rng(seed)
    if mode == "uniform":
        if target_total is None:
            raise ValueError("uniform subsampling needs target_total")
        if target_total <= 0:
            raise ValueError(f"target_total must be positive, got {target_total}")
        if target_total > len(bank):
            raise InsufficientEntries(f"asked for {target_total} of {len(bank)} entries")
        n_fake_take = target_total // 2
        n_real_take = target_total - n_fake_take
        real_idx = bank.label_indices(Label.REAL)
        fake_idx = bank.label_indices(Label.FAKE)
        if real_idx.size < n_real_take or fake_idx.size < n_fake_take:
            raise InsufficientEntries(
                f"need {n_real_take} real and {n_fake_take} fake, "
                f"bank has {real_idx.size}/{fake_idx.size}"
            )
        pick_real = rng.choice(real_idx, size=n_real_take, replace=False)
        pick_fake = rng.choice(fake_idx, size=n_fake_take, replace=False)
        keep = np.sort(np.concatenate([pick_real, pick_fake]))
        note = {"subsample": {"mode": mode, "target_total": int(target_total), "seed": int(seed)}}
        return _subset(bank, keep, note)
    if mode == "by_class_count":
        if class_count is None:
            raise ValueError("by_class_count subsampling needs class_count")
        if class_count <= 0:
            raise ValueError(f"class_count must be positive, got {class_count}")
        if np.any(bank.class_ids < 0):
            raise MissingClassIds("class-based subsampling needs class_id >= 0 on every entry")
        distinct = np.unique(bank.class_ids)
        if class_count > distinct.size:
            raise InsufficientEntries(f"asked for {class_count} of {distinct.size} classes")
        chosen = rng.permutation(distinct)[:class_count]
        keep = np.flatnonzero(np.isin(bank.class_ids, chosen))
        note = {"subsample": {"mode": mode, "class_count": int(class_count), "seed": int(seed)}}
        return _subset(bank, keep, note)
    raise ValueError(f"unknown subsample mode: {mode!r}")


def expected_file_size(bank: FeatureBank) -> int:
    """Exact .ufdb byte size for this bank (header + metadata + entries + crc)."""
    meta_len = len(_metadata_bytes(bank.metadata))
    entries = sum(
        9 + len(t.encode("utf-8")) + len(r.encode("utf-8")) + 8 * bank.dim
        for t, r in zip(bank.source_tags, bank.image_refs)
    )
    return _HEADER.size + meta_len + entries + 4


def _metadata_bytes(metadata: Mapping) -> bytes:
    return json.dumps(dict(metadata), sort_keys=True, ensure_ascii=False).encode("utf-8")


def save_bank(bank: FeatureBank, path) -> None:
    """Write the bank; the trailing CRC32 covers every preceding byte."""
    meta = _metadata_bytes(bank.metadata)
    raw = np.ascontiguousarray(bank.vectors, dtype="<f4")
    unit = np.ascontiguousarray(bank.unit_vectors, dtype="<f4")
    crc = 0
    with open(path, "wb") as fh:
        def put(chunk: bytes):
            nonlocal crc
            crc = zlib.crc32(chunk, crc)
            fh.write(chunk)

        put(_HEADER.pack(MAGIC, FORMAT_VERSION, bank.dim, len(bank), len(meta)))
        put(meta)
        for i in range(len(bank)):
            tag = bank.source_tags[i].encode("utf-8")
            ref = bank.image_refs[i].encode("utf-8")
            if len(tag) > 0xFFFF or len(ref) > 0xFFFF:
                raise ValueError(f"entry {i}: tag/ref longer than 65535 bytes")
            put(_ENTRY_HEAD.pack(int(bank.labels[i]), int(bank.class_ids[i])))
            put(_U16.pack(len(tag)))
            put(tag)
            put(_U16.pack(len(ref)))
            put(ref)
            put(raw[i].tobytes())
            put(unit[i].tobytes())
        fh.write(_U32.pack(crc))


def load_bank(path) -> FeatureBank:
    """Read a .ufdb file back into an identical FeatureBank.

    Raises FormatVersionUnsupported on a bad magic/version, TruncatedFile when
    the file ends early, ChecksumMismatch when sizes line up but bytes were
    altered.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{len(data)} bytes is too short for a bank header")
    magic, version, dim, count, meta_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatVersionUnsupported(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatVersionUnsupported(f"version {version} not supported (expected {FORMAT_VERSION})")

    pos = _HEADER.size
    end = len(data) - 4  # crc excluded from the parse region

    def need(n: int, what: str):
        if pos + n > end:
            raise TruncatedFile(f"file ends inside {what}")

    need(meta_len, "metadata")
    try:
        metadata = json.loads(data[pos:pos + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ChecksumMismatch(f"metadata is not valid JSON: {exc}") from exc
    pos += meta_len

    # cheapest possible size for `count` entries; stops giant allocations on
    # a mangled header before they start
    floor = count * (_ENTRY_HEAD.size + 2 * _U16.size + 8 * dim)
    if pos + floor > end:
        raise TruncatedFile(f"{end - pos} bytes cannot hold {count} entries of dim {dim}")

    vectors = np.empty((count, dim), dtype=np.float32)
    units = np.empty((count, dim), dtype=np.float32)
    labels = np.empty(count, dtype=np.uint8)
    class_ids = np.empty(count, dtype=np.int32)
    tags: list[str] = []
    refs: list[str] = []
    vec_bytes = 4 * dim
    for i in range(count):
        need(_ENTRY_HEAD.size, f"entry {i}")
        label, cid = _ENTRY_HEAD.unpack_from(data, pos)
        pos += _ENTRY_HEAD.size
        strs = []
        for what in ("source_tag", "image_ref"):
            need(_U16.size, f"entry {i} {what} length")
            (slen,) = _U16.unpack_from(data, pos)
            pos += _U16.size
            need(slen, f"entry {i} {what}")
            strs.append(data[pos:pos + slen].decode("utf-8"))
            pos += slen
        need(2 * vec_bytes, f"entry {i} vectors")
        vectors[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=pos)
        pos += vec_bytes
        units[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=pos)
        pos += vec_bytes
        if label not in (0, 1):
            raise ChecksumMismatch(f"entry {i}: label byte {label} is not 0/1")
        labels[i] = label
        class_ids[i] = cid
        tags.append(strs[0])
        refs.append(strs[1])

    if pos != end:
        raise ChecksumMismatch(f"{end - pos} unexpected bytes between entries and checksum")
    (stored_crc,) = _U32.unpack_from(data, end)
    actual_crc = zlib.crc32(data[:end])
    if stored_crc != actual_crc:
        raise ChecksumMismatch(f"crc32 {actual_crc:#010x} != stored {stored_crc:#010x}")

    return FeatureBank(
        dim=dim,
        vectors=vectors,
        unit_vectors=units,
        labels=labels,
        class_ids=class_ids,
        source_tags=tuple(tags),
        image_refs=tuple(refs),
        metadata=metadata,
    )
