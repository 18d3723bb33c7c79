"""Folder-of-images to feature-bank extraction."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import apply_policy
from .backends import layer_request, load_backend, wrap_model
from .encoders import ExtractionSpec
from .errors import DecodeFailure
from .preprocess import preprocess_hash, preprocess_params, to_model_input
from .writer import write_bank

log = logging.getLogger("ufd_extract")


@dataclass(frozen=True)
class ExtractReport:
    out_path: str
    entries: int
    dim: int
    skipped: tuple[dict, ...]       # {"index", "ref", "error"} per undecodable input
    skip_manifest: str | None       # written only when something was skipped


def _decode(item) -> Image.Image:
    if isinstance(item, Image.Image):
        item.load()
        return item
    img = Image.open(item)
    img.load()
    return img


def _ref_for(item, i: int) -> str:
    if isinstance(item, (str, Path)):
        return Path(item).name
    return f"image_{i:05d}"


def extract(
    images: Sequence,
    spec: ExtractionSpec,
    out_path,
    *,
    labels,
    class_ids=None,
    source_tag: str = "",
    image_refs: Sequence[str] | None = None,
    model=None,
    weights_path=None,
    metadata=None,
    skip_manifest_path=None,
) -> ExtractReport:
    """Embed images in input order and write one bank file.

    images: paths or PIL images. labels: one value for all entries or a
    per-image sequence. Undecodable images are skipped with a warning and
    listed in a JSON manifest next to the bank; decoding nothing at all is
    an error. model: an already-constructed encoder (otherwise pretrained
    weights are loaded for the spec, from weights_path when given).
    """
    items = list(images)
    if not items:
        raise DecodeFailure("no input images")
    per_image_labels = (
        list(labels) if isinstance(labels, (list, tuple, np.ndarray)) else [labels] * len(items)
    )
    if len(per_image_labels) != len(items):
        raise ValueError(f"{len(items)} images but {len(per_image_labels)} labels")
    per_image_cids = (
        [int(c) for c in class_ids]
        if isinstance(class_ids, (list, tuple, np.ndarray))
        else [-1 if class_ids is None else int(class_ids)] * len(items)
    )
    if len(per_image_cids) != len(items):
        raise ValueError(f"{len(items)} images but {len(per_image_cids)} class_ids")
    refs_in = list(image_refs) if image_refs is not None else None
    if refs_in is not None and len(refs_in) != len(items):
        raise ValueError(f"{len(items)} images but {len(refs_in)} image_refs")

    backend = wrap_model(spec, model) if model is not None else load_backend(spec, weights_path)
    size = backend.input_size
    family = spec.info.family
    layer = layer_request(spec.info, spec.layer_id)

    kept: list[np.ndarray] = []
    kept_meta: list[tuple] = []     # (label, class_id, ref)
    skipped: list[dict] = []
    for i, item in enumerate(items):
        ref = refs_in[i] if refs_in is not None else _ref_for(item, i)
        try:
            img = _decode(item)
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            log.warning("skipping %s: %s", ref, exc)
            skipped.append({"index": i, "ref": ref, "error": str(exc)})
            continue
        if spec.augment is not None:
            # draw keyed by original index, so skips never shift the stream
            img = apply_policy(img, spec.augment, i)
        kept.append(to_model_input(img, family, size))
        kept_meta.append((per_image_labels[i], per_image_cids[i], ref))
    if not kept:
        raise DecodeFailure(f"none of the {len(items)} inputs could be decoded")

    chunks = []
    for start in range(0, len(kept), spec.batch_size):
        batch = np.stack(kept[start:start + spec.batch_size])
        chunks.append(backend.embed(batch, layer))
    vectors = np.concatenate(chunks)
    dim = vectors.shape[1]
    if dim != spec.dim:
        log.warning(
            "%s/%s advertises dim %d but the loaded model emitted %d",
            spec.encoder_id, spec.layer_id, spec.dim, dim,
        )

    pp = preprocess_params(family, size)
    meta = dict(metadata or {})
    meta.update({
        "encoder_id": spec.encoder_id,
        "layer_id": spec.layer_id,
        "dim": dim,
        "features": "raw",          # stored unnormalized; unit copies live beside them
        "preprocess": pp,
        "preprocess_hash": preprocess_hash(pp),
        "augmentation": spec.augment.params() if spec.augment is not None else None,
        "sources": sorted({source_tag}),
        "norm_precomputed": True,
    })
    write_bank(
        out_path,
        vectors,
        [m[0] for m in kept_meta],
        class_ids=[m[1] for m in kept_meta],
        source_tags=source_tag,
        image_refs=[m[2] for m in kept_meta],
        metadata=meta,
    )

    manifest = None
    if skipped:
        manifest = str(skip_manifest_path or f"{out_path}.skips.json")
        Path(manifest).write_text(
            json.dumps({"kept": len(kept), "skipped": skipped}, indent=2) + "\n"
        )
        log.warning("%d input(s) skipped; manifest at %s", len(skipped), manifest)
    return ExtractReport(
        out_path=str(out_path),
        entries=len(kept),
        dim=dim,
        skipped=tuple(skipped),
        skip_manifest=manifest,
    )
