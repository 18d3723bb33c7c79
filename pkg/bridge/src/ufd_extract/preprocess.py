"""Image-to-tensor preprocessing, one recipe per pretraining family.

The exact resize/crop/normalize chain is part of an embedding's identity:
two banks produced with different preprocessing are not comparable even
under the same weights. The chain's parameters are therefore hashed and
the digest stored in bank metadata, so a mismatch is detectable.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np
from PIL import Image

# published normalization constants per pretraining corpus
_FAMILY_STATS = {
    "clip": {
        "mean": (0.48145466, 0.4578275, 0.40821073),
        "std": (0.26862954, 0.26130258, 0.27577711),
    },
    "imagenet": {
        "mean": (0.485, 0.456, 0.406),
        "std": (0.229, 0.224, 0.225),
    },
}


def preprocess_params(family: str, size: int) -> dict:
    if family not in _FAMILY_STATS:
        raise ValueError(f"unknown preprocessing family {family!r}")
    stats = _FAMILY_STATS[family]
    return {
        "family": family,
        "resize": "bicubic shortest side",
        "crop": "center",
        "size": int(size),
        "scale": "1/255",
        "mean": list(stats["mean"]),
        "std": list(stats["std"]),
    }


def preprocess_hash(params: dict) -> str:
    canon = json.dumps(params, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(canon).hexdigest()


def to_model_input(img: Image.Image, family: str, size: int) -> np.ndarray:
    """(3, size, size) float32, normalized. Shortest-side resize, center crop."""
    params = _FAMILY_STATS.get(family)
    if params is None:
        raise ValueError(f"unknown preprocessing family {family!r}")
    rgb = img.convert("RGB")
    w, h = rgb.size
    scale = size / min(w, h)
    rgb = rgb.resize((max(size, round(w * scale)), max(size, round(h * scale))), Image.BICUBIC)
    w, h = rgb.size
    left, top = (w - size) // 2, (h - size) // 2
    rgb = rgb.crop((left, top, left + size, top + size))

    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    mean = np.asarray(params["mean"], dtype=np.float32)
    std = np.asarray(params["std"], dtype=np.float32)
    arr = (arr - mean) / std
    return np.ascontiguousarray(arr.transpose(2, 0, 1))
