"""Pre-encoding image perturbations.

Feature banks hold encoder outputs, so any train-time robustness
augmentation (blur, recompression) has to happen here, on pixels, before
the encoder ever sees the image. Draws are keyed by (seed, image index):
re-running an extraction replays the exact same perturbations regardless
of batch split or skip pattern.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageFilter


@dataclass(frozen=True)
class AugmentPolicy:
    probability: float = 0.5
    sigma_range: tuple[float, float] = (0.0, 3.0)
    jpeg_quality_range: tuple[int, int] = (30, 100)
    seed: int = 0
    blur_first: bool = True

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must be in [0, 1], got {self.probability}")
        lo, hi = self.sigma_range
        if lo < 0 or hi < lo:
            raise ValueError(f"bad sigma_range {self.sigma_range}")
        qlo, qhi = self.jpeg_quality_range
        if not (1 <= qlo <= qhi <= 100):
            raise ValueError(f"bad jpeg_quality_range {self.jpeg_quality_range}")

    def params(self) -> dict:
        """JSON-friendly record for bank metadata."""
        return {
            "probability": self.probability,
            "sigma_range": list(self.sigma_range),
            "jpeg_quality_range": list(self.jpeg_quality_range),
            "seed": self.seed,
            "blur_first": self.blur_first,
        }


def policy_draws(policy: AugmentPolicy, draw_id: int) -> tuple[bool, float, bool, int]:
    """(apply_blur, sigma, apply_jpeg, quality) for one image index."""
    rng = np.random.default_rng([policy.seed, draw_id])
    u_blur, u_jpeg = rng.random(2)
    sigma = float(rng.uniform(*policy.sigma_range))
    qlo, qhi = policy.jpeg_quality_range
    quality = int(rng.integers(qlo, qhi + 1))
    return u_blur < policy.probability, sigma, u_jpeg < policy.probability, quality


def gaussian_blur(img: Image.Image, sigma: float) -> Image.Image:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    return img.filter(ImageFilter.GaussianBlur(radius=sigma))


def jpeg_compress(img: Image.Image, quality: int) -> Image.Image:
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    buf = io.BytesIO()
    img.convert("RGB").save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    out = Image.open(buf)
    out.load()
    return out


def apply_policy(img: Image.Image, policy: AugmentPolicy, draw_id: int) -> Image.Image:
    do_blur, sigma, do_jpeg, quality = policy_draws(policy, draw_id)
    steps = []
    if do_blur:
        steps.append(lambda im: gaussian_blur(im, sigma))
    if do_jpeg:
        steps.append(lambda im: jpeg_compress(im, quality))
    if not policy.blur_first:
        steps.reverse()
    out = img
    for step in steps:
        out = step(out)
    return out.copy() if out is img else out
