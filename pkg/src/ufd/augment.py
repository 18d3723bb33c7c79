"""Pixel-space perturbations: Gaussian blur, JPEG recompression, random policy.

Images are (H, W, 3) uint8 RGB arrays. Blur runs as two separable 1-D passes
in float64 with clamp-to-edge borders, then rounds back to uint8. JPEG goes
through a real baseline codec round-trip. apply_policy draws from a
counter-based generator keyed on (seed, draw_id), so augmentation of item i
never depends on how many items came before it.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from PIL import Image
from scipy.ndimage import convolve1d

from . import metrics
from .errors import EncoderFailure

DEFAULT_BLUR_GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)
DEFAULT_JPEG_GRID = (100, 90, 80, 70, 60, 50, 40, 30)


def _check_image(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.dtype != np.uint8 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) uint8, got {arr.dtype} {arr.shape}")
    return arr


def load_image(path) -> np.ndarray:
    """Read any Pillow-supported image file as (H, W, 3) uint8 RGB."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_image(arr, path) -> None:
    """Write an (H, W, 3) uint8 array; format follows the file extension."""
    Image.fromarray(_check_image(arr), mode="RGB").save(path)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian sampled at integer offsets, radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def gaussian_blur(img, sigma: float) -> np.ndarray:
    """Separable Gaussian blur; sigma = 0 is the identity (fresh copy)."""
    arr = _check_image(img)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return arr.copy()
    k = gaussian_kernel(sigma)
    out = arr.astype(np.float64)
    out = convolve1d(out, k, axis=0, mode="nearest")
    out = convolve1d(out, k, axis=1, mode="nearest")
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def jpeg_compress(img, quality: int) -> np.ndarray:
    """Encode to baseline JPEG at `quality` (1..100) and decode back."""
    arr = _check_image(img)
    if not 1 <= int(quality) <= 100:
        raise ValueError(f"quality must be in 1..100, got {quality}")
    try:
        buf = io.BytesIO()
        Image.fromarray(arr, mode="RGB").save(buf, format="JPEG", quality=int(quality))
        buf.seek(0)
        back = np.asarray(Image.open(buf).convert("RGB"))
    except Exception as exc:  # codec errors come in many flavors
        raise EncoderFailure(f"jpeg round-trip failed: {exc}") from exc
    if back.shape != arr.shape:
        raise EncoderFailure(f"jpeg round-trip changed shape {arr.shape} -> {back.shape}")
    return back


@dataclass(frozen=True)
class AugmentPolicy:
    """Blur and JPEG, each applied independently with the same probability.

    Blur runs first by default (set blur_first=False to compress first)."""

    probability: float = 0.5
    sigma_range: tuple[float, float] = (0.0, 3.0)
    jpeg_quality_range: tuple[int, int] = (30, 100)
    seed: int = 0
    blur_first: bool = True

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        lo, hi = self.sigma_range
        if lo < 0 or hi < lo:
            raise ValueError(f"bad sigma_range {self.sigma_range}")
        qlo, qhi = self.jpeg_quality_range
        if not (1 <= qlo <= qhi <= 100):
            raise ValueError(f"bad jpeg_quality_range {self.jpeg_quality_range}")


def policy_draws(policy: AugmentPolicy, draw_id: int) -> tuple[float, float, float, int]:
    """The four random draws for one item: u_blur, u_jpeg, sigma, quality.

    Counter-based (Philox) keyed on (seed, draw_id): same pair, same draws,
    on any platform, in any processing order.
    """
    bits = np.random.Philox(key=policy.seed % (1 << 128), counter=draw_id % (1 << 256))
    rng = np.random.Generator(bits)
    u_blur, u_jpeg = rng.random(2)
    sigma = float(rng.uniform(policy.sigma_range[0], policy.sigma_range[1]))
    qlo, qhi = policy.jpeg_quality_range
    quality = int(rng.integers(qlo, qhi + 1))
    return float(u_blur), float(u_jpeg), sigma, quality


def apply_policy(img, policy: AugmentPolicy, draw_id: int) -> np.ndarray:
    """Randomly blur and JPEG one image; probability 0 is a bit-exact copy.

    The four draws are consumed in a fixed order whether or not each step
    fires, so outputs depend only on (seed, draw_id), never on batch order."""
    arr = _check_image(img)
    u_blur, u_jpeg, sigma, quality = policy_draws(policy, draw_id)
    if policy.probability == 0.0:
        return arr.copy()
    out = arr
    steps = ("blur", "jpeg") if policy.blur_first else ("jpeg", "blur")
    for step in steps:
        if step == "blur" and u_blur < policy.probability and sigma > 0:
            out = gaussian_blur(out, sigma)
        elif step == "jpeg" and u_jpeg < policy.probability:
            out = jpeg_compress(out, quality)
    return out.copy() if out is arr else out


@dataclass(frozen=True)
class SweepPoint:
    axis: str    # "blur" | "jpeg"
    level: float
    group: str
    ap: float


def robustness_sweep(
    scores_fn: Callable[[str, float, Callable[[np.ndarray], np.ndarray]], Mapping[str, Sequence]],
    blur_grid: Sequence[float] = DEFAULT_BLUR_GRID,
    jpeg_grid: Sequence[int] = DEFAULT_JPEG_GRID,
) -> list[SweepPoint]:
    """AP under increasing perturbation, one row per (axis, level, group).

    scores_fn(axis, level, perturb) must re-score the evaluation data with
    `perturb` applied to every image before feature extraction, returning
    {group_name: [(score, truth), ...]}. An empty grid skips that axis; at
    least one grid must be non-empty.
    """
    if not blur_grid and not jpeg_grid:
        raise ValueError("both grids are empty")
    rows: list[SweepPoint] = []
    for sigma in blur_grid:
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        perturb = lambda im, s=float(sigma): gaussian_blur(im, s)
        for group, pairs in scores_fn("blur", float(sigma), perturb).items():
            rows.append(SweepPoint("blur", float(sigma), group, metrics.average_precision(pairs)))
    for quality in jpeg_grid:
        if not 1 <= int(quality) <= 100:
            raise ValueError(f"quality must be in 1..100, got {quality}")
        perturb = lambda im, q=int(quality): jpeg_compress(im, q)
        for group, pairs in scores_fn("jpeg", float(quality), perturb).items():
            rows.append(SweepPoint("jpeg", float(quality), group, metrics.average_precision(pairs)))
    return rows


def sweep_rows_csv(rows: Sequence[SweepPoint]) -> str:
    """Long-format CSV, one row per (axis, level, group)."""
    lines = ["axis,level,group,ap"]
    for r in rows:
        lines.append(f"{r.axis},{r.level:g},{r.group},{r.ap:.6f}")
    return "\n".join(lines) + "\n"
