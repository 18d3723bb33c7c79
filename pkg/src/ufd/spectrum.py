"""Frequency fingerprints: average the high-frequency residual, then FFT.

Pipeline per image: resize to a square working size, convert to luminance,
subtract a median-filtered copy (the high-pass step), accumulate. The 2-D FFT
magnitude is taken once, of the corpus-mean residual, with the DC bin shifted
to the center. The residual average uses pairwise (tree) accumulation, so
duplicating the corpus leaves the result bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from PIL import Image
from scipy.ndimage import median_filter

from .errors import EmptyCorpus, IoFailure, KernelTooLarge, NonFiniteValue

DEFAULT_MEDIAN_KERNEL = 3
DEFAULT_SIZE = 256
DEFAULT_CORPUS_CAP = 2000

# Rec. 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def to_luminance(img) -> np.ndarray:
    """(H, W, 3) uint8 RGB -> (H, W) float64 luminance; 2-D input passes through."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        return arr.astype(np.float64)
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr.astype(np.float64) @ _LUMA
    raise ValueError(f"expected (H, W, 3) or (H, W), got {arr.shape}")


def highpass(img, median_kernel: int = DEFAULT_MEDIAN_KERNEL) -> np.ndarray:
    """Luminance minus its median-filtered copy (clamp-to-edge borders)."""
    lum = to_luminance(img)
    k = int(median_kernel)
    if k < 1 or k % 2 == 0:
        raise ValueError(f"median kernel must be odd and >= 1, got {median_kernel}")
    if k > min(lum.shape):
        raise KernelTooLarge(f"kernel {k} exceeds image side {min(lum.shape)}")
    return lum - median_filter(lum, size=k, mode="nearest")


def _resize(img, size: int) -> np.ndarray:
    arr = np.asarray(img)
    if arr.shape[:2] == (size, size):
        return arr
    if arr.ndim == 3:
        pil = Image.fromarray(arr.astype(np.uint8), mode="RGB")
        return np.asarray(pil.resize((size, size), Image.BILINEAR))
    pil = Image.fromarray(arr.astype(np.float32), mode="F")
    return np.asarray(pil.resize((size, size), Image.BILINEAR), dtype=np.float64)


def _tree_mean(residuals: Iterable[np.ndarray]) -> tuple[np.ndarray, int]:
    # binary-counter pairwise accumulation: O(log n) partial sums in memory,
    # and a doubled corpus produces a bitwise-identical mean
    levels: list[np.ndarray | None] = []
    n = 0
    for arr in residuals:
        carry = arr
        i = 0
        while i < len(levels) and levels[i] is not None:
            carry = levels[i] + carry
            levels[i] = None
            i += 1
        if i == len(levels):
            levels.append(carry)
        else:
            levels[i] = carry
        n += 1
    if n == 0:
        raise EmptyCorpus("no images to average")
    total = None
    for part in levels:
        if part is None:
            continue
        total = part if total is None else total + part
    return total / n, n


@dataclass(frozen=True)
class SpectrumImage:
    """DC-centered FFT magnitude of a corpus-mean residual."""

    grid: np.ndarray  # (size, size) float64
    size: int
    n_images: int
    median_kernel: int | None
    dc_centered: bool
    log_scaled: bool

    def __post_init__(self):
        self.grid.setflags(write=False)

    def params(self) -> dict:
        return {
            "size": self.size,
            "n_images": self.n_images,
            "median_kernel": self.median_kernel,
            "dc_centered": self.dc_centered,
            "log_scaled": self.log_scaled,
            "luminance": "rec601",
        }


def average_spectrum(
    images: Iterable,
    *,
    median_kernel: int | None = DEFAULT_MEDIAN_KERNEL,
    size: int = DEFAULT_SIZE,
    dc_center: bool = True,
    log_scale: bool = False,
) -> SpectrumImage:
    """Mean residual over the corpus, then one FFT magnitude.

    The order matters: transform(mean(residuals)), not mean(transforms).
    median_kernel=None skips the high-pass (plain luminance is averaged),
    which keeps the full signal energy for spectral sanity checks.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if median_kernel is not None:
        k = int(median_kernel)
        if k < 1 or k % 2 == 0:
            raise ValueError(f"median kernel must be odd and >= 1, got {median_kernel}")
        if k > size:
            raise KernelTooLarge(f"kernel {k} exceeds working size {size}")

    def residuals():
        for img in images:
            small = _resize(img, size)
            if median_kernel is None:
                yield to_luminance(small)
            else:
                yield highpass(small, median_kernel)

    mean_residual, n = _tree_mean(residuals())
    if not np.all(np.isfinite(mean_residual)):
        raise NonFiniteValue("mean residual contains NaN or infinity")
    mag = np.abs(np.fft.fft2(mean_residual))
    if dc_center:
        mag = np.fft.fftshift(mag)
    if log_scale:
        mag = np.log1p(mag)
    return SpectrumImage(
        grid=mag,
        size=size,
        n_images=n,
        median_kernel=None if median_kernel is None else int(median_kernel),
        dc_centered=dc_center,
        log_scaled=log_scale,
    )


def render_spectrum(spec: SpectrumImage) -> np.ndarray:
    """Min-max normalize the grid to (size, size) uint8 for viewing."""
    g = spec.grid
    lo = float(g.min())
    hi = float(g.max())
    if hi == lo:
        return np.zeros(g.shape, dtype=np.uint8)
    scaled = (g - lo) / (hi - lo) * 255.0
    return np.clip(np.rint(scaled), 0, 255).astype(np.uint8)


def save_spectrum_png(spec: SpectrumImage, path) -> None:
    try:
        Image.fromarray(render_spectrum(spec), mode="L").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"could not write {path}: {exc}") from exc


def save_grid(spec: SpectrumImage, path) -> None:
    """Raw grid as float32 .npy (little-endian)."""
    try:
        np.save(path, spec.grid.astype("<f4"))
    except OSError as exc:
        raise IoFailure(f"could not write {path}: {exc}") from exc


def load_grid(path) -> np.ndarray:
    return np.load(path)
