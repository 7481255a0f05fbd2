"""Image regularization ahead of the transforms.

The fixed order is orientation matching, Otsu background masking, then
intensity matching (division by the image maximum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgio import GrayImage


class NoSeparationError(ValueError):
    """Raised when Otsu thresholding is asked to split a constant image."""


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bits, dtype=bool, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return bool(np.array_equal(self.bits, other.bits))


def centroid_moment(img: GrayImage) -> float:
    """Signed horizontal mass moment about the image's vertical centre line.

    Positive means the intensity centroid lies right of centre. Mirror-paired
    columns are differenced before weighting, so the moment of a mirrored
    image is exactly the negation of the original's.
    """
    col = img.pixels.sum(axis=0)
    w = img.width
    half = w // 2
    j = np.arange(half)
    arms = (w - 1 - 2 * j).astype(np.float64)
    diffs = col[w - 1 - j] - col[j]
    return math.fsum(arms * diffs)


def orient_left(img: GrayImage) -> GrayImage:
    """Mirror the image horizontally when its tissue sits in the right half."""
    if centroid_moment(img) > 0:
        return GrayImage(img.pixels[:, ::-1])
    return img


def _bin_indices(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def histogram(values: np.ndarray, bins: int, lo: float | None = None, hi: float | None = None):
    """Equal-width histogram counts over [lo, hi] (defaults: data range)."""
    values = np.asarray(values, dtype=np.float64).ravel()
    lo = float(values.min()) if lo is None else float(lo)
    hi = float(values.max()) if hi is None else float(hi)
    if not hi > lo:
        raise NoSeparationError("histogram range is empty; image is constant")
    counts = np.bincount(_bin_indices(values, lo, hi, bins), minlength=bins)
    return counts, lo, hi


def otsu_bin(counts) -> int:
    """Index k maximizing the between-class variance of split [0,k) | [k,bins).

    Evaluated in exact integer arithmetic over bin indices (the criterion's
    argmax is invariant to the affine map from bin index to intensity), so the
    lowest maximizing k is found without floating-point near-tie ambiguity.
    """
    counts = [int(c) for c in counts]
    if len(counts) < 2:
        raise ValueError("at least two bins are required")
    n = sum(counts)
    total = sum(i * c for i, c in enumerate(counts))
    best_k = None
    best_num, best_den = -1, 1
    n0 = 0
    s0 = 0
    for k in range(1, len(counts)):
        n0 += counts[k - 1]
        s0 += (k - 1) * counts[k - 1]
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            continue
        # sigma_b^2 * n^2 == (n*s0 - n0*total)^2 / (n0*n1)
        num = (n * s0 - n0 * total) ** 2
        den = n0 * n1
        if best_k is None or num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    if best_k is None:
        raise NoSeparationError("all samples fall in a single histogram bin")
    return best_k


def otsu_threshold(img: GrayImage, bins: int = 256, lo: float | None = None, hi: float | None = None) -> float:
    """Otsu threshold, returned as the bin edge between background and tissue."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    counts, lo, hi = histogram(img.pixels, bins, lo, hi)
    k = otsu_bin(counts)
    return lo + k * (hi - lo) / bins


def apply_mask(img: GrayImage, t: float) -> tuple[GrayImage, BinaryMask]:
    """Zero every pixel at or below ``t``; keep the rest untouched."""
    bits = img.pixels > t
    return GrayImage(np.where(bits, img.pixels, 0.0)), BinaryMask(bits)


def intensity_match(img: GrayImage) -> GrayImage:
    peak = float(img.pixels.max()) if img.pixels.size else 0.0
    if not peak > 0:
        raise NormalizationError("cannot normalize an image whose maximum is not positive")
    return GrayImage(img.pixels / peak)


def preprocess(img: GrayImage, bins: int = 256) -> tuple[GrayImage, BinaryMask]:
    """Orient, mask the background, and normalize to a unit maximum."""
    oriented = orient_left(img)
    t = otsu_threshold(oriented, bins)
    masked, mask = apply_mask(oriented, t)
    return intensity_match(masked), mask
