"""Separable 2D discrete wavelet transform and the centred Fourier magnitude.

Three filter banks are supported: the orthogonal Daubechies ``db2`` and
``db4`` and the symmetric biorthogonal ``bior6.8``.

Each analysis pass filters rows, then columns, keeping every second sample,
so a level maps an ``h x w`` image to four ``ceil(h/2) x ceil(w/2)``
subbands. Signal borders are mirrored about the edge sample by default
(``mode="reflect"``, whole-sample symmetric extension). ``mode="symmetric"``
mirrors about the half-sample point instead and ``mode="periodization"``
wraps. With the filter phase centred on the taps every mode gives an
injective analysis operator, and the inverse is computed from it.

Keeping exactly ``ceil(n/2)`` coefficients per channel makes the symmetric
modes non-orthogonal even for orthogonal filters. Mirroring about the edge
sample keeps the operator well conditioned for all three banks (condition
number below 13 for db4), so rounding errors stay small through a deep
pyramid. Half-sample mirroring reaches about 124 for db4 and loses several
digits after three levels.

Subband naming follows what each detail responds to: ``horizontal`` is
lowpass along rows and highpass along columns, so it picks up intensity
changes in the vertical direction (horizontal edges and stripes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .imgio import GrayImage

MODES = ("reflect", "symmetric", "periodization")
_PAD = {"reflect": "reflect", "symmetric": "symmetric", "periodization": "wrap"}
MAX_LEVEL = 8
MIN_DIM = 2
SUBBANDS = ("approx", "horizontal", "vertical", "diagonal")


class UnknownBasisError(KeyError):
    pass


class TransformSizeError(ValueError):
    """Image too small for the requested transform depth."""


class BandShapeError(ValueError):
    pass


_SQRT3 = math.sqrt(3.0)
_DB2_SCALING = tuple(
    v / (4.0 * math.sqrt(2.0)) for v in (1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3)
)

# Daubechies 4 vanishing moments, scaling filter h[0..7]
_DB4_SCALING = (
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
)

# CDF-family spline biorthogonal 6.8: centre tap first, then the symmetric arms.
_BIOR68_ANALYSIS_HALF = (
    0.8259229974584023,
    0.4207962846098268,
    -0.09405920349573646,
    -0.07726317316720414,
    0.04973290349094079,
    0.01193456527972926,
    -0.016990639867602342,
    -0.0019142861290887667,
    0.0019088317364812906,
)
_BIOR68_SYNTHESIS_HALF = (
    0.7589077294536541,
    0.41784910915027457,
    -0.04036797903033992,
    -0.07872200106262882,
    0.014467504896790148,
    0.014426282505624435,
)


def _symmetric(half, length, centre):
    """Lay out a whole-sample symmetric filter around index ``centre``."""
    taps = np.zeros(length)
    c = centre
    taps[c] = half[0]
    for i, v in enumerate(half[1:], start=1):
        taps[c - i] = v
        taps[c + i] = v
    return taps


def _qmf(lowpass: np.ndarray, sign_offset: int) -> np.ndarray:
    n = np.arange(len(lowpass))
    return ((-1.0) ** (n + sign_offset)) * lowpass


@dataclass(frozen=True)
class WaveletBasis:
    """Analysis/synthesis filter quadruple. Taps are in convolution order."""

    name: str
    analysis_lo: tuple
    analysis_hi: tuple
    synthesis_lo: tuple
    synthesis_hi: tuple
    orthogonal: bool = field(default=False)

    @property
    def length(self) -> int:
        return len(self.analysis_lo)

    def arrays(self):
        return tuple(np.asarray(t, dtype=np.float64) for t in
                     (self.analysis_lo, self.analysis_hi, self.synthesis_lo, self.synthesis_hi))


def _from_lowpass(name, dec_lo, rec_lo, orthogonal):
    dec_lo = np.asarray(dec_lo, dtype=np.float64)
    rec_lo = np.asarray(rec_lo, dtype=np.float64)
    dec_hi = _qmf(rec_lo, 1)
    rec_hi = _qmf(dec_lo, 0)
    return WaveletBasis(
        name=name,
        analysis_lo=tuple(dec_lo.tolist()),
        analysis_hi=tuple(dec_hi.tolist()),
        synthesis_lo=tuple(rec_lo.tolist()),
        synthesis_hi=tuple(rec_hi.tolist()),
        orthogonal=orthogonal,
    )


def make_basis(name: str) -> WaveletBasis:
    """Return the named filter bank (``db2``, ``db4`` or ``bior6.8``)."""
    if name == "db2":
        scaling = np.array(_DB2_SCALING)
        return _from_lowpass(name, scaling[::-1], scaling, True)
    if name == "db4":
        scaling = np.array(_DB4_SCALING)
        return _from_lowpass(name, scaling[::-1], scaling, True)
    if name == "bior6.8":
        return _from_lowpass(
            name,
            _symmetric(_BIOR68_ANALYSIS_HALF, 18, 9),
            # odd offset between the two centres keeps the channels aligned
            _symmetric(_BIOR68_SYNTHESIS_HALF, 18, 8),
            False,
        )
    raise UnknownBasisError(f"unknown wavelet basis {name!r}; expected one of db2, db4, bior6.8")


BASIS_NAMES = ("db2", "db4", "bior6.8")


def orthonormality_residual(taps) -> float:
    """max_m |sum_k h[k] h[k+2m] - delta(m)| over all even shifts."""
    h = np.asarray(taps, dtype=np.float64)
    worst = 0.0
    for m in range(-(len(h) // 2), len(h) // 2 + 1):
        s = 0.0
        for k in range(len(h)):
            j = k + 2 * m
            if 0 <= j < len(h):
                s += h[k] * h[j]
        worst = max(worst, abs(s - (1.0 if m == 0 else 0.0)))
    return worst


def perfect_reconstruction_residual(basis: WaveletBasis) -> float:
    """Residual of the two-channel no-distortion and alias-cancellation conditions.

    With Z-transforms H0, H1 (analysis) and F0, F1 (synthesis) the bank is
    perfectly reconstructing when F0(z)H0(z) + F1(z)H1(z) = 2 z^-d and
    F0(z)H0(-z) + F1(z)H1(-z) = 0.
    """
    h0, h1, f0, f1 = basis.arrays()
    alt = (-1.0) ** np.arange(len(h0))
    distortion = np.convolve(f0, h0) + np.convolve(f1, h1)
    alias = np.convolve(f0, h0 * alt) + np.convolve(f1, h1 * alt)
    d = len(h0) - 1
    target = np.zeros_like(distortion)
    target[d] = 2.0
    return float(max(np.abs(distortion - target).max(), np.abs(alias).max()))


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown extension mode {mode!r}; expected one of {MODES}")


def _analyze_last_axis(x: np.ndarray, basis: WaveletBasis, mode: str):
    """Filter and decimate along the last axis; returns (lowpass, highpass)."""
    n = x.shape[-1]
    m = (n + 1) // 2
    length = basis.length
    shift = length // 2
    pad_left = length - 1 - shift
    pad_right = max(0, 2 * (m - 1) + shift - (n - 1))
    widths = [(0, 0)] * (x.ndim - 1) + [(pad_left, pad_right)]
    xp = np.pad(x, widths, mode=_PAD[mode])
    out = []
    for taps in (basis.analysis_lo, basis.analysis_hi):
        acc = np.zeros(x.shape[:-1] + (m,))
        for k, c in enumerate(taps):
            if c == 0.0:
                continue
            start = pad_left + shift - k
            acc += c * xp[..., start:start + 2 * (m - 1) + 1:2]
        out.append(acc)
    return out[0], out[1]


@lru_cache(maxsize=256)
def _left_inverse(basis: WaveletBasis, n: int, mode: str) -> np.ndarray:
    lo, hi = _analyze_last_axis(np.eye(n), basis, mode)
    analysis = np.vstack([lo.T, hi.T])  # (2m, n)
    inv = np.linalg.pinv(analysis)
    inv.setflags(write=False)
    return inv


def _synthesize_periodic(lo: np.ndarray, hi: np.ndarray, basis: WaveletBasis, n: int) -> np.ndarray:
    """Periodic synthesis filter bank along the last axis (even ``n`` only)."""
    length = basis.length
    shift = length // 2
    out = np.zeros(lo.shape[:-1] + (n,))
    m = lo.shape[-1]
    offset = length - 1 - shift
    for taps, band in ((basis.synthesis_lo, lo), (basis.synthesis_hi, hi)):
        for k, c in enumerate(taps):
            if c == 0.0:
                continue
            # band sample r contributes to x[2r + k - offset]
            idx = (2 * np.arange(m) + k - offset) % n
            np.add.at(out, (Ellipsis, idx), c * band)
    return out


def _synthesize_last_axis(lo, hi, basis, n, mode):
    m = (n + 1) // 2
    if lo.shape[-1] != m or hi.shape[-1] != m:
        raise BandShapeError(f"bands of length {lo.shape[-1]}/{hi.shape[-1]} cannot rebuild length {n}")
    if mode == "periodization" and n % 2 == 0:
        return _synthesize_periodic(lo, hi, basis, n)
    inv = _left_inverse(basis, n, mode)
    stacked = np.concatenate([lo, hi], axis=-1)
    return stacked @ inv.T


@dataclass(frozen=True)
class SubbandSet:
    """One decomposition level. Coefficients are signed, so plain arrays."""

    approx: np.ndarray
    horizontal: np.ndarray
    vertical: np.ndarray
    diagonal: np.ndarray

    def items(self):
        return [(name, getattr(self, name)) for name in SUBBANDS]

    @property
    def shape(self):
        return self.approx.shape


@dataclass(frozen=True)
class DecompositionPyramid:
    basis: str
    levels: list
    mode: str = "reflect"

    def level(self, k: int) -> SubbandSet:
        """Subbands of level ``k`` (1-based)."""
        return self.levels[k - 1]


def _as_array(img) -> np.ndarray:
    return img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)


def dwt2_level(img, basis: WaveletBasis, mode: str = "reflect") -> SubbandSet:
    """One separable analysis pass: rows first, then columns."""
    _check_mode(mode)
    x = _as_array(img)
    if x.ndim != 2 or min(x.shape) < MIN_DIM:
        raise TransformSizeError(f"image of shape {x.shape} is smaller than the {MIN_DIM}x{MIN_DIM} minimum")
    row_lo, row_hi = _analyze_last_axis(x, basis, mode)
    ll, lh = _analyze_last_axis(row_lo.T, basis, mode)
    hl, hh = _analyze_last_axis(row_hi.T, basis, mode)
    return SubbandSet(approx=ll.T, horizontal=lh.T, vertical=hl.T, diagonal=hh.T)


def idwt2_level(bands: SubbandSet, basis: WaveletBasis, out_dims, mode: str = "reflect") -> np.ndarray:
    """Invert :func:`dwt2_level` for an image of ``out_dims = (height, width)``."""
    _check_mode(mode)
    h, w = out_dims
    expected = ((h + 1) // 2, (w + 1) // 2)
    for name, band in bands.items():
        if band.shape != expected:
            raise BandShapeError(f"{name} band has shape {band.shape}, expected {expected} for output {out_dims}")
    row_lo = _synthesize_last_axis(bands.approx.T, bands.horizontal.T, basis, h, mode).T
    row_hi = _synthesize_last_axis(bands.vertical.T, bands.diagonal.T, basis, h, mode).T
    return _synthesize_last_axis(row_lo, row_hi, basis, w, mode)


def level_shape(shape, level: int):
    h, w = shape
    for _ in range(level):
        h, w = (h + 1) // 2, (w + 1) // 2
    return h, w


def decompose(img, basis: WaveletBasis, max_level: int = MAX_LEVEL, mode: str = "reflect") -> DecompositionPyramid:
    """Multilevel decomposition; level k analyses level k-1's approximation."""
    if not 1 <= max_level <= MAX_LEVEL:
        raise ValueError(f"max_level must be in [1, {MAX_LEVEL}], got {max_level}")
    x = _as_array(img)
    shape = x.shape
    for k in range(max_level):
        if min(level_shape(shape, k)) < MIN_DIM:
            raise TransformSizeError(
                f"image of shape {shape} supports only {k} decomposition levels, {max_level} requested"
            )
    levels = []
    current = x
    for _ in range(max_level):
        bands = dwt2_level(current, basis, mode)
        levels.append(bands)
        current = bands.approx
    return DecompositionPyramid(basis=basis.name, levels=levels, mode=mode)


def fourier_magnitude(img) -> GrayImage:
    """|DFT| of the image with the zero frequency moved to (h//2, w//2)."""
    x = _as_array(img)
    return GrayImage(np.fft.fftshift(np.abs(np.fft.fft2(x))))


def reconstruct(pyramid: DecompositionPyramid, shape, basis: WaveletBasis | None = None) -> np.ndarray:
    """Invert a full pyramid back to an image of ``shape``."""
    basis = basis or make_basis(pyramid.basis)
    current = pyramid.levels[-1].approx
    for k in range(len(pyramid.levels), 0, -1):
        bands = pyramid.level(k)
        bands = SubbandSet(current, bands.horizontal, bands.vertical, bands.diagonal)
        current = idwt2_level(bands, basis, level_shape(shape, k - 1), pyramid.mode)
    return current
