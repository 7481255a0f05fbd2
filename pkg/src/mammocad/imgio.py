"""PGM (Netpbm P2/P5) reading and writing, plus bilinear resampling.

Images are held as :class:`GrayImage`, a thin immutable wrapper around a
2D float64 array of non-negative intensities.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np


class PgmError(ValueError):
    """Base class for PGM decoding and encoding errors."""


class UnsupportedFormatError(PgmError):
    pass


class MalformedHeaderError(PgmError):
    pass


class TruncatedPayloadError(PgmError):
    pass


class InvalidDimensionError(PgmError):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major grid of finite, non-negative intensities."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise InvalidDimensionError(f"expected a 2D pixel array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pixel intensities must be finite")
        if arr.size and arr.min() < 0:
            raise ValueError("pixel intensities must be >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


_WS = b" \t\n\r\v\f"


def _header_tokens(data: bytes, count: int) -> tuple[list[tuple[int, bytes]], int]:
    """Read ``count`` whitespace-separated header tokens after the magic.

    Returns (offset, token) pairs and the offset of the single whitespace byte
    that terminates the last token.
    """
    tokens = []
    pos = 2
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos] in _WS:
            pos += 1
        if pos >= n:
            raise MalformedHeaderError(f"header ended at byte {pos} before all fields were read")
        if data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tokens.append((start, data[start:pos]))
    return tokens, pos


def _parse_int(offset: int, tok: bytes, field: str) -> int:
    if not re.fullmatch(rb"[0-9]+", tok):
        raise MalformedHeaderError(f"invalid {field} {tok!r} at byte {offset}")
    return int(tok)


def decode_pgm(data: bytes) -> tuple[GrayImage, int]:
    """Decode PGM bytes into an image and its maxval."""
    if len(data) < 2:
        raise UnsupportedFormatError("missing magic number at byte 0")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise UnsupportedFormatError(f"unsupported magic {magic!r} at byte 0")
    if len(data) > 2 and data[2] not in _WS and data[2] != ord("#"):
        raise MalformedHeaderError("expected whitespace after magic at byte 2")

    tokens, end = _header_tokens(data, 3)
    (w_off, w_tok), (h_off, h_tok), (m_off, m_tok) = tokens
    width = _parse_int(w_off, w_tok, "width")
    height = _parse_int(h_off, h_tok, "height")
    maxval = _parse_int(m_off, m_tok, "maxval")
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"invalid dimensions {width}x{height} at byte {w_off}")
    if not 1 <= maxval <= 65535:
        raise MalformedHeaderError(f"maxval {maxval} out of range [1, 65535] at byte {m_off}")

    count = width * height
    if magic == b"P5":
        if end >= len(data):
            raise TruncatedPayloadError(f"missing pixel payload at byte {end}")
        start = end + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        have = len(data) - start
        if have < need:
            raise TruncatedPayloadError(
                f"pixel payload truncated at byte {len(data)}: expected {need} bytes from byte {start}, got {have}"
            )
        values = np.frombuffer(data, dtype=dtype, count=count, offset=start)
    else:
        body = data[end:]
        # strip comments from the ASCII raster
        body = re.sub(rb"#[^\r\n]*", b"", body)
        words = body.split()
        if len(words) < count:
            raise TruncatedPayloadError(
                f"pixel payload truncated at byte {len(data)}: expected {count} samples, got {len(words)}"
            )
        try:
            values = np.array([int(w) for w in words[:count]], dtype=np.int64)
        except ValueError as exc:
            raise MalformedHeaderError(f"non-integer sample in ASCII raster after byte {end}") from exc
    if values.size and values.max() > maxval:
        raise PgmError(f"sample value {int(values.max())} exceeds maxval {maxval}")
    pixels = values.astype(np.float64).reshape(height, width)
    return GrayImage(pixels), maxval


def load_pgm(path) -> GrayImage:
    """Load a P2 or P5 PGM file; intensities are the stored integers as floats."""
    with open(path, "rb") as fh:
        data = fh.read()
    img, _ = decode_pgm(data)
    return img


def encode_pgm(img: GrayImage, maxval: int = 255, binary: bool = True) -> bytes:
    """Quantize ``img`` (already in [0, maxval] units) to PGM bytes."""
    if not 1 <= maxval <= 65535:
        raise PgmError(f"maxval {maxval} out of range [1, 65535]")
    if img.width < 1 or img.height < 1:
        raise InvalidDimensionError(f"cannot encode a {img.width}x{img.height} image")
    q = np.clip(np.rint(img.pixels), 0, maxval).astype(np.int64)
    header = f"{'P5' if binary else 'P2'}\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        return header + q.astype(dtype).tobytes()
    lines = [" ".join(str(v) for v in row) for row in q]
    return header + ("\n".join(lines) + "\n").encode("ascii")


def save_pgm(img: GrayImage, path, maxval: int = 255, binary: bool = True) -> None:
    """Write ``img`` as PGM. Pixel values are rounded and clipped to [0, maxval]."""
    data = encode_pgm(img, maxval=maxval, binary=binary)
    directory = os.path.dirname(os.fspath(path))
    if directory and not os.path.isdir(directory):
        raise OSError(f"directory does not exist: {directory}")
    with open(path, "wb") as fh:
        fh.write(data)


def _axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centre alignment, clamped at the borders
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def resample(img: GrayImage, target_w: int, target_h: int) -> GrayImage:
    """Bilinear resampling to ``target_w`` x ``target_h``.

    Interpolation is written as ``a + t * (b - a)`` so constant regions are
    reproduced bit-exactly; the result is clipped to the input range.
    """
    if target_w < 1 or target_h < 1:
        raise InvalidDimensionError(f"target dimensions must be >= 1, got {target_w}x{target_h}")
    if img.width < 1 or img.height < 1:
        raise InvalidDimensionError("cannot resample an empty image")
    x = img.pixels
    if (target_h, target_w) == x.shape:
        return img

    r0, r1, rt = _axis_weights(img.height, target_h)
    a = x[r0, :]
    rows = a + rt[:, None] * (x[r1, :] - a)
    c0, c1, ct = _axis_weights(img.width, target_w)
    b = rows[:, c0]
    out = b + ct[None, :] * (rows[:, c1] - b)
    out = np.clip(out, x.min(), x.max())
    return GrayImage(out)
