"""Statistical moment features over wavelet subbands and the Fourier view."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .imgio import GrayImage, load_pgm, resample
from .preprocess import BinaryMask, preprocess
from .transforms import (
    BASIS_NAMES,
    MAX_LEVEL,
    SUBBANDS,
    WaveletBasis,
    decompose,
    fourier_magnitude,
    make_basis,
)

log = logging.getLogger(__name__)

STATISTICS = ("mean", "std", "skewness", "kurtosis")
DEFAULT_LEVELS = (3, 8)


class EmptyRegionError(ValueError):
    pass


class FeatureCsvError(ValueError):
    pass


def moments(values, region: BinaryMask | np.ndarray | None = None) -> tuple[float, float, float, float]:
    """Population mean, standard deviation, skewness and kurtosis.

    ``region`` restricts the statistics to mask-true pixels; ``None`` uses
    every pixel. A zero standard deviation yields skewness = kurtosis = 0.
    """
    x = values.pixels if isinstance(values, GrayImage) else np.asarray(values, dtype=np.float64)
    if region is not None:
        bits = region.bits if isinstance(region, BinaryMask) else np.asarray(region, dtype=bool)
        if bits.shape != x.shape:
            raise ValueError(f"region shape {bits.shape} does not match values shape {x.shape}")
        x = x[bits]
    x = np.ravel(x)
    if x.size == 0:
        raise EmptyRegionError("moments need at least one pixel")
    mu = float(x.mean())
    d = x - mu
    sigma = float(np.sqrt(np.mean(d * d)))
    if sigma == 0.0:
        return mu, 0.0, 0.0, 0.0
    z = d / sigma
    z2 = z * z
    return mu, sigma, float(np.mean(z2 * z)), float(np.mean(z2 * z2))


def feature_names(basis_name: str, levels=DEFAULT_LEVELS, fourier: bool = True) -> list[str]:
    lo, hi = levels
    names = [
        f"{basis_name}.L{level}.{band}.{stat}"
        for level in range(lo, hi + 1)
        for band in SUBBANDS
        for stat in STATISTICS
    ]
    if fourier:
        names += [f"fourier.{stat}" for stat in STATISTICS]
    return names


@dataclass
class FeatureVector:
    names: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != len(self.values):
            raise ValueError("names and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if not np.all(np.isfinite(self.values)):
            bad = [n for n, v in zip(self.names, self.values) if not np.isfinite(v)]
            raise ValueError(f"non-finite feature values: {bad[:5]}")

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def _check_levels(levels):
    lo, hi = levels
    if not 1 <= lo <= hi <= MAX_LEVEL:
        raise ValueError(f"level range must lie within [1, {MAX_LEVEL}], got {levels}")


def extract_features(
    img: GrayImage,
    mask: BinaryMask | None,
    basis: WaveletBasis,
    levels=DEFAULT_LEVELS,
    fourier: bool = True,
    mode: str = "reflect",
) -> FeatureVector:
    """Moments of every subband at ``levels`` plus moments of the Fourier magnitude.

    Subband statistics use whole subbands; the tissue mask only shapes the
    input image (already applied during pre-processing) and is checked for
    consistency here.
    """
    _check_levels(levels)
    if mask is not None and (mask.height, mask.width) != (img.height, img.width):
        raise ValueError("mask and image dimensions differ")
    pyramid = decompose(img, basis, levels[1], mode=mode)
    values = []
    for level in range(levels[0], levels[1] + 1):
        for _, band in pyramid.level(level).items():
            values.extend(moments(band))
    if fourier:
        values.extend(moments(fourier_magnitude(img)))
    return FeatureVector(feature_names(basis.name, levels, fourier), values)


@dataclass
class FeatureMatrix:
    """Rows of features with binary labels (0 normal, 1 cancerous)."""

    feature_names: list
    values: np.ndarray
    labels: np.ndarray
    image_ids: list
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(len(self.image_ids), len(self.feature_names))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.labels) != len(self.image_ids):
            raise ValueError("labels and image ids differ in length")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    def __len__(self):
        return len(self.image_ids)

    @property
    def shape(self):
        return self.values.shape

    def rows(self, index) -> "FeatureMatrix":
        index = np.asarray(index, dtype=np.intp)
        return FeatureMatrix(
            list(self.feature_names),
            self.values[index],
            self.labels[index],
            [self.image_ids[i] for i in index],
        )

    def columns(self, names) -> "FeatureMatrix":
        lookup = {n: i for i, n in enumerate(self.feature_names)}
        missing = [n for n in names if n not in lookup]
        if missing:
            raise KeyError(f"features not present: {missing}")
        cols = [lookup[n] for n in names]
        return FeatureMatrix(list(names), self.values[:, cols], self.labels.copy(), list(self.image_ids))

    def vector(self, i: int) -> FeatureVector:
        return FeatureVector(list(self.feature_names), self.values[i])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["image_id", *self.feature_names, "label"])
            for image_id, row, label in zip(self.image_ids, self.values, self.labels):
                writer.writerow([image_id, *(format(v, ".17g") for v in row), int(label)])

    @classmethod
    def read_csv(cls, path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FeatureCsvError(f"{path}: empty feature file") from None
            if len(header) < 2 or header[0] != "image_id" or header[-1] != "label":
                raise FeatureCsvError(f"{path}: header must be image_id,<features...>,label")
            names = header[1:-1]
            ids, values, labels = [], [], []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise FeatureCsvError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                ids.append(row[0])
                values.append([float(v) for v in row[1:-1]])
                labels.append(int(row[-1]))
        return cls(names, np.array(values, dtype=np.float64).reshape(len(ids), len(names)), labels, ids)

    @classmethod
    def join(cls, matrices) -> "FeatureMatrix":
        """Union of columns across matrices describing the same rows.

        Columns that share a name (the Fourier features repeated in every
        basis set) must agree and are kept once.
        """
        matrices = list(matrices)
        first = matrices[0]
        names, cols = [], []
        seen = {}
        for m in matrices:
            if m.image_ids != first.image_ids or not np.array_equal(m.labels, first.labels):
                raise ValueError("matrices describe different rows")
            for j, name in enumerate(m.feature_names):
                if name in seen:
                    if not np.array_equal(seen[name], m.values[:, j]):
                        raise ValueError(f"column {name} differs between matrices")
                    continue
                seen[name] = m.values[:, j]
                names.append(name)
                cols.append(m.values[:, j])
        values = np.column_stack(cols) if cols else np.zeros((len(first), 0))
        return cls(names, values, first.labels.copy(), list(first.image_ids))


def read_manifest(path) -> list[tuple[str, int]]:
    """Read a ``filename,label`` manifest; filenames resolve against its directory."""
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"filename", "label"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: manifest header must contain filename,label")
        for row in reader:
            entries.append((os.path.join(base, row["filename"]), int(row["label"])))
    return entries


def image_features(path, bases, levels=DEFAULT_LEVELS, resolution=1024, bins=256, mode="reflect"):
    """Load, resample, pre-process and extract every basis set for one image."""
    img = load_pgm(path)
    img = resample(img, resolution, resolution)
    prepared, mask = preprocess(img, bins=bins)
    return [extract_features(prepared, mask, make_basis(b), levels, mode=mode) for b in bases]


def _safe_image_features(args):
    path, bases, levels, resolution, bins, mode = args
    try:
        return image_features(path, bases, levels, resolution, bins, mode), None
    except Exception as exc:  # recorded, row skipped
        return None, f"{type(exc).__name__}: {exc}"


def build_matrix(
    corpus,
    bases=BASIS_NAMES,
    levels=DEFAULT_LEVELS,
    resolution: int = 1024,
    bins: int = 256,
    workers: int = 1,
    mode: str = "reflect",
) -> dict:
    """One :class:`FeatureMatrix` per basis, rows in corpus order.

    Images that fail to load or process are skipped; each skip is recorded
    as ``(image id, reason)`` on every returned matrix.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus is empty")
    for _, label in corpus:
        if label not in (0, 1):
            raise ValueError(f"labels must be 0 or 1, got {label!r}")
    _check_levels(levels)
    jobs = [(path, tuple(bases), tuple(levels), resolution, bins, mode) for path, _ in corpus]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_image_features, jobs))
    else:
        results = [_safe_image_features(job) for job in jobs]

    names = {b: feature_names(b, levels) for b in bases}
    rows = {b: [] for b in bases}
    labels, ids, skipped = [], [], []
    for (path, label), (vectors, error) in zip(corpus, results):
        image_id = os.path.basename(path)
        if error is not None:
            log.warning("skipping %s: %s", path, error)
            skipped.append((image_id, error))
            continue
        for b, vec in zip(bases, vectors):
            rows[b].append(vec.values)
        labels.append(label)
        ids.append(image_id)
    if skipped:
        log.info("extracted %d images, skipped %d", len(ids), len(skipped))
    out = {}
    for b in bases:
        values = np.array(rows[b]).reshape(len(ids), len(names[b]))
        out[b] = FeatureMatrix(names[b], values, labels, list(ids), skipped=list(skipped))
    return out
