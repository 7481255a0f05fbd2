"""Labelled synthetic phantoms standing in for a clinical mammogram corpus.

A phantom is a smooth tissue field (a few low-frequency cosine modes plus
uniform noise) filling a half-plane on one side of the frame, next to a
dark non-tissue background. Lesions are added on top:
masses as truncated Gaussian bumps and microcalcifications as small bright
discs. A lesion's ``contrast`` is how far its peak rises above the
brightest background tissue pixel.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .imgio import GrayImage, save_pgm

MASS_RADIUS = (10, 80)
CALC_RADIUS = (1, 3)
MASS_CONTRAST = (0.04, 0.16)
CALC_CONTRAST = (0.10, 0.30)
CALCS_PER_CLUSTER = (4, 10)
TISSUE_BASE = (0.40, 0.50)
TISSUE_FRACTION = (0.55, 0.80)
MODE_AMPLITUDE = (0.01, 0.04)
TISSUE_NOISE = 0.06
DARK_LEVEL = 0.02
DARK_NOISE = 0.02
# stored value = intensity * maxval / OUTPUT_RANGE
OUTPUT_RANGE = 1.25


class LesionPlacementError(ValueError):
    pass


@dataclass(frozen=True)
class Lesion:
    kind: str  # "mass" or "microcalcification"
    row: int
    col: int
    radius: int
    contrast: float

    def __post_init__(self):
        if self.kind not in ("mass", "microcalcification"):
            raise ValueError(f"unknown lesion kind {self.kind!r}")
        if self.radius < 1:
            raise ValueError("lesion radius must be >= 1 px")
        if not self.contrast > 0:
            raise ValueError("lesion contrast must be positive")


@dataclass(frozen=True)
class PhantomSpec:
    height: int = 1024
    width: int = 1024
    side: str = "left"
    tissue_base: float = 0.45
    modes: tuple = ()  # (amplitude, cycles_y, cycles_x, phase)
    noise: float = TISSUE_NOISE
    tissue_fraction: float = 0.65  # share of the width covered by tissue
    lesions: tuple = field(default_factory=tuple)
    seed: int = 0


def breast_region(spec: PhantomSpec) -> np.ndarray:
    """Tissue half-plane: the columns nearest the chest-wall side."""
    h, w = spec.height, spec.width
    cols = int(round(spec.tissue_fraction * w))
    region = np.zeros((h, w), dtype=bool)
    if spec.side == "left":
        region[:, :cols] = True
    else:
        region[:, w - cols:] = True
    return region


def background(spec: PhantomSpec) -> tuple[np.ndarray, np.ndarray]:
    """Background field and breast-region mask for ``spec``."""
    if spec.side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {spec.side!r}")
    h, w = spec.height, spec.width
    rng = np.random.default_rng(spec.seed)
    region = breast_region(spec)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    tissue = np.full((h, w), spec.tissue_base)
    for amp, fy, fx, phase in spec.modes:
        tissue += amp * np.cos(2.0 * np.pi * (fy * yy / h + fx * xx / w) + phase)
    tissue += rng.uniform(0.0, spec.noise, size=(h, w))
    dark = DARK_LEVEL + rng.uniform(0.0, DARK_NOISE, size=(h, w))
    field_ = np.where(region, tissue, dark)
    return np.clip(field_, 0.0, None), region


def _support(lesion: Lesion):
    """Pixel offsets (dy, dx) and profile values of a lesion's footprint."""
    r = lesion.radius
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    dist2 = (dy * dy + dx * dx).astype(np.float64)
    inside = dist2 <= r * r
    if lesion.kind == "mass":
        sigma = r / 3.0
        profile = np.exp(-dist2 / (2.0 * sigma * sigma))
    else:
        profile = np.ones_like(dist2)
    return dy[inside], dx[inside], profile[inside]


def render_lesions(field_: np.ndarray, region: np.ndarray, lesions) -> np.ndarray:
    out = field_
    peak = float(field_[region].max()) if region.any() else float(field_.max())
    h, w = field_.shape
    for lesion in lesions:
        dy, dx, _ = _support(lesion)
        rows, cols = lesion.row + dy, lesion.col + dx
        if (rows.min() < 0 or cols.min() < 0 or rows.max() >= h or cols.max() >= w
                or not region[rows, cols].all()):
            raise LesionPlacementError(f"{lesion} does not lie inside the breast region")
    # overlapping lesions combine by maximum so no peak exceeds its stated contrast
    layer = np.zeros_like(field_)
    for lesion in lesions:
        dy, dx, profile = _support(lesion)
        amplitude = lesion.contrast + (peak - field_[lesion.row, lesion.col])
        rows, cols = lesion.row + dy, lesion.col + dx
        layer[rows, cols] = np.maximum(layer[rows, cols], amplitude * profile)
    return out + layer


def generate(spec: PhantomSpec) -> tuple[GrayImage, int]:
    """Render a phantom; the label is 1 exactly when it carries lesions."""
    field_, region = background(spec)
    img = render_lesions(field_, region, spec.lesions)
    return GrayImage(img), int(len(spec.lesions) > 0)


def _inside_point(rng, region: np.ndarray, margin: int):
    """Random pixel whose disc of radius ``margin`` lies in the region."""
    h, w = region.shape
    for _ in range(1000):
        r = int(rng.integers(margin, h - margin))
        c = int(rng.integers(margin, w - margin))
        if region[r - margin:r + margin + 1, c - margin:c + margin + 1][
            np.hypot(*np.mgrid[-margin:margin + 1, -margin:margin + 1]) <= margin
        ].all():
            return r, c
    raise LesionPlacementError("could not place a lesion inside the breast region")


def random_spec(rng: np.random.Generator, seed: int, cancerous: bool, height: int = 1024, width: int = 1024) -> PhantomSpec:
    """Draw a phantom specification from the documented parameter ranges."""
    side = "left" if rng.random() < 0.5 else "right"
    modes = tuple(
        (float(rng.uniform(*MODE_AMPLITUDE)), float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 3.0)),
         float(rng.uniform(0.0, 2.0 * np.pi)))
        for _ in range(3)
    )
    spec = PhantomSpec(height=height, width=width, side=side, tissue_base=float(rng.uniform(*TISSUE_BASE)),
                       modes=modes, tissue_fraction=float(rng.uniform(*TISSUE_FRACTION)), seed=seed)
    if not cancerous:
        return spec
    region = breast_region(spec)
    scale = min(height, width) / 1024.0
    lesions = []
    kind = rng.integers(0, 3)  # 0 mass, 1 calcification cluster, 2 both
    if kind in (0, 2):
        hi = max(MASS_RADIUS[0], int(MASS_RADIUS[1] * scale))
        radius = int(rng.integers(MASS_RADIUS[0], hi + 1))
        r, c = _inside_point(rng, region, radius)
        lesions.append(Lesion("mass", r, c, radius, float(rng.uniform(*MASS_CONTRAST))))
    if kind in (1, 2):
        spread = max(4, int(30 * scale))
        cr, cc = _inside_point(rng, region, int(np.ceil(spread * np.sqrt(2.0))) + CALC_RADIUS[1])
        for _ in range(int(rng.integers(CALCS_PER_CLUSTER[0], CALCS_PER_CLUSTER[1] + 1))):
            radius = int(rng.integers(CALC_RADIUS[0], CALC_RADIUS[1] + 1))
            r = cr + int(rng.integers(-spread, spread + 1))
            c = cc + int(rng.integers(-spread, spread + 1))
            lesions.append(Lesion("microcalcification", r, c, radius, float(rng.uniform(*CALC_CONTRAST))))
    return PhantomSpec(**{**spec.__dict__, "lesions": tuple(lesions)})


def generate_corpus(n_normal: int, n_cancer: int, seed: int, out_dir=None, height: int = 1024,
                    width: int = 1024, maxval: int = 255):
    """Generate ``n_normal`` normal then ``n_cancer`` lesioned phantoms.

    Image ``i`` draws its specification and noise from seed ``seed + i``.
    With ``out_dir`` the images are written as P5 PGM files together with a
    ``manifest.csv`` of ``filename,label`` rows.
    """
    if n_normal < 0 or n_cancer < 0:
        raise ValueError("counts must be >= 0")
    items = []
    entries = []
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    for i in range(n_normal + n_cancer):
        cancerous = i >= n_normal
        # spec draws and pixel noise use separate streams derived from seed + i
        rng = np.random.default_rng((seed + i, 1))
        spec = random_spec(rng, seed + i, cancerous, height, width)
        img, label = generate(spec)
        items.append((img, label))
        if out_dir is not None:
            name = f"phantom_{i:05d}.pgm"
            save_pgm(GrayImage(img.pixels * (maxval / OUTPUT_RANGE)), os.path.join(out_dir, name), maxval=maxval)
            entries.append((name, label))
    if out_dir is not None:
        with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["filename", "label"])
            writer.writerows(entries)
    return items
