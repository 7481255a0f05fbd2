"""Entropy-based information-gain feature ranking.

Continuous features are discretized by equal-frequency (rank quantile)
binning before entropies are estimated from empirical frequencies.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

DEFAULT_BINS = 10
DEFAULT_IG_THRESHOLD = 0.74


class NoGainError(ValueError):
    """Selection is meaningless when the labels carry no entropy."""


def _check_nonempty(values, what="sequence"):
    if len(values) == 0:
        raise ValueError(f"empty {what}")


def _h(counts, total) -> float:
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * np.log2(p)
    return float(h)


def entropy(values) -> float:
    """Shannon entropy in bits of the empirical symbol distribution."""
    values = list(np.asarray(values).ravel().tolist()) if isinstance(values, np.ndarray) else list(values)
    _check_nonempty(values)
    counts = Counter(values)
    return _h(sorted(counts.values()), len(values))


def conditional_entropy(x, y) -> float:
    """H(X | Y) in bits."""
    x = list(np.asarray(x).tolist())
    y = list(np.asarray(y).tolist())
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    _check_nonempty(x)
    n = len(x)
    groups: dict = {}
    for xi, yi in zip(x, y):
        groups.setdefault(yi, Counter())[xi] += 1
    h = 0.0
    for key in sorted(groups, key=repr):
        counts = groups[key]
        ny = sum(counts.values())
        h += (ny / n) * _h(sorted(counts.values()), ny)
    return float(h)


def information_gain(feature, label) -> float:
    """IG = H(label) - H(label | feature), clipped at zero against rounding."""
    if len(feature) != len(label):
        raise ValueError(f"length mismatch: {len(feature)} vs {len(label)}")
    ig = entropy(label) - conditional_entropy(label, feature)
    return max(ig, 0.0)


@dataclass(frozen=True)
class DiscretizationRule:
    """Per-feature interior bin edges. ``bin_of`` maps values to bin indices."""

    edges: tuple
    bin_count: int

    def bin_of(self, values) -> np.ndarray:
        return np.searchsorted(np.asarray(self.edges, dtype=np.float64), np.asarray(values, dtype=np.float64), side="right")

    @property
    def n_bins(self) -> int:
        return len(self.edges) + 1


def equal_frequency_rule(values, bins: int = DEFAULT_BINS) -> DiscretizationRule:
    """Quantile edges taken at ranks ceil(i*n/bins), duplicates collapsed.

    Equal values always share a bin, and since edges are picked by rank the
    assignment is unchanged by any strictly increasing transform.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    n = len(v)
    _check_nonempty(v, "feature column")
    edges = []
    for i in range(1, bins):
        pos = -(-i * n // bins)  # ceil
        if 0 < pos < n:
            e = float(v[pos])
            if e > v[0] and (not edges or e > edges[-1]):
                edges.append(e)
    return DiscretizationRule(tuple(edges), bins)


def discretize(column, bins: int = DEFAULT_BINS):
    rule = equal_frequency_rule(column, bins)
    return rule.bin_of(column), rule


@dataclass
class FeatureScore:
    name: str
    entropy: float
    conditional_entropy: float
    information_gain: float
    selected: bool = False


@dataclass
class RankedFeatures:
    """Features sorted by information gain (ties by name)."""

    ranking: list
    ig_threshold: float | None
    top_k: int | None
    bins: int
    label_entropy: float

    @property
    def selected(self) -> list[str]:
        return [s.name for s in self.ranking if s.selected]

    def to_json(self) -> str:
        doc = {
            "bins": self.bins,
            "ig_threshold": self.ig_threshold,
            "label_entropy": self.label_entropy,
            "top_k": self.top_k,
            "features": [
                {
                    "name": s.name,
                    "entropy": s.entropy,
                    "conditional_entropy": s.conditional_entropy,
                    "information_gain": s.information_gain,
                    "selected": s.selected,
                }
                for s in self.ranking
            ],
            "selected": self.selected,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RankedFeatures":
        doc = json.loads(text)
        ranking = [
            FeatureScore(f["name"], f["entropy"], f["conditional_entropy"], f["information_gain"], f["selected"])
            for f in doc["features"]
        ]
        return cls(ranking, doc["ig_threshold"], doc["top_k"], doc["bins"], doc["label_entropy"])


def select(matrix, bins: int = DEFAULT_BINS, ig_threshold: float | None = DEFAULT_IG_THRESHOLD,
           top_k: int | None = None) -> RankedFeatures:
    """Rank every column of ``matrix`` by information gain about the labels.

    Features are first listed by decreasing entropy, then scored and re-sorted
    by decreasing information gain. A feature is selected when its gain
    exceeds ``ig_threshold`` (if given) and it ranks within ``top_k`` (if
    given).
    """
    labels = np.asarray(matrix.labels)
    if len(labels) < 2:
        raise ValueError("selection needs at least two rows")
    h_label = entropy(labels)
    if h_label == 0.0:
        raise NoGainError("only one class present; information gain is zero for every feature")

    scores = []
    for j, name in enumerate(matrix.feature_names):
        symbols, _ = discretize(matrix.values[:, j], bins)
        scores.append(FeatureScore(name, entropy(symbols), 0.0, 0.0))
    # step 1: the linked list in decreasing-entropy order
    scores.sort(key=lambda s: (-s.entropy, s.name))
    column = {n: j for j, n in enumerate(matrix.feature_names)}
    for s in scores:
        symbols, _ = discretize(matrix.values[:, column[s.name]], bins)
        s.conditional_entropy = conditional_entropy(labels, symbols)
        s.information_gain = max(h_label - s.conditional_entropy, 0.0)
    scores.sort(key=lambda s: (-s.information_gain, s.name))
    for rank, s in enumerate(scores):
        ok = True
        if ig_threshold is not None:
            ok = s.information_gain > ig_threshold
        if top_k is not None:
            ok = ok and rank < top_k
        s.selected = ok
    return RankedFeatures(scores, ig_threshold, top_k, bins, h_label)
