"""Stage orchestration: corpus -> features -> selection -> models -> reports.

Every stage reads its inputs from, and writes its outputs to, one artifact
directory. Layout::

    config.json                  effective configuration
    corpus/                      synthetic images and manifest.csv (synth only)
    features/{basis}.csv         one matrix per wavelet basis (plus Fourier)
    features/skipped.csv         images that could not be processed
    split.json                   train / test image ids
    selection/{set}.json         ranked features per feature set
    models/{set}/{clf}.json      LDA, BP and NB models
    predictions/{set}.csv        per-image scores and labels
    reports/{set}/{clf}.json     metrics; ROC in reports/{set}/{clf}_roc.csv
    summary.csv, summary.md      accuracy / sensitivity / specificity table

A feature set is one basis with the Fourier features, or ``optimal``: the
union of all configured bases ranked together.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import classify, evaluation, selection, synth
from .features import DEFAULT_LEVELS, FeatureMatrix, build_matrix, read_manifest
from .transforms import BASIS_NAMES, MAX_LEVEL, MODES

log = logging.getLogger(__name__)

CLASSIFIERS = ("lda", "bp", "nb", "voting")
# row order of the summary table
SET_ORDER = ("db2", "bior6.8", "db4", "optimal")
STAGE_CODES = {"config": 2, "synth": 3, "extract": 4, "select": 5, "train": 6, "eval": 7, "report": 8}
FAILED_MARKER = "FAILED"


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """A stage failed; ``stage`` selects the exit code."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage

    @property
    def exit_code(self) -> int:
        return STAGE_CODES[self.stage]


class MissingArtifactError(StageError):
    def __init__(self, stage: str, path: str, producer: str):
        super().__init__(stage, f"{stage} needs {path}, which is produced by the '{producer}' stage")
        self.path = path
        self.producer = producer


class EmptySelectionError(StageError):
    pass


@dataclass
class SynthConfig:
    n_normal: int = 100
    n_cancer: int = 100
    height: int = 1024
    width: int = 1024
    maxval: int = 255


@dataclass
class PipelineConfig:
    manifest: str | None = None  # None: generate a synthetic corpus
    synth: SynthConfig = field(default_factory=SynthConfig)
    resolution: int = 1024
    bases: list = field(default_factory=lambda: list(BASIS_NAMES))
    levels: list = field(default_factory=lambda: list(DEFAULT_LEVELS))
    mode: str = "reflect"
    otsu_bins: int = 256
    bins: int = selection.DEFAULT_BINS
    ig_threshold: float | None = selection.DEFAULT_IG_THRESHOLD
    top_k: int | None = None
    bp_eta: float = 0.1
    bp_epochs: int = 200
    bp_hidden: int = 15
    nb_kind: str = "gaussian"
    split: float = 0.7
    stratify: bool = True
    seed: int = 0

    def validate(self) -> "PipelineConfig":
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must lie in (0, 1), got {self.split}")
        if not self.bases:
            raise ConfigError("at least one basis is required")
        unknown = [b for b in self.bases if b not in BASIS_NAMES]
        if unknown:
            raise ConfigError(f"unknown bases {unknown}; choose from {list(BASIS_NAMES)}")
        if len(set(self.bases)) != len(self.bases):
            raise ConfigError("bases must not repeat")
        if len(self.levels) != 2 or not 1 <= self.levels[0] <= self.levels[1] <= MAX_LEVEL:
            raise ConfigError(f"levels must be a range within [1, {MAX_LEVEL}], got {self.levels}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {list(MODES)}")
        if self.resolution < 2 ** self.levels[1]:
            raise ConfigError(f"resolution {self.resolution} too small for {self.levels[1]} levels")
        if self.bins < 2 or self.otsu_bins < 2:
            raise ConfigError("bin counts must be >= 2")
        if self.top_k is not None and self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.ig_threshold is None and self.top_k is None:
            raise ConfigError("selection needs an IG threshold, a top-k cap or both")
        if self.bp_eta <= 0 or self.bp_epochs < 1 or self.bp_hidden < 1:
            raise ConfigError("BP needs eta > 0, epochs >= 1 and hidden >= 1")
        if self.nb_kind not in ("gaussian", "discrete"):
            raise ConfigError("nb_kind must be 'gaussian' or 'discrete'")
        s = self.synth
        if self.manifest is None and (s.n_normal < 0 or s.n_cancer < 0 or s.n_normal + s.n_cancer == 0):
            raise ConfigError("synthetic corpus needs a positive image count")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(doc) - names
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        doc = dict(doc)
        if "synth" in doc:
            sub = doc["synth"] or {}
            extra = set(sub) - {f.name for f in dataclasses.fields(SynthConfig)}
            if extra:
                raise ConfigError(f"unknown synth keys: {sorted(extra)}")
            doc["synth"] = SynthConfig(**sub)
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def set_names(config: PipelineConfig) -> list[str]:
    return [s for s in SET_ORDER if s in config.bases or s == "optimal"]


def display_name(set_name: str) -> str:
    return "optimal" if set_name == "optimal" else f"{set_name}-Fourier"


# ---------------------------------------------------------------------------
# files


def _path(out: str, *parts) -> str:
    return os.path.join(out, *parts)


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_json(path: str, doc) -> None:
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _require(stage: str, out: str, rel: str, producer: str) -> str:
    path = _path(out, rel)
    if not os.path.exists(path):
        raise MissingArtifactError(stage, rel, producer)
    return path


def write_config(config: PipelineConfig, out: str) -> None:
    _write_json(_path(out, "config.json"), config.to_dict())


def mark_failed(out: str, error: StageError) -> None:
    os.makedirs(out, exist_ok=True)
    _write_text(_path(out, FAILED_MARKER), f"stage: {error.stage}\nerror: {error}\n")


def clear_failed(out: str) -> None:
    marker = _path(out, FAILED_MARKER)
    if os.path.exists(marker):
        os.remove(marker)


# ---------------------------------------------------------------------------
# split


def split_indices(labels, fraction: float, seed: int, stratify: bool = True):
    """Seeded shuffle then prefix split.

    The train set holds ``floor(fraction * n)`` rows. With stratification each
    class contributes its floor share and leftover slots go to the classes
    with the largest fractional remainder (lower label first on ties). Train
    indices come back in shuffled order, test indices in corpus order.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    # exact decimal value, so 0.7 * 670 is 469 rather than 468.999...
    fraction = Fraction(repr(float(fraction)))
    n_train = math.floor(fraction * n)
    perm = np.random.default_rng(seed).permutation(n)
    if not stratify:
        train = perm[:n_train]
    else:
        classes = sorted(set(labels.tolist()))
        counts = {c: int(np.sum(labels == c)) for c in classes}
        quota = {c: math.floor(fraction * counts[c]) for c in classes}
        left = n_train - sum(quota.values())
        by_remainder = sorted(classes, key=lambda c: (quota[c] - fraction * counts[c], c))
        for c in by_remainder[:left]:
            quota[c] += 1
        taken = {c: 0 for c in classes}
        train = []
        for i in perm:
            c = int(labels[i])
            if taken[c] < quota[c]:
                taken[c] += 1
                train.append(int(i))
        train = np.array(train, dtype=np.intp)
    test = np.setdiff1d(np.arange(n), train)
    return np.asarray(train, dtype=np.intp), test


# ---------------------------------------------------------------------------
# stages


def stage_synth(config: PipelineConfig, out: str) -> str:
    """Write the synthetic corpus; returns the manifest path."""
    s = config.synth
    corpus = _path(out, "corpus")
    try:
        synth.generate_corpus(s.n_normal, s.n_cancer, config.seed, out_dir=corpus, height=s.height,
                              width=s.width, maxval=s.maxval)
    except (ValueError, OSError) as exc:
        raise StageError("synth", f"corpus generation failed: {exc}") from exc
    return _path(corpus, "manifest.csv")


def _manifest_path(config: PipelineConfig, out: str) -> str:
    if config.manifest is not None:
        if not os.path.exists(config.manifest):
            raise MissingArtifactError("extract", config.manifest, "user")
        return config.manifest
    return _require("extract", out, os.path.join("corpus", "manifest.csv"), "synth")


def stage_extract(config: PipelineConfig, out: str, workers: int = 1) -> dict:
    manifest = _manifest_path(config, out)
    try:
        corpus = read_manifest(manifest)
        matrices = build_matrix(corpus, config.bases, tuple(config.levels), config.resolution, config.otsu_bins,
                                workers=workers, mode=config.mode)
    except (ValueError, OSError) as exc:
        raise StageError("extract", f"feature extraction failed: {exc}") from exc
    first = matrices[config.bases[0]]
    if len(first) == 0:
        raise StageError("extract", "no image could be processed")
    os.makedirs(_path(out, "features"), exist_ok=True)
    for basis, m in matrices.items():
        m.write_csv(_path(out, "features", f"{basis}.csv"))
    with open(_path(out, "features", "skipped.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "reason"])
        writer.writerows(first.skipped)
    log.info("extracted %d images (%d skipped)", len(first), len(first.skipped))
    return matrices


def load_features(config: PipelineConfig, out: str, stage: str) -> dict:
    matrices = {}
    for basis in config.bases:
        path = _require(stage, out, os.path.join("features", f"{basis}.csv"), "extract")
        matrices[basis] = FeatureMatrix.read_csv(path)
    return matrices


def feature_sets(matrices: dict, config: PipelineConfig) -> dict:
    sets = {b: matrices[b] for b in config.bases}
    sets["optimal"] = FeatureMatrix.join([matrices[b] for b in config.bases])
    return {name: sets[name] for name in set_names(config)}


def stage_select(config: PipelineConfig, out: str) -> dict:
    matrices = load_features(config, out, "select")
    sets = feature_sets(matrices, config)
    any_set = next(iter(sets.values()))
    train, test = split_indices(any_set.labels, config.split, config.seed, config.stratify)
    ids = any_set.image_ids
    _write_json(_path(out, "split.json"), {
        "fraction": config.split,
        "seed": config.seed,
        "stratify": config.stratify,
        "train": [ids[i] for i in train],
        "test": [ids[i] for i in test],
    })
    rankings = {}
    for name, matrix in sets.items():
        try:
            ranked = selection.select(matrix.rows(train), config.bins, config.ig_threshold, config.top_k)
        except ValueError as exc:
            raise StageError("select", f"{name}: {exc}") from exc
        _write_text(_path(out, "selection", f"{name}.json"), ranked.to_json())
        rankings[name] = ranked
        log.info("%s: %d of %d features selected", name, len(ranked.selected), len(ranked.ranking))
    return rankings


def _load_split(out: str, stage: str) -> dict:
    with open(_require(stage, out, "split.json", "select")) as fh:
        return json.load(fh)


def _rows_by_id(matrix: FeatureMatrix, ids, stage: str) -> FeatureMatrix:
    index = {image_id: i for i, image_id in enumerate(matrix.image_ids)}
    missing = [i for i in ids if i not in index]
    if missing:
        raise StageError(stage, f"split refers to images missing from the features: {missing[:5]}")
    return matrix.rows([index[i] for i in ids])


def stage_train(config: PipelineConfig, out: str) -> dict:
    matrices = load_features(config, out, "train")
    split = _load_split(out, "train")
    ensembles = {}
    for name, matrix in feature_sets(matrices, config).items():
        with open(_require("train", out, os.path.join("selection", f"{name}.json"), "select")) as fh:
            ranked = selection.RankedFeatures.from_json(fh.read())
        if not ranked.selected:
            raise EmptySelectionError("train", f"feature set {name!r}: selection is empty, nothing to classify on")
        X = _rows_by_id(matrix, split["train"], "train").columns(ranked.selected)
        try:
            ens = classify.train_ensemble(X, hidden=config.bp_hidden, eta=config.bp_eta, epochs=config.bp_epochs,
                                          seed=config.seed, nb_kind=config.nb_kind, bins=config.bins)
        except (ValueError, classify.BpDivergenceError) as exc:
            raise StageError("train", f"{name}: {exc}") from exc
        for clf, model in ens.models().items():
            _write_json(_path(out, "models", name, f"{clf}.json"), model.to_dict())
        ensembles[name] = ens
    return ensembles


def load_ensemble(out: str, name: str, stage: str = "eval") -> classify.TrainedEnsemble:
    docs = {}
    for clf in ("lda", "bp", "nb"):
        with open(_require(stage, out, os.path.join("models", name, f"{clf}.json"), "train")) as fh:
            docs[clf] = json.load(fh)
    return classify.TrainedEnsemble(
        list(docs["lda"]["feature_names"]),
        classify.LdaModel.from_dict(docs["lda"]),
        classify.BpNetwork.from_dict(docs["bp"]),
        classify.NbModel.from_dict(docs["nb"]),
    )


def _write_predictions(path: str, matrix: FeatureMatrix, all_scores: dict) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "label", *(f"{c}_score" for c in CLASSIFIERS), *CLASSIFIERS])
        for i, image_id in enumerate(matrix.image_ids):
            s = [float(all_scores[c][i]) for c in CLASSIFIERS]
            writer.writerow([image_id, int(matrix.labels[i]), *(format(v, ".17g") for v in s),
                             *(int(v > 0) for v in s)])


def stage_eval(config: PipelineConfig, out: str, test_matrix: FeatureMatrix | None = None) -> dict:
    """Score the test rows with every trained set and write reports.

    ``test_matrix`` replaces the test split with externally supplied rows;
    feature sets whose columns it lacks are skipped.
    """
    reports = {}
    if test_matrix is None:
        matrices = load_features(config, out, "eval")
        split = _load_split(out, "eval")
        sets = {name: _rows_by_id(m, split["test"], "eval") for name, m in feature_sets(matrices, config).items()}
    else:
        sets = {name: test_matrix for name in set_names(config)}
    for name, matrix in sets.items():
        ens = load_ensemble(out, name)
        if test_matrix is not None and not set(ens.feature_names) <= set(matrix.feature_names):
            log.info("skipping %s: features not supplied", name)
            continue
        if len(matrix) == 0:
            raise StageError("eval", "no test rows")
        X = matrix.columns(ens.feature_names)
        all_scores = ens.all_scores(X)
        _write_predictions(_path(out, "predictions", f"{name}.csv"), X, all_scores)
        reports[name] = {}
        for clf in CLASSIFIERS:
            try:
                rep = evaluation.evaluate(all_scores[clf], X.labels)
            except ValueError as exc:
                raise StageError("eval", f"{name}/{clf}: {exc}") from exc
            _write_text(_path(out, "reports", name, f"{clf}.json"), rep.to_json())
            if rep.auc is not None:
                rep.write_roc_csv(_path(out, "reports", name, f"{clf}_roc.csv"))
            reports[name][clf] = rep
    if not reports:
        raise StageError("eval", "no feature set could be evaluated")
    return reports


def _fmt(v) -> str:
    return "n/a" if v is None else f"{100.0 * v:.2f}%"


def summary_rows(reports: dict) -> list[list]:
    rows = []
    for name in SET_ORDER:
        if name not in reports:
            continue
        for metric in ("accuracy", "sensitivity", "specificity"):
            rows.append([display_name(name), metric, *(getattr(reports[name][c], metric) for c in CLASSIFIERS)])
    return rows


def stage_report(out: str, reports: dict) -> str:
    """Write summary.csv and summary.md; returns the markdown table."""
    try:
        rows = summary_rows(reports)
        with open(_path(out, "summary.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["feature_set", "metric", *(c.upper() for c in CLASSIFIERS)])
            for row in rows:
                writer.writerow([*row[:2], *("" if v is None else format(v, ".17g") for v in row[2:])])
        lines = ["| Feature set | Metric | " + " | ".join(c.upper() for c in CLASSIFIERS) + " |",
                 "|---|---|" + "---|" * len(CLASSIFIERS)]
        for row in rows:
            lines.append(f"| {row[0]} | {row[1].capitalize()} | " + " | ".join(_fmt(v) for v in row[2:]) + " |")
        table = "\n".join(lines) + "\n"
        _write_text(_path(out, "summary.md"), table)
    except (OSError, KeyError) as exc:
        raise StageError("report", f"summary failed: {exc}") from exc
    return table


def load_reports(out: str, config: PipelineConfig) -> dict:
    reports = {}
    for name in set_names(config):
        per = {}
        for clf in CLASSIFIERS:
            path = _path(out, "reports", name, f"{clf}.json")
            if not os.path.exists(path):
                break
            with open(path) as fh:
                doc = json.load(fh)
            c = doc["counts"]
            per[clf] = evaluation.EvalReport(c["tp"], c["fp"], c["tn"], c["fn"], auc=doc["auc"])
        else:
            reports[name] = per
    if not reports:
        raise MissingArtifactError("report", "reports/", "eval")
    return reports


def guarded(stage: str, fn, *args, **kwargs):
    """Call a stage, turning any unexpected exception into a StageError."""
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc


def run_pipeline(config: PipelineConfig, out: str, workers: int = 1) -> str:
    """Run every stage in order; returns the summary table."""
    config.validate()
    os.makedirs(out, exist_ok=True)
    clear_failed(out)
    write_config(config, out)
    try:
        if config.manifest is None:
            guarded("synth", stage_synth, config, out)
        guarded("extract", stage_extract, config, out, workers)
        guarded("select", stage_select, config, out)
        guarded("train", stage_train, config, out)
        reports = guarded("eval", stage_eval, config, out)
        return guarded("report", stage_report, out, reports)
    except StageError as exc:
        mark_failed(out, exc)
        raise
