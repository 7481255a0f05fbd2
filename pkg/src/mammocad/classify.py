"""Fisher LDA, a one-hidden-layer backpropagation network, Naive Bayes, and
their majority vote.

Every model exposes a real-valued score whose sign gives the label: a
score strictly greater than zero means cancerous (1); zero or below means
normal (0).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMatrix, FeatureVector
from .selection import DEFAULT_BINS, equal_frequency_rule


class DegenerateModelError(ValueError):
    pass


class SingleClassError(ValueError):
    pass


class BpDivergenceError(FloatingPointError):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite network parameter after epoch {epoch}")
        self.epoch = epoch


class DimensionMismatchError(ValueError):
    pass


def _class_split(X: FeatureMatrix, min_per_class: int = 1):
    y = np.asarray(X.labels)
    x0, x1 = X.values[y == 0], X.values[y == 1]
    if len(x0) < min_per_class or len(x1) < min_per_class:
        raise SingleClassError(
            f"need at least {min_per_class} sample(s) of each class, got {len(x0)} normal / {len(x1)} cancerous"
        )
    return x0, x1


def _rows(model_names, x):
    """Coerce a FeatureVector / FeatureMatrix / array into an (n, d) array."""
    if isinstance(x, FeatureVector):
        lookup = dict(zip(x.names, x.values))
        try:
            return np.array([[lookup[n] for n in model_names]])
        except KeyError as exc:
            raise DimensionMismatchError(f"feature {exc.args[0]} missing from input") from None
    if isinstance(x, FeatureMatrix):
        return x.columns(model_names).values
    arr = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if arr.shape[1] != len(model_names):
        raise DimensionMismatchError(f"expected {len(model_names)} features, got {arr.shape[1]}")
    return arr


def _floats(a):
    return np.asarray(a, dtype=np.float64).tolist()


# ---------------------------------------------------------------------------
# LDA


@dataclass
class LdaModel:
    feature_names: list
    w: np.ndarray
    b: float
    mean0: np.ndarray
    mean1: np.ndarray
    s_w: np.ndarray
    s_b: np.ndarray
    ridge: float = 0.0

    def scores(self, x) -> np.ndarray:
        return _rows(self.feature_names, x) @ self.w - self.b

    def to_dict(self):
        return {
            "feature_names": list(self.feature_names),
            "w": _floats(self.w),
            "b": float(self.b),
            "mean0": _floats(self.mean0),
            "mean1": _floats(self.mean1),
            "s_w": _floats(self.s_w),
            "s_b": _floats(self.s_b),
            "ridge": float(self.ridge),
        }

    @classmethod
    def from_dict(cls, d):
        arr = {k: np.array(d[k], dtype=np.float64) for k in ("w", "mean0", "mean1", "s_w", "s_b")}
        return cls(list(d["feature_names"]), b=d["b"], ridge=d["ridge"], **arr)


def scatter_matrices(x0: np.ndarray, x1: np.ndarray):
    """Between- and within-class scatter, both normalized by the sample count."""
    n = len(x0) + len(x1)
    m = np.vstack([x0, x1]).mean(axis=0)
    s_b = np.zeros((x0.shape[1], x0.shape[1]))
    s_w = np.zeros_like(s_b)
    for xc in (x0, x1):
        mc = xc.mean(axis=0)
        s_b += np.outer(mc - m, mc - m)
        d = xc - mc
        s_w += d.T @ d
    return s_b / n, s_w / n


def train_lda(X: FeatureMatrix, cond_limit: float = 1e10) -> LdaModel:
    """Fisher direction w = S_w^-1 (mu_cancer - mu_normal).

    When S_w is singular or badly conditioned (judged after scaling each
    feature to unit within-class variance) a ridge of 1e-6 * trace / d is
    added in the scaled coordinates.
    """
    x0, x1 = _class_split(X, min_per_class=2)
    s_b, s_w = scatter_matrices(x0, x1)
    mu0, mu1 = x0.mean(axis=0), x1.mean(axis=0)
    diff = mu1 - mu0
    if not np.any(diff):
        raise DegenerateModelError("class means coincide; the Fisher direction is zero")

    d = s_w.shape[0]
    diag = np.diag(s_w).copy()
    scale = np.where(diag > 0, np.sqrt(diag), 1.0)
    scaled = s_w / np.outer(scale, scale)
    ridge = 0.0
    if not np.all(np.isfinite(scaled)) or np.linalg.cond(scaled) > cond_limit:
        ridge = 1e-6 * np.trace(scaled) / d
        if ridge == 0.0:
            raise DegenerateModelError("within-class scatter is zero")
        scaled = scaled + ridge * np.eye(d)
    w = np.linalg.solve(scaled, diff / scale) / scale
    if not np.all(np.isfinite(w)) or not np.any(w):
        raise DegenerateModelError("Fisher direction is not finite")
    p0, p1 = float(mu0 @ w), float(mu1 @ w)
    if p1 < p0:
        w = -w
        p0, p1 = -p0, -p1
    return LdaModel(list(X.feature_names), w, 0.5 * (p0 + p1), mu0, mu1, s_w, s_b, ridge)


# ---------------------------------------------------------------------------
# Backpropagation network


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class BpNetwork:
    """n-l-2 network: sigmoid hidden layer, linear outputs, subtracted thresholds.

    ``w_ih[i, j]`` connects input i to hidden j, ``w_ho[j, k]`` hidden j to
    output k; ``a`` and ``b`` are the hidden and output thresholds. Output 1
    is the cancerous unit. Inputs are standardized with ``offset``/``scale``
    before entering the network.
    """

    feature_names: list
    w_ih: np.ndarray
    a: np.ndarray
    w_ho: np.ndarray
    b: np.ndarray
    eta: float = 0.1
    epochs: int = 0
    seed: int | None = None
    offset: np.ndarray | None = None
    scale: np.ndarray | None = None
    loss_history: list = field(default_factory=list)

    @property
    def layer_sizes(self):
        return self.w_ih.shape[0], self.w_ih.shape[1], self.w_ho.shape[1]

    def _standardize(self, x):
        if self.offset is None:
            return x
        return (x - self.offset) / self.scale

    def forward(self, x):
        """Hidden activations and outputs for already-standardized input(s)."""
        h = sigmoid(x @ self.w_ih - self.a)
        return h, h @ self.w_ho - self.b

    def step(self, x: np.ndarray, y: np.ndarray) -> float:
        """One online update on a single standardized sample; returns 1/2 sum e^2
        measured before the update."""
        h, o = self.forward(x)
        e = y - o
        back = h * (1.0 - h) * (self.w_ho @ e)
        self.w_ih += self.eta * np.outer(x, back)
        self.w_ho += self.eta * np.outer(h, e)
        self.a -= self.eta * back
        self.b -= self.eta * e
        return 0.5 * float(e @ e)

    def loss(self, x: np.ndarray, targets: np.ndarray) -> float:
        _, o = self.forward(x)
        e = targets - o
        return 0.5 * float(np.sum(e * e))

    def scores(self, x) -> np.ndarray:
        _, o = self.forward(self._standardize(_rows(self.feature_names, x)))
        return o[:, 1] - o[:, 0]

    def parameters_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in (self.w_ih, self.a, self.w_ho, self.b))

    def to_dict(self):
        return {
            "feature_names": list(self.feature_names),
            "layer_sizes": list(self.layer_sizes),
            "w_ih": _floats(self.w_ih),
            "a": _floats(self.a),
            "w_ho": _floats(self.w_ho),
            "b": _floats(self.b),
            "eta": self.eta,
            "epochs": self.epochs,
            "seed": self.seed,
            "offset": None if self.offset is None else _floats(self.offset),
            "scale": None if self.scale is None else _floats(self.scale),
            "loss_history": [float(v) for v in self.loss_history],
        }

    @classmethod
    def from_dict(cls, d):
        opt = lambda v: None if v is None else np.array(v, dtype=np.float64)  # noqa: E731
        n, l, m = d["layer_sizes"]
        return cls(
            list(d["feature_names"]),
            np.array(d["w_ih"], dtype=np.float64).reshape(n, l),
            np.array(d["a"], dtype=np.float64),
            np.array(d["w_ho"], dtype=np.float64).reshape(l, m),
            np.array(d["b"], dtype=np.float64),
            eta=d["eta"],
            epochs=d["epochs"],
            seed=d["seed"],
            offset=opt(d["offset"]),
            scale=opt(d["scale"]),
            loss_history=list(d["loss_history"]),
        )


def one_hot(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), 2))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def init_bp(feature_names, hidden: int, seed: int, eta: float = 0.1, outputs: int = 2) -> BpNetwork:
    rng = np.random.default_rng(seed)
    n = len(feature_names)
    return BpNetwork(
        list(feature_names),
        w_ih=rng.uniform(-0.5, 0.5, size=(n, hidden)),
        a=rng.uniform(-0.5, 0.5, size=hidden),
        w_ho=rng.uniform(-0.5, 0.5, size=(hidden, outputs)),
        b=rng.uniform(-0.5, 0.5, size=outputs),
        eta=eta,
        seed=seed,
    )


def train_bp(X: FeatureMatrix, hidden: int = 15, eta: float = 0.1, epochs: int = 200, seed: int = 0,
             standardize: bool = True) -> BpNetwork:
    """Online (per-sample, corpus-order) backpropagation training."""
    if eta <= 0:
        raise ValueError("learning rate must be positive")
    if epochs < 1 or hidden < 1:
        raise ValueError("epochs and hidden must be >= 1")
    if len(X) == 0:
        raise ValueError("no training rows")
    net = init_bp(X.feature_names, hidden, seed, eta)
    x = X.values
    if standardize:
        offset = x.mean(axis=0)
        spread = x.std(axis=0)
        net.offset = offset
        net.scale = np.where(spread > 0, spread, 1.0)
        x = net._standardize(x)
    targets = one_hot(X.labels)
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, epochs + 1):
            for xi, yi in zip(x, targets):
                net.step(xi, yi)
            if not net.parameters_finite():
                raise BpDivergenceError(epoch)
            net.loss_history.append(net.loss(x, targets))
            net.epochs = epoch
    return net


# ---------------------------------------------------------------------------
# Naive Bayes


@dataclass
class NbModel:
    """Two-class Naive Bayes, Gaussian or discretized likelihoods."""

    feature_names: list
    priors: np.ndarray
    kind: str = "gaussian"
    means: np.ndarray | None = None
    variances: np.ndarray | None = None
    epsilon: float = 0.0
    edges: list | None = None
    log_tables: list | None = None

    def log_joint(self, x) -> np.ndarray:
        """log P(C=c) + sum_i log P(A_i | C=c), shape (n, 2)."""
        x = _rows(self.feature_names, x)
        out = np.tile(np.log(self.priors), (len(x), 1))
        if self.kind == "gaussian":
            for c in (0, 1):
                var = self.variances[c]
                ll = -0.5 * np.log(2.0 * np.pi * var) - (x - self.means[c]) ** 2 / (2.0 * var)
                out[:, c] += ll.sum(axis=1)
        else:
            for j, (edges, table) in enumerate(zip(self.edges, self.log_tables)):
                idx = np.searchsorted(np.asarray(edges, dtype=np.float64), x[:, j], side="right")
                out += np.asarray(table)[:, idx].T
        return out

    def log_posterior(self, x) -> np.ndarray:
        lj = self.log_joint(x)
        top = lj.max(axis=1, keepdims=True)
        return lj - (top + np.log(np.exp(lj - top).sum(axis=1, keepdims=True)))

    def scores(self, x) -> np.ndarray:
        lj = self.log_joint(x)
        return lj[:, 1] - lj[:, 0]

    def to_dict(self):
        d = {"feature_names": list(self.feature_names), "kind": self.kind, "priors": _floats(self.priors)}
        if self.kind == "gaussian":
            d.update(means=_floats(self.means), variances=_floats(self.variances), epsilon=self.epsilon)
        else:
            d.update(edges=[list(e) for e in self.edges], log_tables=[_floats(t) for t in self.log_tables])
        return d

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "gaussian":
            return cls(list(d["feature_names"]), np.array(d["priors"]), "gaussian",
                       np.array(d["means"]), np.array(d["variances"]), d["epsilon"])
        return cls(list(d["feature_names"]), np.array(d["priors"]), "discrete",
                   edges=[list(e) for e in d["edges"]], log_tables=[np.array(t) for t in d["log_tables"]])


def train_nb(X: FeatureMatrix, kind: str = "gaussian", bins: int = DEFAULT_BINS) -> NbModel:
    """Empirical priors with per-class, per-feature likelihoods.

    Gaussian variances are floored at 1e-9 times the largest global feature
    variance. The discrete variant bins each feature by training-set
    quantiles and applies Laplace smoothing.
    """
    x0, x1 = _class_split(X)
    n = len(X)
    priors = np.array([len(x0) / n, len(x1) / n])
    if kind == "gaussian":
        global_var = X.values.var(axis=0)
        eps = 1e-9 * float(global_var.max()) if global_var.size and global_var.max() > 0 else 1e-9
        means = np.vstack([x0.mean(axis=0), x1.mean(axis=0)])
        variances = np.maximum(np.vstack([x0.var(axis=0), x1.var(axis=0)]), eps)
        return NbModel(list(X.feature_names), priors, "gaussian", means, variances, eps)
    if kind != "discrete":
        raise ValueError(f"unknown Naive Bayes kind {kind!r}")
    edges, tables = [], []
    for j in range(X.values.shape[1]):
        rule = equal_frequency_rule(X.values[:, j], bins)
        k = rule.n_bins
        table = np.empty((2, k))
        for c, xc in enumerate((x0, x1)):
            counts = np.bincount(rule.bin_of(xc[:, j]), minlength=k)
            table[c] = np.log((counts + 1.0) / (len(xc) + k))
        edges.append(list(rule.edges))
        tables.append(table)
    return NbModel(list(X.feature_names), priors, "discrete", edges=edges, log_tables=tables)


# ---------------------------------------------------------------------------
# Prediction and voting


def scores(model, x) -> np.ndarray:
    return np.asarray(model.scores(x), dtype=np.float64)


def labels_from_scores(s) -> np.ndarray:
    """Label 1 iff score > 0; a zero score goes to normal."""
    return (np.asarray(s) > 0).astype(np.int64)


def predict(model, x) -> tuple[int, float]:
    """Label and score for a single feature vector."""
    s = scores(model, x)
    if s.shape != (1,):
        raise DimensionMismatchError("predict takes a single sample; use scores() for batches")
    return int(s[0] > 0), float(s[0])


def majority(*votes) -> int:
    if len(votes) % 2 == 0:
        raise ValueError("majority vote needs an odd number of voters")
    return int(sum(int(v) for v in votes) * 2 > len(votes))


@dataclass
class TrainedEnsemble:
    feature_names: list
    lda: LdaModel
    bp: BpNetwork
    nb: NbModel
    config: dict = field(default_factory=dict)

    def models(self):
        return {"lda": self.lda, "bp": self.bp, "nb": self.nb}

    def all_scores(self, x) -> dict:
        """Per-model scores plus the vote score (vote count minus 1.5)."""
        out = {name: scores(m, x) for name, m in self.models().items()}
        votes = sum(labels_from_scores(s) for s in out.values())
        out["voting"] = votes - 1.5
        return out

    def to_json(self) -> str:
        doc = {
            "config": self.config,
            "config_fingerprint": fingerprint(self.config),
            "feature_names": list(self.feature_names),
            "voting_rule": "majority-of-3",
            "lda": self.lda.to_dict(),
            "bp": self.bp.to_dict(),
            "nb": self.nb.to_dict(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrainedEnsemble":
        doc = json.loads(text)
        return cls(
            list(doc["feature_names"]),
            LdaModel.from_dict(doc["lda"]),
            BpNetwork.from_dict(doc["bp"]),
            NbModel.from_dict(doc["nb"]),
            doc.get("config", {}),
        )


def fingerprint(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def train_ensemble(X: FeatureMatrix, hidden: int = 15, eta: float = 0.1, epochs: int = 200, seed: int = 0,
                   nb_kind: str = "gaussian", bins: int = DEFAULT_BINS, config: dict | None = None) -> TrainedEnsemble:
    if X.values.shape[1] == 0:
        raise ValueError("no features to train on")
    return TrainedEnsemble(
        list(X.feature_names),
        train_lda(X),
        train_bp(X, hidden=hidden, eta=eta, epochs=epochs, seed=seed),
        train_nb(X, kind=nb_kind, bins=bins),
        dict(config or {}),
    )


def vote(ensemble: TrainedEnsemble, x) -> int:
    """Majority of the LDA, BP and NB labels for one sample."""
    return majority(*(predict(m, x)[0] for m in ensemble.models().values()))
