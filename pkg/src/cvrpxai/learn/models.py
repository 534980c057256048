"""Classifiers returning a score in [0, 1]; class 1 iff score >= 0.5.

Every tree kind is stored the same way: a list of trees, a per-tree
weight, a base margin and a link, so that

    score(x) = link(base + weight * sum_t tree_t(x))

with link the identity (single tree, forest) or the logistic sigmoid
(both boosting variants).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .metrics import Evaluation, evaluate_predictions
from .trees import Tree, bin_features, grow_tree, grow_tree_leafwise, grow_tree_levelwise, quantile_bin_edges

KINDS = ("knn", "decision_tree", "random_forest", "gradient_boosting_levelwise",
         "gradient_boosting_leafwise_hist")
TREE_KINDS = KINDS[1:]
MODEL_FORMAT = "cvrpxai-model"
MODEL_VERSION = 1

DEFAULT_PARAMS = {
    "knn": {"k": 5},
    "decision_tree": {"max_depth": 8, "min_leaf": 5},
    "random_forest": {"n_trees": 100, "max_depth": 8, "min_leaf": 5, "bootstrap": True,
                      "max_features": None, "seed": 0},
    "gradient_boosting_levelwise": {"n_rounds": 200, "learning_rate": 0.1, "max_depth": 3, "min_leaf": 5},
    "gradient_boosting_leafwise_hist": {"n_rounds": 200, "learning_rate": 0.1, "max_leaves": 31,
                                        "min_leaf": 5, "n_bins": 64},
}

# display names in the layout of the per-scenario classifier tables
DISPLAY_NAMES = {
    "knn": "K-Nearest Neighbors",
    "decision_tree": "Decision Tree",
    "random_forest": "Random Forest",
    "gradient_boosting_levelwise": "Gradient Boosting",
    "gradient_boosting_leafwise_hist": "Histogram Gradient Boosting",
}


@dataclass(frozen=True, eq=False)
class TrainedModel:
    kind: str
    params: dict
    n_features: int
    trees: tuple[Tree, ...] = ()
    tree_weight: float = 1.0
    base: float = 0.0
    link: str = "identity"
    knn_state: dict = field(default_factory=dict)

    @property
    def is_tree_model(self) -> bool:
        return self.kind in TREE_KINDS

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected rows with {self.n_features} features")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature value")
        return X

    def margin(self, X) -> np.ndarray:
        """base + weight * summed tree outputs (tree kinds only)."""
        X = self._check(X)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return self.base + self.tree_weight * total

    def predict_score(self, X) -> np.ndarray:
        X = self._check(X)
        if self.kind == "knn":
            return _knn_score(self.knn_state, self.params["k"], X)
        m = self.margin(X)
        if self.link == "logistic":
            return expit(m)
        return np.clip(m, 0.0, 1.0)

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) >= 0.5).astype(np.int64)

    # --- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "params": self.params,
            "n_features": self.n_features,
            "tree_weight": self.tree_weight,
            "base": self.base,
            "link": self.link,
            "trees": [t.to_dict() for t in self.trees],
        }
        if self.knn_state:
            d["knn"] = {k: v.tolist() for k, v in self.knn_state.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a model file")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        knn = {k: np.array(v, dtype=float) for k, v in d.get("knn", {}).items()}
        return cls(d["kind"], d["params"], int(d["n_features"]),
                   tuple(Tree.from_dict(t) for t in d["trees"]),
                   float(d["tree_weight"]), float(d["base"]), d["link"], knn)


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        return TrainedModel.from_dict(json.load(fh))


# --- fitting ---------------------------------------------------------------

def _knn_score(state: dict, k: int, X: np.ndarray) -> np.ndarray:
    Z = (X - state["mean"]) / state["scale"]
    diff = Z[:, None, :] - state["X"][None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    # stable sort: equal distances resolve to the earlier training row
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return state["y"][nearest].mean(axis=1)


def _fit_knn(params, X, y) -> TrainedModel:
    k = int(params["k"])
    if not 1 <= k <= len(X):
        raise ValueError(f"k={k} must be between 1 and the training size {len(X)}")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    state = {"mean": mean, "scale": scale, "X": (X - mean) / scale, "y": y.astype(float)}
    return TrainedModel("knn", params, X.shape[1], knn_state=state)


def _mean_value(y):
    return lambda rows: float(y[rows].mean())


def _fit_decision_tree(params, X, y) -> TrainedModel:
    yf = y.astype(float)
    tree = grow_tree(X, yf, max_depth=params["max_depth"], min_leaf=params["min_leaf"],
                     leaf_value=_mean_value(yf))
    return TrainedModel("decision_tree", params, X.shape[1], (tree,))


def _fit_random_forest(params, X, y) -> TrainedModel:
    n, d = X.shape
    yf = y.astype(float)
    mf = params.get("max_features")
    mf = max(1, int(math.sqrt(d))) if mf is None else int(mf)
    rng = np.random.default_rng(params.get("seed", 0))
    trees = []
    for _ in range(int(params["n_trees"])):
        rows = rng.integers(0, n, size=n) if params.get("bootstrap", True) else np.arange(n)
        Xb, yb = X[rows], yf[rows]
        trees.append(grow_tree(Xb, yb, max_depth=params["max_depth"], min_leaf=params["min_leaf"],
                               leaf_value=_mean_value(yb), max_features=mf, rng=rng))
    return TrainedModel("random_forest", params, d, tuple(trees), tree_weight=1.0 / len(trees))


def _newton_leaf(residual, hess, lr):
    def value(rows):
        h = hess[rows].sum()
        return lr * residual[rows].sum() / max(h, 1e-12)
    return value


def _fit_boosting(kind, params, X, y) -> TrainedModel:
    yf = y.astype(float)
    p0 = yf.mean()
    base = math.log(p0 / (1 - p0))
    lr = float(params["learning_rate"])
    margin = np.full(len(y), base)
    if kind == "gradient_boosting_leafwise_hist":
        edges = quantile_bin_edges(X, int(params["n_bins"]))
        codes = bin_features(X, edges)
    trees = []
    for _ in range(int(params["n_rounds"])):
        p = expit(margin)
        residual = yf - p
        leaf = _newton_leaf(residual, p * (1 - p), lr)
        if kind == "gradient_boosting_levelwise":
            tree = grow_tree_levelwise(X, residual, max_depth=params["max_depth"],
                                       min_leaf=params["min_leaf"], leaf_value=leaf)
        else:
            tree = grow_tree_leafwise(codes, edges, residual, max_leaves=params["max_leaves"],
                                      min_leaf=params["min_leaf"], leaf_value=leaf,
                                      n_bins=int(params["n_bins"]))
        trees.append(tree)
        margin = margin + tree.predict(X)
    return TrainedModel(kind, params, X.shape[1], tuple(trees), base=base, link="logistic")


def fit(kind: str, params: dict | None, X, y) -> TrainedModel:
    """Fit a classifier of the given kind; missing params take the defaults."""
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}")
    full = dict(DEFAULT_PARAMS[kind])
    full.update(params or {})
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int64)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("X must be a non-empty (rows, features) matrix matching y")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature value")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    if kind == "knn":
        return _fit_knn(full, X, y)
    if y.min() == y.max():
        raise ValueError(f"{kind} needs both classes in the training set")
    if kind == "decision_tree":
        return _fit_decision_tree(full, X, y)
    if kind == "random_forest":
        return _fit_random_forest(full, X, y)
    return _fit_boosting(kind, full, X, y)


def log_loss(model: TrainedModel, X, y) -> float:
    p = np.clip(model.predict_score(X), 1e-15, 1 - 1e-15)
    y = np.asarray(y, dtype=float)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def evaluate(model: TrainedModel, X, y, beta: float = 1.0) -> Evaluation:
    if len(y) == 0:
        raise ValueError("empty evaluation set")
    return evaluate_predictions(np.asarray(y), model.predict(X), beta)


EVALUATION_HEADER = ("scenario", "classifier", "precision", "recall", "f1")


def write_evaluation_csv(rows) -> str:
    """rows: (scenario id, classifier kind, Evaluation) triples."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EVALUATION_HEADER)
    for sid, kind, ev in rows:
        writer.writerow([sid, kind, repr(ev.precision), repr(ev.recall), repr(ev.f_beta)])
    return buf.getvalue()


def read_evaluation_csv(text: str) -> list[tuple[str, str, float, float, float]]:
    reader = csv.reader(io.StringIO(text))
    if tuple(next(reader)) != EVALUATION_HEADER:
        raise ValueError("unexpected evaluation CSV header")
    return [(r[0], r[1], float(r[2]), float(r[3]), float(r[4])) for r in reader]
