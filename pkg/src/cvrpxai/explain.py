"""Shapley attributions of classifier scores and their aggregation.

The value of a feature subset U for a row x is interventional: features in
U keep x's values, the rest are taken from each background row in turn,
and the model scores are averaged.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .features import FEATURE_KEYS
from .learn.models import TrainedModel
from .learn.trees import Tree

EXACT_LIMIT = 20
ESTIMATORS = ("exact", "permutation_sampling", "tree_path")
# subset budget for the exact per-background game of logistic ensembles
PAIR_ENUM_LIMIT = 8
_MAX_BATCH_ROWS = 1 << 18


@dataclass(frozen=True, eq=False)
class Explanation:
    phis: np.ndarray
    base_value: float
    prediction: float
    estimator: str
    n_evaluations: int = 0  # subsets or permutations
    seed: int | None = None
    row_id: int | None = None

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")

    @property
    def efficiency_error(self) -> float:
        return float(abs(self.phis.sum() - (self.prediction - self.base_value)))


def _as_background(background) -> np.ndarray:
    bg = np.asarray(background, dtype=float)
    if bg.ndim == 1:
        bg = bg[None, :]
    if bg.size == 0 or len(bg) == 0:
        raise ValueError("empty background")
    return bg


def _subset_mask(subset, d: int) -> np.ndarray:
    subset = np.asarray(subset)
    if subset.dtype == bool:
        if subset.shape != (d,):
            raise ValueError("boolean subset must have one entry per feature")
        return subset
    mask = np.zeros(d, dtype=bool)
    mask[subset.astype(np.int64)] = True
    return mask


def value_function(model: TrainedModel, x, subset, background) -> float:
    """Mean score over background rows with x's values on ``subset``."""
    x = np.asarray(x, dtype=float)
    bg = _as_background(background)
    mask = _subset_mask(subset, len(x))
    z = np.where(mask, x, bg)
    return float(model.predict_score(z).mean())


def _values_for_masks(model, x, bg, active, masks) -> np.ndarray:
    """v(U) for every bitmask over the ``active`` feature positions."""
    nb = len(bg)
    bits = ((masks[:, None] >> np.arange(len(active))) & 1).astype(bool)
    out = np.empty(len(masks))
    step = max(1, _MAX_BATCH_ROWS // nb)
    for lo in range(0, len(masks), step):
        chunk = bits[lo:lo + step]
        z = np.repeat(bg[None, :, :], len(chunk), axis=0)
        # inactive features stay at x
        z[:, :, :] = np.where(np.isin(np.arange(len(x)), active), z, x)
        for k, j in enumerate(active):
            z[:, :, j] = np.where(chunk[:, k:k + 1], x[j], z[:, :, j])
        out[lo:lo + step] = model.predict_score(z.reshape(-1, len(x))).reshape(len(chunk), nb).mean(axis=1)
    return out


def _fact_table(n: int) -> np.ndarray:
    return np.array([math.factorial(k) for k in range(n + 1)], dtype=float)


def shapley_from_values(values: np.ndarray, a: int) -> np.ndarray:
    """Shapley values of an a-player game given v at every bitmask 0..2^a-1."""
    masks = np.arange(1 << a)
    sizes = np.array([bin(m).count("1") for m in masks])
    fact = _fact_table(a)
    phis = np.empty(a)
    for j in range(a):
        without = masks[(masks >> j) & 1 == 0]
        s = sizes[without]
        w = fact[s] * fact[a - s - 1] / fact[a]
        phis[j] = np.sum(w * (values[without | (1 << j)] - values[without]))
    return phis


def shapley_exact(model: TrainedModel, x, background, active=None) -> Explanation:
    """Full subset enumeration over the active features (all by default).

    Features outside ``active`` are held at x and get zero attribution.
    """
    x = np.asarray(x, dtype=float)
    bg = _as_background(background)
    d = len(x)
    active = np.arange(d) if active is None else np.flatnonzero(_subset_mask(active, d))
    a = len(active)
    if a > EXACT_LIMIT:
        raise ValueError(f"{a} active features exceed the exact limit of {EXACT_LIMIT}; "
                         "use shapley_sample or pass an active feature mask")
    values = _values_for_masks(model, x, bg, active, np.arange(1 << a))
    phis = np.zeros(d)
    phis[active] = shapley_from_values(values, a)
    return Explanation(phis, float(values[0]), float(values[-1]), "exact", 1 << a)


def shapley_sample(model: TrainedModel, x, background, n_permutations: int, seed: int = 0) -> Explanation:
    """Mean marginal contribution over uniformly random feature orders."""
    if n_permutations < 1:
        raise ValueError("n_permutations must be at least 1")
    x = np.asarray(x, dtype=float)
    bg = _as_background(background)
    d = len(x)
    if d > 62:
        raise ValueError("too many features for bitmask memoisation")
    rng = np.random.default_rng(seed)
    perms = np.array([rng.permutation(d) for _ in range(n_permutations)])
    prefix = np.zeros((n_permutations, d + 1), dtype=np.int64)
    for k in range(d):
        prefix[:, k + 1] = prefix[:, k] | (np.int64(1) << perms[:, k])
    uniq, inverse = np.unique(prefix, return_inverse=True)
    values = _values_for_masks(model, x, bg, np.arange(d), uniq)[inverse.reshape(prefix.shape)]
    phis = np.zeros(d)
    np.add.at(phis, perms.ravel(), np.diff(values, axis=1).ravel())
    phis /= n_permutations
    return Explanation(phis, float(values[0, 0]), float(values[0, -1]), "permutation_sampling",
                       n_permutations, seed)


# --- tree estimator ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _LeafBoxes:
    value: np.ndarray  # (L,)
    lo: np.ndarray  # (L, d), the leaf needs lo < x <= hi
    hi: np.ndarray
    feature: np.ndarray  # split features and thresholds of internal nodes
    threshold: np.ndarray


def _leaf_boxes(tree: Tree, d: int) -> _LeafBoxes:
    n = tree.n_nodes
    lo = np.full((n, d), -np.inf)
    hi = np.full((n, d), np.inf)
    for k in range(n):
        f = tree.feature[k]
        if f < 0:
            continue
        l, r, t = tree.left[k], tree.right[k], tree.threshold[k]
        lo[l], hi[l] = lo[k], hi[k]
        lo[r], hi[r] = lo[k], hi[k]
        hi[l, f] = min(hi[k, f], t)
        lo[r, f] = max(lo[k, f], t)
    leaves = tree.feature < 0
    inner = ~leaves
    return _LeafBoxes(tree.value[leaves], lo[leaves], hi[leaves], tree.feature[inner], tree.threshold[inner])


def _pair_phis(box: _LeafBoxes, X, bg, fact) -> np.ndarray:
    """Per (row, background) Shapley values of one tree's output: (R, B, d).

    For a pair (x, b) the tree's game is v(S) = value of the leaf reached by
    the hybrid row.  A leaf is reached iff S contains every feature A where
    only x satisfies the leaf box and none of the features B where only b
    does, so it contributes (a-1)! b!/(a+b)! to A and -a!(b-1)!/(a+b)! to B.
    """
    xok = (X[:, None, :] > box.lo) & (X[:, None, :] <= box.hi)  # (R, L, d)
    bok = (bg[:, None, :] > box.lo) & (bg[:, None, :] <= box.hi)  # (B, L, d)
    xo = xok[:, None]
    bo = bok[None]
    reach = np.all(xo | bo, axis=-1)  # (R, B, L)
    A = xo & ~bo
    Bm = ~xo & bo
    a = A.sum(-1)
    b = Bm.sum(-1)
    wa = np.where(a > 0, fact[np.maximum(a - 1, 0)] * fact[b] / fact[a + b], 0.0)
    wb = np.where(b > 0, fact[a] * fact[np.maximum(b - 1, 0)] / fact[a + b], 0.0)
    scale = reach * box.value
    return (np.einsum("rbl,rbld->rbd", scale * wa, A.astype(float))
            - np.einsum("rbl,rbld->rbd", scale * wb, Bm.astype(float)))


def _differing_features(box: _LeafBoxes, X, bg, d) -> np.ndarray:
    """(R, B, d) mask of features on which x and b take different split branches."""
    if box.feature.size == 0:
        return np.zeros((len(X), len(bg), d), dtype=bool)
    xs = X[:, box.feature] <= box.threshold
    bs = bg[:, box.feature] <= box.threshold
    diff = xs[:, None, :] ^ bs[None, :, :]
    onehot = np.zeros((box.feature.size, d))
    onehot[np.arange(box.feature.size), box.feature] = 1.0
    return (diff.astype(float) @ onehot) > 0


def _pair_enumeration(model, x, b, feats) -> np.ndarray:
    a = len(feats)
    masks = np.arange(1 << a)
    z = np.repeat(b[None, :], len(masks), axis=0)
    for k, j in enumerate(feats):
        on = (masks >> k) & 1 == 1
        z[on, j] = x[j]
    values = model.predict_score(z)
    phis = np.zeros(len(x))
    phis[feats] = shapley_from_values(values, a)
    return phis


def shapley_tree_batch(model: TrainedModel, X, background, pair_enum_limit: int = PAIR_ENUM_LIMIT):
    """Interventional tree Shapley values for every row of X.

    Returns (phis (R, d), base value, predictions).  For identity-link
    models (tree, forest) the result is exact.  For the logistic link of
    the boosting models the per-background game is enumerated exactly when
    x and b differ on at most ``pair_enum_limit`` split features; otherwise
    the exact margin attribution is rescaled by
    (sigmoid(m(x)) - sigmoid(m(b))) / (m(x) - m(b)), which keeps efficiency.
    """
    if not model.is_tree_model:
        raise ValueError(f"tree estimator needs a tree model, got {model.kind}")
    X = model._check(X)
    bg = model._check(_as_background(background))
    R, d = X.shape
    nb = len(bg)
    fact = _fact_table(d)
    boxes = [_leaf_boxes(t, d) for t in model.trees]
    step = max(1, 4_000_000 // max(1, nb * d * max(len(b.value) for b in boxes)))
    phis = np.zeros((R, d))
    for lo in range(0, R, step):
        Xc = X[lo:lo + step]
        pair = np.zeros((len(Xc), nb, d))
        for box in boxes:
            pair += _pair_phis(box, Xc, bg, fact)
        pair *= model.tree_weight
        if model.link == "logistic":
            pair = _logistic_pairs(model, boxes, Xc, bg, pair, pair_enum_limit)
        phis[lo:lo + step] = pair.mean(axis=1)
    base = float(model.predict_score(bg).mean())
    return phis, base, model.predict_score(X)


def _logistic_pairs(model, boxes, Xc, bg, pair, limit):
    d = Xc.shape[1]
    mx = model.margin(Xc)
    mb = model.margin(bg)
    diff = np.zeros((len(Xc), len(bg), d), dtype=bool)
    for box in boxes:
        diff |= _differing_features(box, Xc, bg, d)
    dm = mx[:, None] - mb[None, :]
    ds = expit(mx)[:, None] - expit(mb)[None, :]
    px = expit(mx)[:, None]
    ratio = np.where(np.abs(dm) > 1e-12, ds / np.where(dm == 0, 1.0, dm), px * (1 - px))
    out = pair * ratio[:, :, None]
    counts = diff.sum(-1)
    for r, b in zip(*np.nonzero(counts <= limit)):
        out[r, b] = _pair_enumeration(model, Xc[r], bg[b], np.flatnonzero(diff[r, b]))
    return out


def shapley_tree(model: TrainedModel, x, background, pair_enum_limit: int = PAIR_ENUM_LIMIT) -> Explanation:
    phis, base, pred = shapley_tree_batch(model, np.asarray(x, dtype=float)[None, :], background, pair_enum_limit)
    return Explanation(phis[0], base, float(pred[0]), "tree_path", len(model.trees))


def explain_rows(model: TrainedModel, X, background, estimator: str, n_permutations: int = 100,
                 seed: int = 0, row_ids=None) -> list[Explanation]:
    """Explanations for every row of X with the named estimator."""
    X = np.asarray(X, dtype=float)
    row_ids = list(range(len(X))) if row_ids is None else [int(r) for r in row_ids]
    if estimator in ("tree", "tree_path"):
        phis, base, pred = shapley_tree_batch(model, X, background)
        return [Explanation(phis[k], base, float(pred[k]), "tree_path", len(model.trees), None, row_ids[k])
                for k in range(len(X))]
    out = []
    for k, x in enumerate(X):
        if estimator == "exact":
            e = shapley_exact(model, x, background)
        elif estimator in ("sample", "permutation_sampling"):
            e = shapley_sample(model, x, background, n_permutations, seed + k)
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        out.append(Explanation(e.phis, e.base_value, e.prediction, e.estimator, e.n_evaluations,
                               e.seed, row_ids[k]))
    return out


# --- aggregation ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ScenarioImportance:
    scenario: str
    s: np.ndarray
    f1: float
    explanations: tuple[Explanation, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if np.any(np.asarray(self.s) < 0):
            raise ValueError("mean absolute attributions are non-negative")

    def top(self, k: int = 10) -> list[str]:
        order = np.lexsort((np.arange(len(self.s)), -self.s))
        return [FEATURE_KEYS[j] for j in order[:k]]


def importance_from_explanations(scenario: str, explanations, f1: float) -> ScenarioImportance:
    if not explanations:
        raise ValueError("empty explain set")
    phis = np.vstack([e.phis for e in explanations])
    return ScenarioImportance(scenario, np.abs(phis).mean(axis=0), float(f1), tuple(explanations))


def background_rows(ds, size: int = 64, seed: int = 0) -> np.ndarray:
    """Up to ``size`` training rows drawn without replacement."""
    rng = np.random.default_rng(seed)
    train = np.asarray(ds.train)
    take = rng.choice(train, size=min(size, train.size), replace=False)
    return ds.X[np.sort(take)]


def scenario_importance(model: TrainedModel, ds, explain_rows_idx, estimator: str, f1: float,
                        background=None, n_permutations: int = 100, seed: int = 0) -> ScenarioImportance:
    """s_m[j] = mean over the explained rows of |phi_j|."""
    idx = np.asarray(explain_rows_idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty explain set")
    if not np.all(np.isin(idx, ds.test)):
        raise ValueError("explained rows must be test rows")
    bg = background_rows(ds, seed=seed) if background is None else background
    exps = explain_rows(model, ds.X[idx], bg, estimator, n_permutations, seed, row_ids=idx)
    return importance_from_explanations(ds.scenario.id, exps, f1)


@dataclass(frozen=True, eq=False)
class UnifiedImportance:
    y: np.ndarray
    ranking: tuple[str, ...]
    scenarios: tuple[str, ...]


def unified_ranking(imps, expected=None) -> UnifiedImportance:
    """y[j] = sum over scenarios of s_m[j] * f1_m, ranked by descending y."""
    from .scenarios import SCENARIO_IDS

    ids = [imp.scenario for imp in imps]
    if not ids:
        raise ValueError("no scenario importances")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate scenario ids")
    expected = SCENARIO_IDS if expected is None else tuple(expected)
    if set(ids) != set(expected):
        warnings.warn("unified ranking over subset of M", stacklevel=2)
    y = np.zeros(len(imps[0].s))
    for imp in imps:
        y += np.asarray(imp.s) * imp.f1
    order = np.lexsort((np.arange(len(y)), -y))
    keys = FEATURE_KEYS if len(y) == len(FEATURE_KEYS) else tuple(f"f{j}" for j in range(len(y)))
    return UnifiedImportance(y, tuple(keys[j] for j in order), tuple(ids))


# --- CSV ---------------------------------------------------------------

def write_explanations_csv(explanations) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("row_id",) + FEATURE_KEYS + ("base_value", "prediction", "estimator", "seed"))
    for e in explanations:
        w.writerow([e.row_id] + [repr(float(v)) for v in e.phis]
                   + [repr(e.base_value), repr(e.prediction), e.estimator, "" if e.seed is None else e.seed])
    return buf.getvalue()


def read_explanations_csv(text: str) -> list[Explanation]:
    reader = csv.reader(io.StringIO(text))
    next(reader)
    d = len(FEATURE_KEYS)
    out = []
    for r in reader:
        out.append(Explanation(np.array([float(v) for v in r[1:d + 1]]), float(r[d + 1]), float(r[d + 2]),
                               r[d + 3], 0, int(r[d + 4]) if r[d + 4] else None, int(r[0])))
    return out


def write_importance_csv(imps) -> str:
    """Long format: scenario, feature, mean_abs_shap, f1."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scenario", "feature", "mean_abs_shap", "f1"))
    for imp in imps:
        for key, v in zip(FEATURE_KEYS, imp.s):
            w.writerow([imp.scenario, key, repr(float(v)), repr(float(imp.f1))])
    return buf.getvalue()


def read_importance_csv(text: str) -> list[ScenarioImportance]:
    reader = csv.reader(io.StringIO(text))
    next(reader)
    by = {}
    for sid, key, v, f1 in reader:
        s, _ = by.setdefault(sid, (np.zeros(len(FEATURE_KEYS)), float(f1)))
        s[FEATURE_KEYS.index(key)] = float(v)
    return [ScenarioImportance(sid, s, f1) for sid, (s, f1) in by.items()]


def write_unified_csv(unified: UnifiedImportance) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("feature", "y", "rank"))
    pos = {k: i for i, k in enumerate(FEATURE_KEYS)}
    for rank, key in enumerate(unified.ranking, start=1):
        w.writerow([key, repr(float(unified.y[pos[key]])), rank])
    return buf.getvalue()
