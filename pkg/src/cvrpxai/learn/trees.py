"""Binary decision trees and the growers used by the classifiers.

All growers maximise the same split score, S_L^2/n_L + S_R^2/n_R, where S
is the sum of the node target.  For regression targets this is the
variance reduction; for 0/1 labels it equals half the decrease of the
weighted Gini impurity, so the classification tree is a Gini tree.
Rows with ``x[feature] <= threshold`` go left.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

_MIN_GAIN = 1e-12


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                depth[self.left[k]] = depth[self.right[k]] = depth[k] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.arange(len(X))
        while active.size:
            f = self.feature[node[active]]
            inner = f >= 0
            active, f = active[inner], f[inner]
            if not active.size:
                break
            cur = node[active]
            go_left = X[active, f] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=float))]

    def scaled(self, factor: float) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right, self.value * factor, self.n_samples)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "n_samples")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=float),
            np.array(d["n_samples"], dtype=np.int64),
        )

    @classmethod
    def stump(cls, value: float) -> "Tree":
        return cls(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                   np.array([float(value)]), np.array([0]))


class _Builder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.n_samples = [], []

    def add(self, value: float, n: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.n_samples.append(int(n))
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, lval, ln, rval, rn) -> tuple[int, int]:
        left = self.add(lval, ln)
        right = self.add(rval, rn)
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node] = left
        self.right[node] = right
        return left, right

    def build(self) -> Tree:
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=float),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=float),
            np.array(self.n_samples, dtype=np.int64),
        )


def best_exact_split(X: np.ndarray, target: np.ndarray, features: np.ndarray, min_leaf: int):
    """Best (feature, threshold, gain) over midpoints of sorted values, or None."""
    m = len(target)
    if m < 2 * min_leaf or features.size == 0:
        return None
    Xf = X[:, features]
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    ts = target[order]
    sl = np.cumsum(ts, axis=0)[:-1]
    total = ts.sum(axis=0)[0] if ts.ndim > 1 else ts.sum()
    nl = np.arange(1, m, dtype=float)[:, None]
    nr = m - nl
    score = sl ** 2 / nl + (total - sl) ** 2 / nr - total ** 2 / m
    valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    score = np.where(valid, score, -np.inf)
    # first maximum in feature-major order keeps ties deterministic
    flat = int(np.argmax(score.T))
    j, k = divmod(flat, m - 1)
    gain = score[k, j]
    if not np.isfinite(gain) or gain <= _MIN_GAIN:
        return None
    lo, hi = xs[k, j], xs[k + 1, j]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(features[j]), float(thr), float(gain)


def grow_tree(X, target, *, max_depth, min_leaf, leaf_value, max_features=None, rng=None) -> Tree:
    """Depth-first exact tree.

    ``leaf_value(rows)`` gives the value stored at every node;
    ``max_features`` draws that many candidate features per split.
    """
    n, d = X.shape
    builder = _Builder()
    root = builder.add(leaf_value(np.arange(n)), n)
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth:
            continue
        if max_features is None or max_features >= d:
            features = np.arange(d)
        else:
            features = np.sort(rng.choice(d, size=max_features, replace=False))
        found = best_exact_split(X[rows], target[rows], features, min_leaf)
        if found is None:
            continue
        f, thr, _ = found
        mask = X[rows, f] <= thr
        lrows, rrows = rows[mask], rows[~mask]
        left, right = builder.split(node, f, thr, leaf_value(lrows), len(lrows), leaf_value(rrows), len(rrows))
        stack.append((right, rrows, depth + 1))
        stack.append((left, lrows, depth + 1))
    return builder.build()


def grow_tree_levelwise(X, target, *, max_depth, min_leaf, leaf_value) -> Tree:
    """Breadth-first exact tree: every node of a level is split before the next level."""
    n = len(target)
    builder = _Builder()
    level = [(builder.add(leaf_value(np.arange(n)), n), np.arange(n))]
    features = np.arange(X.shape[1])
    for _ in range(max_depth):
        nxt = []
        for node, rows in level:
            found = best_exact_split(X[rows], target[rows], features, min_leaf)
            if found is None:
                continue
            f, thr, _ = found
            mask = X[rows, f] <= thr
            lrows, rrows = rows[mask], rows[~mask]
            left, right = builder.split(node, f, thr, leaf_value(lrows), len(lrows),
                                        leaf_value(rrows), len(rrows))
            nxt += [(left, lrows), (right, rrows)]
        if not nxt:
            break
        level = nxt
    return builder.build()


# --- histogram, leaf-wise growth -------------------------------------------

def quantile_bin_edges(X: np.ndarray, n_bins: int) -> list[np.ndarray]:
    """Per-feature upper bin edges at equal-frequency quantiles."""
    qs = np.arange(1, n_bins) / n_bins
    return [np.unique(np.quantile(X[:, j], qs)) for j in range(X.shape[1])]


def bin_features(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    """Bin code k means edges[k-1] < x <= edges[k]."""
    return np.column_stack([np.searchsorted(e, X[:, j], side="left") for j, e in enumerate(edges)])


def _best_hist_split(codes, target, rows, n_bins, min_leaf):
    m = len(rows)
    if m < 2 * min_leaf:
        return None
    d = codes.shape[1]
    flat = (codes[rows] + np.arange(d) * n_bins).ravel()
    sums = np.bincount(flat, weights=np.repeat(target[rows], d), minlength=d * n_bins).reshape(d, n_bins)
    counts = np.bincount(flat, minlength=d * n_bins).reshape(d, n_bins)
    sl = np.cumsum(sums, axis=1)[:, :-1]
    nl = np.cumsum(counts, axis=1)[:, :-1].astype(float)
    total = target[rows].sum()
    nr = m - nl
    with np.errstate(divide="ignore", invalid="ignore"):
        score = sl ** 2 / nl + (total - sl) ** 2 / nr - total ** 2 / m
    valid = (nl >= min_leaf) & (nr >= min_leaf) & (counts[:, :-1] > 0)
    score = np.where(valid, score, -np.inf)
    j, b = np.unravel_index(int(np.argmax(score)), score.shape)
    gain = score[j, b]
    if not np.isfinite(gain) or gain <= _MIN_GAIN:
        return None
    return int(j), int(b), float(gain)


def grow_tree_leafwise(codes, edges, target, *, max_leaves, min_leaf, leaf_value, n_bins) -> Tree:
    """Histogram tree grown by always splitting the leaf with the largest gain."""
    n = len(target)
    builder = _Builder()
    root = builder.add(leaf_value(np.arange(n)), n)
    heap = []

    def push(node, rows):
        found = _best_hist_split(codes, target, rows, n_bins, min_leaf)
        if found is not None:
            j, b, gain = found
            heapq.heappush(heap, (-gain, node, j, b, rows))

    push(root, np.arange(n))
    leaves = 1
    while heap and leaves < max_leaves:
        _, node, j, b, rows = heapq.heappop(heap)
        mask = codes[rows, j] <= b
        lrows, rrows = rows[mask], rows[~mask]
        thr = float(edges[j][b]) if b < len(edges[j]) else float("inf")
        left, right = builder.split(node, j, thr, leaf_value(lrows), len(lrows), leaf_value(rrows), len(rrows))
        leaves += 1
        push(left, lrows)
        push(right, rrows)
    return builder.build()
