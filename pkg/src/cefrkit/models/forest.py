"""Random forest with Gini-split decision trees, grown from scratch on numpy.

Each tree fits a bootstrap resample; every node draws ceil(sqrt(D)) candidate
features without replacement and takes the best Gini split among them. Per-tree
RNG streams are spawned from the master seed, so results are identical whether
trees are grown sequentially or on a thread pool.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError
from .softmax import encode_labels


@dataclass
class _Tree:
    """Flat node arrays; children of leaf nodes are -1 and feature holds the label."""

    feature: np.ndarray  # int: split feature, or predicted label index at leaves
    threshold: np.ndarray  # float: x <= threshold goes left
    left: np.ndarray
    right: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.int64)
        self._route(0, np.arange(X.shape[0]), X, out)
        return out

    def _route(self, node: int, rows: np.ndarray, X: np.ndarray, out: np.ndarray) -> None:
        if self.left[node] < 0:
            out[rows] = self.feature[node]
            return
        mask = X[rows, self.feature[node]] <= self.threshold[node]
        if mask.any():
            self._route(self.left[node], rows[mask], X, out)
        if not mask.all():
            self._route(self.right[node], rows[~mask], X, out)


def _n_candidates(rule, dim: int) -> int:
    if rule == "sqrt":
        return min(dim, max(1, math.ceil(math.sqrt(dim))))
    if rule == "log2":
        return min(dim, max(1, math.ceil(math.log2(dim + 1))))
    if rule == "all":
        return dim
    if isinstance(rule, int) and rule >= 1:
        return min(dim, rule)
    raise TrainingError(f"bad max_features rule {rule!r}")


def _best_split(X_node, y_node, feats, n_classes, min_leaf):
    """Vectorized search over candidate features; returns (feat, threshold) or None."""
    n = X_node.shape[0]
    if n < 2:
        return None
    sub = X_node[:, feats]
    order = np.argsort(sub, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(sub, order, axis=0)
    sorted_labels = y_node[order]  # n x c

    onehot = np.zeros((n, len(feats), n_classes))
    np.put_along_axis(onehot, sorted_labels[:, :, None], 1.0, axis=2)
    cumulative = np.cumsum(onehot, axis=0)
    left_counts = cumulative[:-1]  # boundary b: first b+1 rows go left
    right_counts = cumulative[-1][None, :, :] - left_counts

    left_n = np.arange(1, n, dtype=np.float64)[:, None]
    right_n = n - left_n
    gini_left = 1.0 - ((left_counts / left_n[:, :, None]) ** 2).sum(axis=2)
    gini_right = 1.0 - ((right_counts / right_n[:, :, None]) ** 2).sum(axis=2)
    weighted = (left_n * gini_left + right_n * gini_right) / n

    valid = sorted_vals[1:] > sorted_vals[:-1]
    if min_leaf > 1:
        valid &= (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    weighted = np.where(valid, weighted, np.inf)
    flat = int(np.argmin(weighted))  # first minimum: deterministic tie-break
    boundary, feat_pos = divmod(flat, len(feats))
    threshold = 0.5 * (sorted_vals[boundary, feat_pos] + sorted_vals[boundary + 1, feat_pos])
    return int(feats[feat_pos]), float(threshold)


def _grow_tree(X, y_idx, n_classes, rng, max_features, min_leaf) -> _Tree:
    dim = X.shape[1]
    n_cand = _n_candidates(max_features, dim)
    feature, threshold, left, right = [], [], [], []
    # (node_id, row_indices) stack; explicit to avoid recursion limits
    stack = [(0, np.arange(X.shape[0]))]
    feature.append(0)
    threshold.append(0.0)
    left.append(-1)
    right.append(-1)
    while stack:
        node, rows = stack.pop()
        y_node = y_idx[rows]
        counts = np.bincount(y_node, minlength=n_classes)
        majority = int(np.argmax(counts))  # ties toward the lower label index
        if len(rows) <= min_leaf or counts.max() == len(rows):
            feature[node] = majority
            continue
        feats = rng.choice(dim, size=n_cand, replace=False)
        split = _best_split(X[rows], y_node, feats, n_classes, min_leaf)
        if split is None:
            feature[node] = majority
            continue
        feat, thresh = split
        mask = X[rows, feat] <= thresh
        left_id, right_id = len(feature), len(feature) + 1
        for _ in range(2):
            feature.append(0)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
        feature[node] = feat
        threshold[node] = thresh
        left[node] = left_id
        right[node] = right_id
        # push right first so the left child is grown first (stable node order)
        stack.append((right_id, rows[~mask]))
        stack.append((left_id, rows[mask]))
    return _Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
    )


@dataclass
class RandomForestModel:
    trees: list
    label_order: tuple
    n_trees: int
    max_features: object
    min_leaf: int
    seed: int
    bootstrap: bool
    n_features: int | None = None

    def _votes(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        counts = np.zeros((X.shape[0], len(self.label_order)))
        for tree in self.trees:
            pred = tree.apply(X)
            counts[np.arange(X.shape[0]), pred] += 1.0
        return counts

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self._votes(X) / len(self.trees)

    def predict(self, X: np.ndarray) -> list:
        idx = np.argmax(self._votes(X), axis=1)  # first max: lower label wins ties
        return [self.label_order[i] for i in idx]


def train_random_forest(
    X,
    y,
    label_order=None,
    n_trees: int = 100,
    max_features="sqrt",
    min_leaf: int = 1,
    seed: int = 0,
    bootstrap: bool = True,
    threads: int = 1,
) -> RandomForestModel:
    """Grow a seeded forest. bootstrap=False (fit every tree on the full data)
    exists for tests; threads only changes wall-clock, never the model."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise TrainingError(f"X must be 2-D, got shape {X.shape}")
    y_idx, label_order = encode_labels(y, label_order)
    if len(y_idx) != X.shape[0]:
        raise TrainingError(f"{X.shape[0]} rows but {len(y_idx)} labels")
    if len(set(y_idx.tolist())) < 2:
        raise TrainingError("training requires at least 2 classes present")
    if n_trees < 1:
        raise TrainingError("n_trees must be >= 1")

    n_classes = len(label_order)
    n_rows = X.shape[0]
    seeds = np.random.SeedSequence(seed).spawn(n_trees)

    def grow(tree_seed) -> _Tree:
        rng = np.random.Generator(np.random.PCG64(tree_seed))
        rows = rng.integers(0, n_rows, size=n_rows) if bootstrap else np.arange(n_rows)
        return _grow_tree(X[rows], y_idx[rows], n_classes, rng, max_features, min_leaf)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, seeds))
    else:
        trees = [grow(s) for s in seeds]
    return RandomForestModel(
        trees, label_order, n_trees, max_features, min_leaf, seed, bootstrap, n_features=X.shape[1]
    )
