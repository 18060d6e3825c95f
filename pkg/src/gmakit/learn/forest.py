"""Random forest classifier, written from scratch on numpy.

Each tree trains on a bootstrap sample (with replacement, same size as the
input), considers sqrt(d) randomly chosen features per split, splits by
Gini impurity at midpoints between consecutive distinct values, and grows
until nodes are pure or unsplittable. Leaves store class-1 frequencies;
the forest predicts their mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..records import ValidationError


@dataclass
class _Node:
    # leaf when feature is None
    feature: int | None = None
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    prob: float = 0.0  # class-1 frequency of training samples in the leaf

    def to_dict(self) -> dict:
        if self.feature is None:
            return {"prob": self.prob}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "_Node":
        if "feature" not in d:
            return _Node(prob=d["prob"])
        return _Node(
            feature=d["feature"],
            threshold=d["threshold"],
            left=_Node.from_dict(d["left"]),
            right=_Node.from_dict(d["right"]),
        )


def _gini(counts1: np.ndarray, totals: np.ndarray) -> np.ndarray:
    p1 = counts1 / totals
    return 1.0 - p1**2 - (1.0 - p1) ** 2


def _best_split(x: np.ndarray, y: np.ndarray):
    """Best (threshold, weighted_gini) for one feature column, or None."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = xs.shape[0]
    distinct = xs[1:] != xs[:-1]
    if not np.any(distinct):
        return None
    n_left = np.arange(1, n)
    n_right = n - n_left
    pos_left = np.cumsum(ys)[:-1]
    pos_right = ys.sum() - pos_left
    weighted = (n_left * _gini(pos_left, n_left) + n_right * _gini(pos_right, n_right)) / n
    weighted = np.where(distinct, weighted, np.inf)
    best = int(np.argmin(weighted))
    return 0.5 * (xs[best] + xs[best + 1]), float(weighted[best])


def _grow(X: np.ndarray, y: np.ndarray, idx: np.ndarray, max_features: int, rng: np.random.Generator) -> _Node:
    ysub = y[idx]
    pos = int(ysub.sum())
    node = _Node(prob=pos / len(idx))
    if pos == 0 or pos == len(idx):
        return node

    features = rng.permutation(X.shape[1])[:max_features]
    best_feature = None
    best_threshold = 0.0
    best_score = np.inf
    for f in features:
        found = _best_split(X[idx, f], ysub)
        if found is None:
            continue
        threshold, score = found
        if score < best_score:
            best_feature, best_threshold, best_score = int(f), float(threshold), score
    if best_feature is None:
        # impure but unsplittable on the drawn features
        return node

    mask = X[idx, best_feature] <= best_threshold
    node.feature = best_feature
    node.threshold = best_threshold
    node.left = _grow(X, y, idx[mask], max_features, rng)
    node.right = _grow(X, y, idx[~mask], max_features, rng)
    return node


@dataclass
class RandomForest:
    trees: list[_Node]
    n_features: int
    seed: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValidationError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            for i, row in enumerate(X):
                node = tree
                while node.feature is not None:
                    node = node.left if row[node.feature] <= node.threshold else node.right
                out[i] += node.prob
        return out / len(self.trees)


def rf_fit(X: np.ndarray, y: np.ndarray, n_trees: int = 170, seed: int = 0) -> RandomForest:
    """Fit a forest of ``n_trees`` Gini trees on bootstrap samples.

    Deterministic given (data, seed). Raises if only one class is present
    or fewer than 2 samples are given.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError(f"bad training shapes X{X.shape} y{y.shape}")
    if X.shape[0] < 2:
        raise ValidationError("need at least 2 training samples")
    if not np.all(np.isfinite(X)):
        raise ValidationError("training features contain non-finite values")
    classes = np.unique(y)
    if not np.array_equal(classes, [0, 1]):
        raise ValidationError(f"need both classes present, got labels {classes.tolist()}")

    n, d = X.shape
    max_features = max(1, int(np.sqrt(d)))
    root_rng = np.random.default_rng(seed)
    tree_seeds = root_rng.integers(0, 2**63 - 1, size=n_trees)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(int(tree_seeds[t]))
        bootstrap = rng.integers(0, n, size=n)
        trees.append(_grow(X, y, bootstrap, max_features, rng))
    return RandomForest(trees=trees, n_features=d, seed=seed)


def rf_predict_proba(model: RandomForest, X: np.ndarray) -> np.ndarray:
    return model.predict_proba(X)
