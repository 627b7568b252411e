"""CART random forest and impurity-based feature importance.

Used twice: as a black-box model, and inside ER-SHAP-RF to turn model-labelled
neighbours of the explained point into a feature sampling distribution.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ._seeding import derive_seed
from .blackbox import BlackBoxModel, as_batch
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

# gains at or below this are rounding noise, not a real impurity decrease
_MIN_GAIN = 1e-12
_MAX_AUTO_CLASSES = 10


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 10
    max_depth: Optional[int] = None
    features_per_split: Optional[int] = None  # None -> ceil(sqrt(m))
    bootstrap: bool = True
    task: str = "auto"  # "auto" | "classification" | "regression"
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0 or None")
        if self.task not in ("auto", "classification", "regression"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")


def infer_task(y) -> str:
    """Integer labels 0..K-1 with few distinct values mean classification."""
    y = np.asarray(y, dtype=float)
    if (
        y.size
        and np.all(y == np.round(y))
        and y.min() >= 0
        and y.max() < _MAX_AUTO_CLASSES
    ):
        return "classification"
    return "regression"


class DecisionTree:
    """Array-backed binary tree. ``feature[k] == -1`` marks a leaf."""

    def __init__(self, feature, threshold, left, right, value, impurity, n_samples,
                 split_gain):
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.value = np.asarray(value, dtype=float)
        self.impurity = np.asarray(impurity, dtype=float)
        self.n_samples = np.asarray(n_samples, dtype=np.intp)
        # n_node*imp - n_left*imp_left - n_right*imp_right; 0 at leaves
        self.split_gain = np.asarray(split_gain, dtype=float)

    @property
    def node_count(self) -> int:
        return self.feature.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def depth(self) -> int:
        d = np.zeros(self.node_count, dtype=int)
        for k in range(self.node_count):  # children always come after parents
            if self.feature[k] >= 0:
                d[self.left[k]] = d[self.right[k]] = d[k] + 1
        return int(d.max())

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.intp)
        while True:
            f = self.feature[node]
            active = np.nonzero(f >= 0)[0]
            if active.size == 0:
                break
            cur = node[active]
            go_left = X[active, f[active]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def feature_gains(self, m: int) -> np.ndarray:
        """Per-feature impurity decrease, scaled by the root sample count."""
        out = np.zeros(m)
        internal = self.feature >= 0
        np.add.at(out, self.feature[internal], self.split_gain[internal])
        return out / max(int(self.n_samples[0]), 1)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in _TREE_FIELDS}

    @classmethod
    def from_dict(cls, d) -> "DecisionTree":
        return cls(*(d[k] for k in _TREE_FIELDS))


_TREE_FIELDS = ("feature", "threshold", "left", "right", "value", "impurity",
                "n_samples", "split_gain")


class _TreeBuilder:
    def __init__(self, X, y, task, n_classes, max_depth, features_per_split,
                 min_samples_leaf, rng):
        self.X = X
        self.task = task
        self.max_depth = max_depth
        self.k = features_per_split
        self.min_leaf = min_samples_leaf
        self.rng = rng
        if task == "classification":
            self.Y = np.eye(n_classes)[y.astype(np.intp)]
            self.pos = 1 if n_classes > 1 else None
        else:
            self.y = y

    def _impurity_and_value(self, idx):
        n = idx.size
        if self.task == "classification":
            counts = self.Y[idx].sum(axis=0)
            p = counts / n
            value = p[self.pos] if self.pos is not None else 0.0
            return 1.0 - float(np.dot(p, p)), float(value)
        yy = self.y[idx]
        mu = yy.sum() / n
        r = yy - mu
        return float(r @ r) / n, float(mu)

    def _child_costs(self, idx, order):
        """n_left*imp_left + n_right*imp_right per split position (rows) and
        candidate feature (columns); ``order`` sorts each column."""
        n = idx.size
        nl = np.arange(1, n, dtype=float)[:, None]
        nr = n - nl
        if self.task == "classification":
            Yn = self.Y[idx]
            cost = np.empty((n - 1, order.shape[1]))
            for c in range(order.shape[1]):
                C = np.cumsum(Yn[order[:, c]], axis=0)
                L = C[:-1]
                R = C[-1] - L
                cost[:, c] = ((nl[:, 0] - np.sum(L * L, axis=1) / nl[:, 0])
                              + (nr[:, 0] - np.sum(R * R, axis=1) / nr[:, 0]))
            return cost
        yy = self.y[idx]
        yy = (yy - yy.sum() / n)[order]
        s = np.cumsum(yy, axis=0)
        q = np.cumsum(yy * yy, axis=0)
        sl, ql = s[:-1], q[:-1]
        sr, qr = s[-1] - sl, q[-1] - ql
        left = np.maximum(ql - sl * sl / nl, 0.0)
        right = np.maximum(qr - sr * sr / nr, 0.0)
        return left + right

    def _best_split(self, idx, parent_cost):
        m = self.X.shape[1]
        k = min(self.k, m)
        candidates = np.sort(self.rng.choice(m, size=k, replace=False))
        n = idx.size
        Xc = self.X[idx][:, candidates]
        order = np.argsort(Xc, axis=0, kind="stable")
        xs = Xc[order, np.arange(k)]
        cost = self._child_costs(idx, order)
        valid = xs[:-1] < xs[1:]
        if self.min_leaf > 1:
            pos = np.arange(1, n)[:, None]
            valid &= (pos >= self.min_leaf) & (n - pos >= self.min_leaf)
        if not valid.any():
            return None
        cost = np.where(valid, cost, np.inf)
        # column-major argmin: lowest feature first, then lowest threshold
        flat = int(np.argmin(cost.T))
        c, i = divmod(flat, n - 1)
        best_cost = float(cost[i, c])
        if parent_cost - best_cost <= _MIN_GAIN:
            return None
        lo, hi = xs[i, c], xs[i + 1, c]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        return best_cost, int(candidates[c]), float(thr)

    def build(self, idx):
        feature, threshold, left, right = [], [], [], []
        value, impurity, n_samples, gain = [], [], [], []

        def new_node(node_idx):
            imp, val = self._impurity_and_value(node_idx)
            for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                           (value, val), (impurity, imp), (n_samples, node_idx.size),
                           (gain, 0.0)):
                lst.append(v)
            return len(feature) - 1

        root = new_node(idx)
        stack = [(root, idx, 0)]
        while stack:
            node, node_idx, depth = stack.pop()
            n = node_idx.size
            if (
                n < 2 * self.min_leaf
                or impurity[node] <= 0.0
                or (self.max_depth is not None and depth >= self.max_depth)
            ):
                continue
            parent_cost = n * impurity[node]
            split = self._best_split(node_idx, parent_cost)
            if split is None:
                continue
            cost, f, thr = split
            mask = self.X[node_idx, f] <= thr
            li, ri = node_idx[mask], node_idx[~mask]
            feature[node], threshold[node] = f, thr
            gain[node] = parent_cost - cost
            left[node] = new_node(li)
            right[node] = new_node(ri)
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))
        return DecisionTree(feature, threshold, left, right, value, impurity,
                            n_samples, gain)


class RandomForest(BlackBoxModel):
    """Bagged CART trees; prediction is the plain mean of the tree outputs.

    For classification each leaf holds its class-1 fraction, so ``predict``
    returns a class-1 score in ``[0, 1]``.
    """

    def __init__(self, trees, feature_count, task, n_classes=None, config=None):
        self.trees = list(trees)
        self.feature_count = int(feature_count)
        self.task = task
        self.n_classes = n_classes
        self.config = config or ForestConfig()

    @property
    def tree_count(self) -> int:
        return len(self.trees)

    def _predict(self, X):
        return np.mean(np.stack([t.predict(X) for t in self.trees]), axis=0)

    def tree_predictions(self, X) -> np.ndarray:
        X = as_batch(X, self.feature_count)
        return np.stack([t.predict(X) for t in self.trees])

    def to_dict(self):
        return {
            "kind": "forest",
            "feature_count": self.feature_count,
            "task": self.task,
            "n_classes": self.n_classes,
            "config": asdict(self.config),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            [DecisionTree.from_dict(t) for t in d["trees"]],
            d["feature_count"], d["task"], d.get("n_classes"),
            ForestConfig(**d.get("config", {})),
        )


def fit_forest(data, config: ForestConfig = ForestConfig()) -> RandomForest:
    """Train a random forest on a labelled ``Dataset``.

    Every tree gets its own RNG derived from ``config.seed`` and the tree
    index, so results do not depend on training order.
    """
    X = np.asarray(data.X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot fit a forest on empty data")
    if data.y is None:
        raise DataError("fit_forest needs labels")
    y = np.asarray(data.y, dtype=float)
    n, m = X.shape
    task = infer_task(y) if config.task == "auto" else config.task
    n_classes = None
    if task == "classification":
        if not (np.all(y == np.round(y)) and y.min() >= 0):
            raise DataError("classification labels must be non-negative integers")
        n_classes = max(int(y.max()) + 1, 2)
    k = config.features_per_split or math.ceil(math.sqrt(m))
    if not 1 <= k:
        raise ConfigError("features_per_split must be >= 1")

    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(derive_seed(config.seed, "tree", t))
        idx = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        builder = _TreeBuilder(X, y, task, n_classes, config.max_depth, k,
                               config.min_samples_leaf, rng)
        trees.append(builder.build(idx))
    return RandomForest(trees, m, task, n_classes, config)


def impurity_importance(forest: RandomForest) -> np.ndarray:
    """Mean-decrease-in-impurity importance, normalised to a distribution.

    Falls back to uniform when no tree made a single split.
    """
    m = forest.feature_count
    raw = np.mean([t.feature_gains(m) for t in forest.trees], axis=0)
    raw = np.maximum(raw, 0.0)
    total = math.fsum(raw)
    if total <= 0.0:
        return np.full(m, 1.0 / m)
    return raw / total


def check_distribution(p, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ConfigError("a feature distribution is a non-empty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ConfigError("probabilities must be finite and non-negative")
    if abs(math.fsum(p) - 1.0) > tol:
        raise ConfigError(f"probabilities sum to {math.fsum(p)!r}, not 1")
    return p


def temperature_scale(p, T: float) -> np.ndarray:
    """Softmax of ``p / T``. Larger ``T`` flattens; the argmax never moves."""
    if not T > 0:
        raise ConfigError("temperature must be > 0")
    z = np.asarray(p, dtype=float) / T
    e = np.exp(z - z.max())
    return e / math.fsum(e)
