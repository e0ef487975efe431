"""Meta-regressors for the stacking layer: a bagged CART forest and plain OLS."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .errors import UsageError


class RegressionTree:
    """Axis-aligned regression tree stored as flat node arrays.

    Leaves have ``feature == -1`` and carry the mean target of their rows.
    Rows with ``x[feature] <= threshold`` go left.
    """

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, mtry: int, min_leaf: int,
            rng: np.random.Generator) -> "RegressionTree":
        m = X.shape[1]
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(idx):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(np.mean(y[idx])))
            return len(feature) - 1

        stack = [(np.arange(y.shape[0]), new_node(np.arange(y.shape[0])))]
        while stack:
            idx, node = stack.pop()
            yi = y[idx]
            if idx.shape[0] < 2 * min_leaf or yi.max() == yi.min():
                continue
            feats = np.sort(rng.choice(m, size=mtry, replace=False)).astype(np.int64)
            f, t, _ = kernels.best_split(np.ascontiguousarray(X[idx]), yi, feats, min_leaf)
            if f < 0:
                continue
            go_left = X[idx, f] <= t
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = int(f), float(t)
            left[node], right[node] = new_node(li), new_node(ri)
            # right pushed first so the left subtree is numbered next
            stack.append((ri, right[node]))
            stack.append((li, left[node]))
        return cls(feature, threshold, left, right, value)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.forest_predict(
            np.zeros(1, dtype=np.int64), self.feature, self.threshold, self.left, self.right,
            self.value, X,
        )[0]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


class RandomForestRegressor:
    kind = "random_forest"

    def __init__(self, n_trees: int = 100, mtry: int | None = None, min_leaf: int = 5,
                 seed: int = 0, bootstrap: bool = True, threads: int = 1):
        if n_trees < 1:
            raise UsageError(f"forest needs at least one tree, got {n_trees}")
        if min_leaf < 1:
            raise UsageError(f"min_leaf must be >= 1, got {min_leaf}")
        if mtry is not None and mtry < 1:
            raise UsageError(f"mtry must be >= 1, got {mtry}")
        self.n_trees = n_trees
        self.mtry = mtry
        self.min_leaf = min_leaf
        self.seed = seed
        self.bootstrap = bootstrap
        self.threads = max(1, threads)
        self.trees: list[RegressionTree] = []
        self.samples: list[np.ndarray] = []
        self.n_features: int | None = None

    @property
    def is_fitted(self) -> bool:
        return bool(self.trees)

    def fit(self, X, y) -> "RandomForestRegressor":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise UsageError(f"X {X.shape} and y {y.shape} disagree")
        if X.shape[0] < 2:
            raise UsageError("forest needs at least 2 training rows")
        n, m = X.shape
        mtry = min(m, self.mtry if self.mtry is not None else max(1, math.ceil(m / 3)))
        self.mtry = mtry
        self.n_features = m
        seqs = np.random.SeedSequence(self.seed).spawn(self.n_trees)

        def grow(ss):
            rng = np.random.default_rng(ss)
            idx = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            return idx, RegressionTree.fit(X[idx], y[idx], mtry, self.min_leaf, rng)

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                grown = list(pool.map(grow, seqs))
        else:
            grown = [grow(ss) for ss in seqs]
        self.samples = [g[0] for g in grown]
        self.trees = [g[1] for g in grown]
        self._pack()
        return self

    def _pack(self):
        offs = np.cumsum([0] + [t.n_nodes for t in self.trees])
        self._roots = offs[:-1].astype(np.int64)
        shift = lambda arr, o: np.where(arr >= 0, arr + o, -1)  # noqa: E731
        self._feature = np.concatenate([t.feature for t in self.trees])
        self._threshold = np.concatenate([t.threshold for t in self.trees])
        self._left = np.concatenate([shift(t.left, o) for t, o in zip(self.trees, offs)])
        self._right = np.concatenate([shift(t.right, o) for t, o in zip(self.trees, offs)])
        self._value = np.concatenate([t.value for t in self.trees])

    def predict_trees(self, X) -> np.ndarray:
        if not self.is_fitted:
            raise UsageError("forest has not been trained")
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        if X.shape[1] != self.n_features:
            raise UsageError(f"forest expects {self.n_features} inputs, got {X.shape[1]}")
        return kernels.forest_predict(
            self._roots, self._feature, self._threshold, self._left, self._right, self._value, X
        )

    def predict(self, X) -> np.ndarray:
        return self.predict_trees(X).mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_trees": self.n_trees,
            "mtry": self.mtry,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "bootstrap": self.bootstrap,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForestRegressor":
        rf = cls(d["n_trees"], d["mtry"], d["min_leaf"], d["seed"], d["bootstrap"])
        rf.n_features = d["n_features"]
        rf.trees = [RegressionTree.from_dict(t) for t in d["trees"]]
        if rf.trees:
            rf._pack()
        return rf


class OLSRegressor:
    """Least squares with intercept; a transparent stand-in meta-learner."""

    kind = "ols"

    def __init__(self):
        self.coef: np.ndarray | None = None
        self.intercept = 0.0

    @property
    def is_fitted(self) -> bool:
        return self.coef is not None

    def fit(self, X, y) -> "OLSRegressor":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        A = np.column_stack([X, np.ones(X.shape[0])])
        sol, *_ = np.linalg.lstsq(A, y, rcond=None)
        self.coef, self.intercept = sol[:-1], float(sol[-1])
        return self

    def predict(self, X) -> np.ndarray:
        if self.coef is None:
            raise UsageError("OLS meta-learner has not been trained")
        return np.atleast_2d(np.asarray(X, dtype=np.float64)) @ self.coef + self.intercept

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, d: dict) -> "OLSRegressor":
        m = cls()
        m.coef = np.asarray(d["coef"], dtype=np.float64)
        m.intercept = float(d["intercept"])
        return m


META_LEARNERS = {RandomForestRegressor.kind: RandomForestRegressor, OLSRegressor.kind: OLSRegressor}


def meta_from_dict(d: dict):
    try:
        return META_LEARNERS[d["kind"]].from_dict(d)
    except KeyError as exc:
        raise UsageError(f"unknown meta-learner kind {d.get('kind')!r}") from exc
