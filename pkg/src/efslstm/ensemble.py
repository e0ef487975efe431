"""Stacking ensemble over the Pareto-front LSTMs and mask-frequency feature importance."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import WindowedDataset
from .errors import DimensionError, UsageError
from .forest import RandomForestRegressor, meta_from_dict
from .lstm import Genome, LstmParams, convert, flatten, run_sequence, step_batch
from .moea import ParetoFront

SCHEMA_VERSION = 1


@dataclass
class StackingDataset:
    """Base-model outputs in the first m columns, observations in the last."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[1] < 2:
            raise DimensionError(f"stacking matrix needs >= 2 columns, got {self.matrix.shape}")

    @property
    def m(self) -> int:
        return self.matrix.shape[1] - 1

    @property
    def inputs(self) -> np.ndarray:
        return self.matrix[:, :-1]

    @property
    def targets(self) -> np.ndarray:
        return self.matrix[:, -1]


def _base_models(models, u: int | None = None) -> list[tuple[LstmParams, np.ndarray]]:
    if isinstance(models, ParetoFront):
        models = models.genomes
    out = []
    for item in models:
        if isinstance(item, Genome):
            out.append((item.params(u), item.mask.copy()))
        else:
            params, mask = item
            out.append((params, np.asarray(mask, dtype=bool)))
    if not out:
        raise UsageError("need at least one base model")
    return out


def base_outputs(models, data: WindowedDataset) -> np.ndarray:
    """Column j is model j's full forward pass over ``data`` from a zero state."""
    base = _base_models(models)
    cols = []
    for params, mask in base:
        if params.q != data.q:
            raise UsageError(f"model expects q={params.q} inputs, data has {data.q}")
        cols.append(run_sequence(params, mask, data.rows)[0])
    return np.column_stack(cols)


def build_stacking_dataset(models, data: WindowedDataset) -> StackingDataset:
    return StackingDataset(np.column_stack([base_outputs(models, data), data.targets]))


def feature_importance(front, q: int) -> np.ndarray:
    """Fraction of front models whose mask selects each feature."""
    genomes = front.genomes if isinstance(front, ParetoFront) else list(front)
    if not genomes:
        raise UsageError("feature importance needs a nonempty front")
    masks = np.array([np.asarray(g.mask if isinstance(g, Genome) else g, dtype=bool) for g in genomes])
    if masks.shape[1] != q:
        raise DimensionError(f"masks have {masks.shape[1]} bits, expected q={q}")
    return masks.sum(axis=0) / masks.shape[0]


def train_forest(ds: StackingDataset, trees: int = 100, mtry: int | None = None,
                 min_leaf: int = 5, seed: int = 0, threads: int = 1) -> RandomForestRegressor:
    if trees < 1:
        raise UsageError(f"forest needs at least one tree, got {trees}")
    if ds.matrix.shape[0] < 2:
        raise UsageError("forest needs at least 2 rows")
    return RandomForestRegressor(trees, mtry, min_leaf, seed, threads=threads).fit(ds.inputs, ds.targets)


@dataclass
class EnsembleState:
    """Recurrent state of every base model, one (h, c) pair per model."""

    h: list[np.ndarray]
    c: list[np.ndarray]


@dataclass
class EnsembleModel:
    base_models: list[tuple[LstmParams, np.ndarray]]
    meta: object
    feature_names: list[str] = field(default_factory=list)
    importance: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.base_models)

    @property
    def q(self) -> int:
        return self.base_models[0][0].q

    def zero_state(self) -> EnsembleState:
        return EnsembleState(
            [np.zeros(p.u) for p, _ in self.base_models],
            [np.zeros(p.u) for p, _ in self.base_models],
        )

    def _check(self, X: np.ndarray):
        if not getattr(self.meta, "is_fitted", True):
            raise UsageError("ensemble meta-learner has not been trained")
        if X.shape[1] != self.q:
            raise DimensionError(f"ensemble expects q={self.q} inputs, got {X.shape[1]}")

    # Sequence interface used by recursive forecasting -----------------------

    def run(self, rows: np.ndarray):
        """One-step predictions over a contiguous sequence from zero state.

        Returns ``(predictions, states)`` where ``states[j]`` is the pair of
        (rows, u) arrays holding model j's (h, c) after each row.
        """
        X = np.ascontiguousarray(rows, dtype=np.float64)
        self._check(X)
        outs, states = [], []
        for params, mask in self.base_models:
            y, H, C = run_sequence(params, mask, X)
            outs.append(y)
            states.append((H, C))
        return self.meta.predict(np.column_stack(outs)), states

    def step(self, rows: np.ndarray, states):
        """Advance the first ``len(rows)`` carried states by one row each."""
        X = np.ascontiguousarray(rows, dtype=np.float64)
        self._check(X)
        n = X.shape[0]
        outs, new_states = [], []
        for (params, mask), (H, C) in zip(self.base_models, states):
            y, H2, C2 = step_batch(params, mask, X, H[:n], C[:n])
            outs.append(y)
            new_states.append((H2, C2))
        return self.meta.predict(np.column_stack(outs)), new_states

    def predict(self, data: WindowedDataset) -> np.ndarray:
        return self.run(data.rows)[0]

    # Serialization ----------------------------------------------------------

    def to_dict(self, config: dict | None = None) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": config or {},
            "q": self.q,
            "hidden_units": [p.u for p, _ in self.base_models],
            "feature_names": list(self.feature_names),
            "models": [
                {"mask": np.asarray(mask, dtype=int).tolist(), "weights": flatten(params).tolist()}
                for params, mask in self.base_models
            ],
            "meta": self.meta.to_dict(),
            "importance": [] if self.importance is None else np.asarray(self.importance).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleModel":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise UsageError(f"unsupported ensemble schema_version {d.get('schema_version')!r}")
        q = d["q"]
        base = [
            (convert(m["weights"], q, u), np.asarray(m["mask"], dtype=bool))
            for m, u in zip(d["models"], d["hidden_units"])
        ]
        imp = np.asarray(d["importance"], dtype=np.float64) if d.get("importance") else None
        return cls(base, meta_from_dict(d["meta"]), list(d.get("feature_names", [])), imp)


def predict_meta(model: EnsembleModel, row, state: EnsembleState | None = None) -> float:
    """Ensemble prediction for a single row.

    With ``state`` given, each base model continues from it and the state is
    advanced in place, so successive calls walk a sequence. Without it, every
    base model starts from zero.
    """
    x = np.asarray(row, dtype=np.float64).reshape(1, -1)
    model._check(x)
    st = state if state is not None else model.zero_state()
    outs = []
    for j, (params, mask) in enumerate(model.base_models):
        y, H, C = step_batch(params, mask, x, st.h[j][None, :], st.c[j][None, :])
        st.h[j], st.c[j] = H[0], C[0]
        outs.append(y[0])
    return float(model.meta.predict(np.array([outs]))[0])


def fit_ensemble(
    front,
    train: WindowedDataset,
    meta=None,
    u: int | None = None,
) -> EnsembleModel:
    """Train the meta-learner on base outputs over the training rows."""
    base = _base_models(front, u)
    E_R = build_stacking_dataset(base, train)
    meta = meta if meta is not None else RandomForestRegressor()
    meta.fit(E_R.inputs, E_R.targets)
    genomes: Sequence = front.genomes if isinstance(front, ParetoFront) else [m for _, m in base]
    importance = feature_importance(genomes, train.q)
    return EnsembleModel(base, meta, list(train.feature_names), importance)
