"""Recursive multi-step forecasting and forecast-comparison statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Mapping, Protocol

import numpy as np
from scipy import stats as sstats

from .data import WindowedDataset
from .errors import DegenerateTestError, UndefinedRatioError, UsageError

TIE = "tie"
MODEL_A = "model-A"
MODEL_B = "model-B"


class SequenceModel(Protocol):
    """What :func:`recursive_forecast` needs from a one-step model.

    ``run`` predicts every row of a contiguous sequence from a fresh state
    and returns the per-row carried state; ``step`` advances the first
    ``len(rows)`` carried states by one row.
    """

    def run(self, rows: np.ndarray): ...

    def step(self, rows: np.ndarray, state): ...


class FunctionModel:
    """Stateless one-step model wrapping ``fn(rows) -> predictions``."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self.fn = fn

    def run(self, rows):
        return np.asarray(self.fn(rows), dtype=np.float64), None

    def step(self, rows, state):
        return np.asarray(self.fn(rows), dtype=np.float64), None


def persistence_model(data: WindowedDataset) -> FunctionModel:
    """Predicts the most recent observed (or fed-back) target value."""
    col = data.target_lag_indices().get(1)
    if col is None:
        raise UsageError("persistence needs the target's own Lag_1 feature")
    return FunctionModel(lambda rows: feature_to_target(rows[:, col], col, data))


def target_to_feature(values, col: int, data: WindowedDataset) -> np.ndarray:
    """Map target-scale values into the scale of feature column ``col``."""
    v = np.asarray(values, dtype=np.float64)
    s = data.norm_stats
    if s is None:
        return v
    raw = v * (s.target_max - s.target_min) + s.target_min
    lo, hi = s.feature_min[col], s.feature_max[col]
    if hi == lo:
        return np.full_like(raw, 0.5)
    return (raw - lo) / (hi - lo)


def feature_to_target(values, col: int, data: WindowedDataset) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    s = data.norm_stats
    if s is None:
        return v
    lo, hi = s.feature_min[col], s.feature_max[col]
    raw = v * (hi - lo) + lo
    if s.target_max == s.target_min:
        return np.full_like(raw, 0.5)
    return (raw - s.target_min) / (s.target_max - s.target_min)


def rmse(pred, obs) -> float:
    p, o = _pair(pred, obs)
    d = p - o
    return float(math.sqrt(np.mean(d * d)))


def mae(pred, obs) -> float:
    p, o = _pair(pred, obs)
    return float(np.mean(np.abs(p - o)))


def _pair(pred, obs):
    p = np.asarray(pred, dtype=np.float64).ravel()
    o = np.asarray(obs, dtype=np.float64).ravel()
    if p.shape != o.shape:
        raise UsageError(f"length mismatch: {p.shape[0]} predictions vs {o.shape[0]} observations")
    if p.size == 0:
        raise UsageError("cannot score empty sequences")
    return p, o


@dataclass
class HorizonForecast:
    """Step-s predictions for every origin t with a true target at t+s-1."""

    h: int
    predictions: list[np.ndarray]
    observations: list[np.ndarray]
    rmse: np.ndarray
    mae: np.ndarray

    def errors(self, step: int) -> np.ndarray:
        return self.predictions[step - 1] - self.observations[step - 1]

    @property
    def mean_rmse(self) -> float:
        """Average of the per-step RMSEs."""
        return float(np.mean(self.rmse))

    @property
    def pooled_rmse(self) -> float:
        """RMSE over all steps' errors pooled together."""
        e = np.concatenate([self.errors(s) for s in range(1, self.h + 1)])
        return float(math.sqrt(np.mean(e * e)))

    @property
    def mean_mae(self) -> float:
        return float(np.mean(self.mae))

    @property
    def pooled_mae(self) -> float:
        e = np.concatenate([self.errors(s) for s in range(1, self.h + 1)])
        return float(np.mean(np.abs(e)))


def recursive_forecast(model: SequenceModel, data: WindowedDataset, h: int) -> HorizonForecast:
    """Iterate one-step predictions, feeding each back into the target's lag features.

    Exogenous lag features keep their observed values. The recurrent state
    for origin t at step s is the state reached after step s-1 from origin t.
    """
    if h < 1:
        raise UsageError(f"horizon must be >= 1, got {h}")
    if h >= data.n_rows:
        raise UsageError(f"horizon {h} needs more than {data.n_rows} rows")
    lag_cols = data.target_lag_indices()
    first, state = model.run(data.rows)
    preds = [np.asarray(first, dtype=np.float64)]
    for s in range(2, h + 1):
        n = data.n_rows - s + 1
        X = data.rows[s - 1:s - 1 + n].copy()
        for k, col in lag_cols.items():
            if k <= s - 1:
                X[:, col] = target_to_feature(preds[s - k - 1][:n], col, data)
        ps, state = model.step(X, state)
        preds.append(np.asarray(ps, dtype=np.float64))
    obs = [data.targets[s - 1:s - 1 + data.n_rows - s + 1] for s in range(1, h + 1)]
    return HorizonForecast(
        h,
        preds,
        obs,
        np.array([rmse(p, o) for p, o in zip(preds, obs)]),
        np.array([mae(p, o) for p, o in zip(preds, obs)]),
    )


def overfitting_ratio(train_rmse: float, test_rmse: float) -> float:
    """Training RMSE over test RMSE; values far below 1 signal overfitting."""
    if not test_rmse > 0.0:
        raise UndefinedRatioError(f"overfitting ratio undefined for test RMSE {test_rmse}")
    return float(train_rmse) / float(test_rmse)


@dataclass(frozen=True)
class DmResult:
    statistic: float
    p_value: float
    winner: str
    degenerate: bool = False

    def to_dict(self) -> dict:
        stat = None if math.isnan(self.statistic) else self.statistic
        return {"statistic": stat, "p_value": self.p_value, "winner": self.winner,
                "degenerate": self.degenerate}


def dm_statistic(errors_a, errors_b, h: int = 1) -> tuple[float, float]:
    """HLN-corrected Diebold-Mariano statistic on squared-error loss and its p-value.

    Raises :class:`DegenerateTestError` when the long-run variance of the
    loss differential is not positive.
    """
    a = np.asarray(errors_a, dtype=np.float64).ravel()
    b = np.asarray(errors_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise UsageError(f"error sequences differ in length: {a.size} vs {b.size}")
    T = a.size
    if T < 10:
        raise UsageError(f"Diebold-Mariano needs at least 10 errors, got {T}")
    if not 1 <= h < T:
        raise UsageError(f"horizon must satisfy 1 <= h < T, got h={h}")
    d = a * a - b * b
    dbar = d.mean()
    dc = d - dbar
    gamma = [float(dc[k:] @ dc[:T - k]) / T for k in range(h)]
    var = (gamma[0] + 2.0 * sum(gamma[1:])) / T
    if not var > 0.0 or gamma[0] == 0.0:
        raise DegenerateTestError("loss differential has zero long-run variance")
    dm = dbar / math.sqrt(var)
    dm *= math.sqrt((T + 1 - 2 * h + h * (h - 1) / T) / T)
    p = 2.0 * sstats.t.sf(abs(dm), df=T - 1)
    return float(dm), float(min(1.0, p))


def diebold_mariano(errors_a, errors_b, h: int = 1, alpha: float = 0.05) -> DmResult:
    """Compare two forecast-error sequences; a positive statistic favours B."""
    if not 0.0 < alpha < 1.0:
        raise UsageError(f"alpha must lie in (0, 1), got {alpha}")
    try:
        dm, p = dm_statistic(errors_a, errors_b, h)
    except DegenerateTestError:
        return DmResult(float("nan"), 1.0, TIE, degenerate=True)
    if p >= alpha:
        return DmResult(dm, p, TIE)
    return DmResult(dm, p, MODEL_B if dm > 0 else MODEL_A)


@dataclass(frozen=True)
class RankingRow:
    method: str
    wins: int
    losses: int

    @property
    def score(self) -> int:
        return self.wins - self.losses


def win_loss_ranking(results: Mapping[tuple[str, str, int], DmResult]) -> list[RankingRow]:
    """Tally wins and losses over pairwise tests keyed by (method_a, method_b, step)."""
    wins: dict[str, int] = {}
    losses: dict[str, int] = {}
    for (a, b, _step), res in results.items():
        for name in (a, b):
            wins.setdefault(name, 0)
            losses.setdefault(name, 0)
        if res.winner == MODEL_A:
            wins[a] += 1
            losses[b] += 1
        elif res.winner == MODEL_B:
            wins[b] += 1
            losses[a] += 1
    rows = [RankingRow(m, wins[m], losses[m]) for m in wins]
    return sorted(rows, key=lambda r: (-r.score, r.method))


def pairwise_dm(errors: Mapping[str, list[np.ndarray]], alpha: float = 0.05) -> dict:
    """DM test for every unordered pair of methods at every step.

    ``errors[name][s-1]`` holds the step-s errors; the DM horizon equals s.
    """
    names = list(errors)
    steps = {len(v) for v in errors.values()}
    if len(steps) != 1:
        raise UsageError("methods disagree on forecast horizon")
    h = steps.pop()
    out = {}
    for a, b in combinations(names, 2):
        for s in range(1, h + 1):
            out[(a, b, s)] = diebold_mariano(errors[a][s - 1], errors[b][s - 1], s, alpha)
    return out
