"""CSV ingestion, gap filling, lag windowing, scaling and time-ordered splits."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DataError, UsageError

DEFAULT_SENTINEL = -200.0
NORM_MODES = ("paper", "train_stats")


@dataclass
class RawSeries:
    timestamps: np.ndarray
    columns: dict[str, np.ndarray]
    target_name: str

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps)
        self.columns = {k: np.asarray(v, dtype=np.float64) for k, v in self.columns.items()}
        if self.target_name not in self.columns:
            raise UsageError(
                f"target column {self.target_name!r} not found; available: {list(self.columns)}"
            )
        n = len(self.timestamps)
        for name, col in self.columns.items():
            if col.shape != (n,):
                raise DataError(f"column {name!r} has {col.shape[0]} values, expected {n}")
        if n > 1 and not np.all(self.timestamps[1:] > self.timestamps[:-1]):
            raise DataError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class NormStats:
    """Min-max statistics of a windowed dataset (features and target)."""

    feature_min: np.ndarray
    feature_max: np.ndarray
    target_min: float
    target_max: float
    mode: str = "paper"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "feature_min": self.feature_min.tolist(),
            "feature_max": self.feature_max.tolist(),
            "target_min": self.target_min,
            "target_max": self.target_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            np.asarray(d["feature_min"], dtype=np.float64),
            np.asarray(d["feature_max"], dtype=np.float64),
            float(d["target_min"]),
            float(d["target_max"]),
            d.get("mode", "paper"),
        )


@dataclass
class WindowedDataset:
    """Lagged design matrix with one target per row.

    ``times`` holds the timestamp of each row's target. ``target_attr`` is
    the sanitized attribute name used in ``Lag_<attr>_<k>`` feature names.
    """

    feature_names: list[str]
    rows: np.ndarray
    targets: np.ndarray
    norm_stats: NormStats | None = None
    target_attr: str = ""
    window: int = 0
    times: np.ndarray = field(default=None)

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        self.targets = np.ascontiguousarray(self.targets, dtype=np.float64).ravel()
        if self.rows.ndim != 2 or self.rows.shape[0] != self.targets.shape[0]:
            raise DataError(
                f"rows {self.rows.shape} and targets {self.targets.shape} disagree"
            )
        if len(self.feature_names) != self.rows.shape[1]:
            raise DataError("feature_names length does not match column count")
        if self.times is None:
            self.times = np.arange(self.n_rows)
        self.times = np.asarray(self.times)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def q(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.n_rows

    def subset(self, start: int, stop: int) -> "WindowedDataset":
        return replace(
            self,
            rows=self.rows[start:stop].copy(),
            targets=self.targets[start:stop].copy(),
            times=self.times[start:stop].copy(),
        )

    def target_lag_indices(self) -> dict[int, int]:
        """Map lag k -> column index of ``Lag_<target>_<k>`` (absent if excluded)."""
        out = {}
        prefix = f"Lag_{self.target_attr}_"
        for j, name in enumerate(self.feature_names):
            if name.startswith(prefix) and name[len(prefix):].isdigit():
                out[int(name[len(prefix):])] = j
        return out


def sanitize_name(name: str) -> str:
    """``NOx(GT)`` -> ``NOxGT``; matches the feature naming of lag columns."""
    clean = re.sub(r"[^0-9A-Za-z]+", "", str(name))
    return clean or "attr"


def load_csv(
    path: str | Path,
    target: str,
    timestamp_column: str | None = None,
    delimiter: str = ",",
    missing_sentinel: float | None = DEFAULT_SENTINEL,
) -> RawSeries:
    """Read a CSV into a :class:`RawSeries`.

    The timestamp column defaults to the first column. Empty cells, ``NaN``
    and ``missing_sentinel`` are read as missing values.
    """
    df = pd.read_csv(path, sep=delimiter, na_values=["NaN", "nan", ""], keep_default_na=True)
    if df.shape[1] < 2:
        raise DataError(f"{path}: need a timestamp column and at least one attribute")
    ts_col = timestamp_column or df.columns[0]
    if ts_col not in df.columns:
        raise UsageError(f"timestamp column {ts_col!r} not in {list(df.columns)}")
    if target not in df.columns or target == ts_col:
        raise UsageError(f"target column {target!r} not found in {path}")
    raw_ts = df[ts_col]
    if pd.api.types.is_numeric_dtype(raw_ts):
        ts = raw_ts.to_numpy()
    else:
        ts = pd.to_datetime(raw_ts).to_numpy()
    cols = {}
    for name in df.columns:
        if name == ts_col:
            continue
        vals = pd.to_numeric(df[name], errors="coerce").to_numpy(dtype=np.float64)
        if missing_sentinel is not None:
            vals[vals == missing_sentinel] = np.nan
        cols[str(name)] = vals
    return RawSeries(ts, cols, target)


def interpolate_missing(series: RawSeries) -> RawSeries:
    """Fill gaps linearly by row position; ends are extended with the nearest value."""
    filled = {}
    pos = np.arange(len(series), dtype=np.float64)
    for name, col in series.columns.items():
        present = np.isfinite(col)
        if not present.any():
            raise DataError(f"column {name!r} has no values to interpolate from")
        if present.all():
            filled[name] = col.copy()
            continue
        filled[name] = np.interp(pos, pos[present], col[present])
    return RawSeries(series.timestamps.copy(), filled, series.target_name)


def sliding_window(
    series: RawSeries,
    window: int,
    include_target_lags: bool = True,
) -> WindowedDataset:
    """Lag features ``Lag_<attr>_<k>`` (k=1 most recent) for every attribute."""
    if window <= 0:
        raise UsageError(f"window must be positive, got {window}")
    n = len(series)
    if n <= window:
        raise UsageError(f"series of length {n} is too short for window {window}")
    names, cols = [], []
    for attr, col in series.columns.items():
        if attr == series.target_name and not include_target_lags:
            continue
        if not np.isfinite(col).all():
            raise DataError(f"column {attr!r} has missing values; interpolate first")
        base = sanitize_name(attr)
        for k in range(1, window + 1):
            names.append(f"Lag_{base}_{k}")
            cols.append(col[window - k:n - k])
    if not cols:
        raise UsageError("no input attributes left after excluding the target")
    target = series.columns[series.target_name]
    if not np.isfinite(target).all():
        raise DataError(f"target column {series.target_name!r} has missing values; interpolate first")
    return WindowedDataset(
        feature_names=names,
        rows=np.column_stack(cols),
        targets=target[window:].copy(),
        target_attr=sanitize_name(series.target_name),
        window=window,
        times=series.timestamps[window:].copy(),
    )


def split_train_test(ds: WindowedDataset, test_fraction: float) -> tuple[WindowedDataset, WindowedDataset]:
    """Time-ordered split; the test set is the last floor(fraction * rows) rows."""
    if not 0.0 < test_fraction < 1.0:
        raise UsageError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = int(np.floor(test_fraction * ds.n_rows))
    n_train = ds.n_rows - n_test
    if n_test == 0 or n_train == 0:
        raise UsageError(f"split of {ds.n_rows} rows at {test_fraction} leaves an empty side")
    return ds.subset(0, n_train), ds.subset(n_train, ds.n_rows)


def _minmax(x: np.ndarray, lo, hi):
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (x - lo) / safe, 0.5)


def compute_stats(ds: WindowedDataset, mode: str = "paper") -> NormStats:
    return NormStats(
        ds.rows.min(axis=0),
        ds.rows.max(axis=0),
        float(ds.targets.min()),
        float(ds.targets.max()),
        mode,
    )


def normalize(ds: WindowedDataset, mode: str = "paper", stats: NormStats | None = None) -> WindowedDataset:
    """Min-max scale each column to [0, 1].

    ``paper`` mode derives statistics from ``ds`` itself (train and test are
    then scaled independently). ``train_stats`` applies the supplied
    statistics, so out-of-range test values may fall outside [0, 1].
    Constant columns map to 0.5.
    """
    if mode not in NORM_MODES:
        raise UsageError(f"unknown normalization mode {mode!r}; expected one of {NORM_MODES}")
    if mode == "train_stats" and stats is None:
        raise UsageError("train_stats normalization requires training statistics")
    if mode == "paper" or stats is None:
        stats = compute_stats(ds, mode)
    else:
        stats = replace(stats, mode=mode)
    rows = _minmax(ds.rows, stats.feature_min, stats.feature_max)
    targets = _minmax(ds.targets, stats.target_min, stats.target_max)
    return replace(ds, rows=rows, targets=targets, norm_stats=stats)


def denormalize(ds: WindowedDataset) -> WindowedDataset:
    if ds.norm_stats is None:
        return ds
    s = ds.norm_stats
    rows = ds.rows * (s.feature_max - s.feature_min) + s.feature_min
    targets = ds.targets * (s.target_max - s.target_min) + s.target_min
    return replace(ds, rows=rows, targets=targets, norm_stats=None)


def denormalize_target(values, stats: NormStats | None) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if stats is None:
        return v
    return v * (stats.target_max - stats.target_min) + stats.target_min


def partition_training(train: WindowedDataset, n: int) -> list[WindowedDataset]:
    """Split into n contiguous time-ordered blocks; the first absorbs any remainder."""
    if n < 2:
        raise UsageError(f"need at least 2 partitions, got n={n}")
    if n > train.n_rows:
        raise UsageError(f"cannot split {train.n_rows} rows into {n} partitions")
    base, rem = divmod(train.n_rows, n)
    sizes = [base + rem] + [base] * (n - 1)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [train.subset(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def prepare(
    series: RawSeries,
    window: int,
    test_fraction: float,
    n_partitions: int,
    norm_mode: str = "paper",
    include_target_lags: bool = True,
) -> tuple[WindowedDataset, WindowedDataset, list[WindowedDataset]]:
    """Interpolate, window, split, scale and partition in one call."""
    ds = sliding_window(interpolate_missing(series), window, include_target_lags)
    train, test = split_train_test(ds, test_fraction)
    train_n = normalize(train, "paper")
    if norm_mode == "paper":
        test_n = normalize(test, "paper")
    else:
        test_n = normalize(test, "train_stats", train_n.norm_stats)
    return train_n, test_n, partition_training(train_n, n_partitions)


def concat(parts: Sequence[WindowedDataset]) -> WindowedDataset:
    first = parts[0]
    return replace(
        first,
        rows=np.vstack([p.rows for p in parts]),
        targets=np.concatenate([p.targets for p in parts]),
        times=np.concatenate([p.times for p in parts]),
    )
