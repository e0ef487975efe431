"""Deterministic synthetic series used by tests, benchmarks and the demo configs."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd


def sine_series(n: int = 600, seed: int = 42, period: float = 40.0, noise: float = 0.05) -> pd.DataFrame:
    """Noisy sine target ``y`` with one phase-shifted exogenous driver ``x``."""
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    x = np.cos(2 * np.pi * t / period) + noise * rng.standard_normal(n)
    y = np.sin(2 * np.pi * t / period) + noise * rng.standard_normal(n)
    return pd.DataFrame({"t": t, "x": x, "y": y})


def planted_ar2(
    n: int = 600,
    seed: int = 0,
    noise_columns: int = 10,
    phi1: float = 1.5,
    phi2: float = -0.75,
    noise: float = 0.3,
) -> pd.DataFrame:
    """AR(2) target ``y`` plus ``noise_columns`` independent white-noise columns.

    Only the target's own lags carry signal; ``n0 .. n{k-1}`` are irrelevant.
    """
    rng = np.random.default_rng(seed)
    burn = 200
    e = noise * rng.standard_normal(n + burn)
    y = np.zeros(n + burn)
    for t in range(2, n + burn):
        y[t] = phi1 * y[t - 1] + phi2 * y[t - 2] + e[t]
    cols = {"t": np.arange(n), "y": y[burn:]}
    for k in range(noise_columns):
        cols[f"n{k}"] = rng.standard_normal(n)
    return pd.DataFrame(cols)


def write_csv(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.17g")
    return path
