"""Run configuration: flat ``key = value`` files with command-line overrides."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .data import NORM_MODES
from .errors import UsageError
from .moea import THREADS_ENV, MoeaConfig

META_KINDS = ("random_forest", "ols")


@dataclass
class RunConfig:
    data: str = ""
    target: str = ""
    timestamp_column: str = ""
    delimiter: str = ","
    missing_sentinel: float = -200.0
    include_target_lags: bool = True
    window: int = 3
    test_fraction: float = 0.2
    n_partitions: int = 5
    hidden_units: int = 2
    population_size: int = 50
    generations: int = 100
    crossover_prob: float = 1.0
    mutation_prob: float = 1.0
    seed: int = 0
    sbx_eta: float = 15.0
    pm_eta: float = 20.0
    sbx_gene_prob: float = 0.5
    weight_low: float = -5.0
    weight_high: float = 5.0
    meta_learner: str = "random_forest"
    forest_trees: int = 100
    forest_mtry: int = 0
    forest_min_leaf: int = 5
    horizon: int = 3
    norm_mode: str = "paper"
    alpha: float = 0.05
    log_interval: int = 100
    output: str = "run_output"

    def validate(self) -> None:
        """Reject every precondition violation; touches no files."""
        if not self.data:
            raise UsageError("config: 'data' (CSV path) is required")
        if not self.target:
            raise UsageError("config: 'target' column is required")
        if self.window < 1:
            raise UsageError(f"config: window must be >= 1, got {self.window}")
        if not 0.0 < self.test_fraction < 1.0:
            raise UsageError(f"config: test_fraction must lie in (0, 1), got {self.test_fraction}")
        if self.n_partitions < 2:
            raise UsageError(f"config: n_partitions must be >= 2, got {self.n_partitions}")
        if self.horizon < 1:
            raise UsageError(f"config: horizon must be >= 1, got {self.horizon}")
        if self.norm_mode not in NORM_MODES:
            raise UsageError(f"config: norm_mode must be one of {NORM_MODES}, got {self.norm_mode!r}")
        if self.meta_learner not in META_KINDS:
            raise UsageError(f"config: meta_learner must be one of {META_KINDS}")
        if self.forest_trees < 1 or self.forest_min_leaf < 1 or self.forest_mtry < 0:
            raise UsageError("config: forest_trees and forest_min_leaf must be >= 1, forest_mtry >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise UsageError(f"config: alpha must lie in (0, 1), got {self.alpha}")
        if self.log_interval < 0:
            raise UsageError("config: log_interval must be >= 0")
        self.moea_config().validate(self.n_partitions)

    def moea_config(self) -> MoeaConfig:
        return MoeaConfig(
            population_size=self.population_size,
            generations=self.generations,
            crossover_prob=self.crossover_prob,
            mutation_prob=self.mutation_prob,
            n_objectives=self.n_partitions,
            seed=self.seed,
            sbx_eta=self.sbx_eta,
            pm_eta=self.pm_eta,
            real_bounds=(self.weight_low, self.weight_high),
            hidden_units=self.hidden_units,
            sbx_gene_prob=self.sbx_gene_prob,
            log_interval=self.log_interval,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def thread_count() -> int:
    env = os.environ.get(THREADS_ENV, "").strip()
    return max(1, int(env)) if env else 1


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def coerce(key: str, raw) -> object:
    """Convert a textual value to the type of RunConfig field ``key``."""
    if key not in _FIELD_TYPES:
        raise UsageError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return raw
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError as exc:
        raise UsageError(f"config key {key!r}: cannot parse {raw!r} as {kind}") from exc
    return text


def parse_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = coerce(key, value)
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if path is not None:
        base = Path(path)
        if not base.is_file():
            raise UsageError(f"config file {base} not found")
        values = parse_text(base.read_text())
        # relative data paths resolve against the config file's directory
        data = values.get("data")
        if data and not Path(data).is_absolute() and not Path(data).exists():
            candidate = base.parent / data
            if candidate.exists():
                values["data"] = str(candidate)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = coerce(key, value)
    return RunConfig(**values)


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())
