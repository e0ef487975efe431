"""JSON schemas of the files written into a run directory."""
from __future__ import annotations

import jsonschema

SCHEMA_VERSION = 1

_num_list = {"type": "array", "items": {"type": "number"}}
_nullable_num = {"type": ["number", "null"]}

_split_metrics = {
    "type": "object",
    "required": ["per_step_rmse", "per_step_mae", "mean_rmse", "pooled_rmse", "mean_mae", "pooled_mae"],
    "properties": {
        "per_step_rmse": _num_list,
        "per_step_mae": _num_list,
        "mean_rmse": {"type": "number"},
        "pooled_rmse": {"type": "number"},
        "mean_mae": {"type": "number"},
        "pooled_mae": {"type": "number"},
    },
}

METRICS = {
    "type": "object",
    "required": ["schema_version", "train", "test", "overfitting_ratio", "front_size",
                 "selected_attributes", "hypervolume_final", "dm_vs_persistence"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "train": _split_metrics,
        "test": _split_metrics,
        "persistence_test": _split_metrics,
        "overfitting_ratio": {"type": "number"},
        "front_size": {"type": "integer", "minimum": 1},
        "selected_attributes": {"type": "number", "minimum": 0},
        "selected_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "hypervolume_final": {"type": "number", "minimum": 0},
        "dm_vs_persistence": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["step", "statistic", "p_value", "winner"],
                "properties": {
                    "step": {"type": "integer"},
                    "statistic": _nullable_num,
                    "p_value": {"type": "number", "minimum": 0, "maximum": 1},
                    "winner": {"enum": ["model-A", "model-B", "tie"]},
                },
            },
        },
    },
}

PARETO_FRONT = {
    "type": "object",
    "required": ["schema_version", "q", "hidden_units", "feature_names", "members"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "q": {"type": "integer", "minimum": 1},
        "hidden_units": {"type": "integer", "minimum": 1},
        "feature_names": {"type": "array", "items": {"type": "string"}},
        "members": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["mask", "weights", "objectives"],
                "properties": {
                    "mask": {"type": "array", "items": {"enum": [0, 1]}},
                    "weights": _num_list,
                    "objectives": _num_list,
                },
            },
        },
    },
}

ENSEMBLE = {
    "type": "object",
    "required": ["schema_version", "config", "q", "hidden_units", "models", "meta", "importance"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "q": {"type": "integer", "minimum": 1},
        "models": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "object", "required": ["mask", "weights"]},
        },
        "meta": {"type": "object", "required": ["kind"]},
        "importance": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
    },
}

MANIFEST = {
    "type": "object",
    "required": ["schema_version", "config", "seed", "versions", "outputs"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "config": {"type": "object"},
        "seed": {"type": "integer"},
        "versions": {"type": "object"},
        "outputs": {"type": "array", "items": {"type": "string"}},
    },
}

BY_FILE = {
    "metrics.json": METRICS,
    "pareto_front.json": PARETO_FRONT,
    "ensemble_model.json": ENSEMBLE,
    "run_manifest.json": MANIFEST,
}


def validate(name: str, document: dict) -> None:
    jsonschema.validate(document, BY_FILE[name])
