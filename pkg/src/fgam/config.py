"""Run configuration: one nested key-value file (YAML), deep-merged over
printable defaults."""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .train import TrainConfig

DEFAULT_CONFIG: dict = {
    "data": {
        "source": "synthetic",  # synthetic | tabular | cases
        "path": None,  # combined tabular csv (source=tabular)
        "base_path": None,  # per-case csv (source=cases)
        "timeseries_path": None,  # long-format series csv (source=cases)
        "schema_path": None,
        "cache_path": "dataset_cache.json",
        "rare_min_count": 2,
        "synthetic": {
            "kind": "interaction",  # interaction | constant_weight
            "n": 20000,
            "prevalence": 0.06,
        },
    },
    "model": {
        "dnnn_depth": 4,
        "dnnn_width": 8,
        "trunk_widths": [64, 32],
        "embedding_dim": 4,
        "dropout_rate": 0.1,
        "identity_features": False,
    },
    "train": {
        "learning_rate": 0.01,
        "weight_decay": 1.0e-4,
        "batch_size": 256,
        "max_epochs": 200,
        "patience": 10,
        "seed": 0,
        "split_fractions": [0.7, 0.1, 0.2],
        "optimizer": "adam",
        "positive_weight": 1.0,
    },
    "outputs": {
        "dir": "fgam_run",
    },
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    payload = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: config must be a mapping")
    unknown = set(payload) - set(DEFAULT_CONFIG)
    if unknown:
        raise ValueError(f"{path}: unknown config section(s) {sorted(unknown)}")
    return _deep_merge(DEFAULT_CONFIG, payload)


def default_config_yaml() -> str:
    return yaml.safe_dump(DEFAULT_CONFIG, sort_keys=False)


def train_config_from(config: dict, seed: int | None = None) -> TrainConfig:
    section = config["train"]
    return TrainConfig(
        learning_rate=float(section["learning_rate"]),
        weight_decay=float(section["weight_decay"]),
        batch_size=int(section["batch_size"]),
        max_epochs=int(section["max_epochs"]),
        patience=int(section["patience"]),
        seed=int(seed if seed is not None else section["seed"]),
        split_fractions=tuple(section["split_fractions"]),
        optimizer=section["optimizer"],
        positive_weight=float(section["positive_weight"]),
    )


def model_overrides_from(config: dict) -> dict:
    section = config["model"]
    return {
        "dnnn_depth": int(section["dnnn_depth"]),
        "dnnn_width": int(section["dnnn_width"]),
        "trunk_widths": tuple(section["trunk_widths"]),
        "embedding_dim": int(section["embedding_dim"]),
        "dropout_rate": float(section["dropout_rate"]),
        "identity_features": bool(section["identity_features"]),
    }
