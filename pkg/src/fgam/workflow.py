"""High-level flows shared by the CLI: dataset -> trained bundle -> report."""

from __future__ import annotations

import numpy as np

from . import metrics
from .model import forward
from .persistence import ModelBundle, bundle_from_prepared
from .pipeline import PreparedDataset, TabularDataset, prepare
from .train import TrainConfig, TrainHistory, train_arrays


def train_prepared(
    prepared: PreparedDataset,
    train_config: TrainConfig,
    **model_overrides,
) -> tuple[ModelBundle, TrainHistory]:
    """Train on the prepared splits; test rows are never touched here."""
    config = prepared.model_config(**model_overrides)
    xs_tr, xt_tr, y_tr = prepared.block(prepared.split.train)
    xs_va, xt_va, y_va = prepared.block(prepared.split.valid)
    result = train_arrays(
        xs_tr, xt_tr, y_tr, xs_va, xt_va, y_va, config, train_config
    )
    return bundle_from_prepared(result.params, prepared), result.history


def train_dataset(
    dataset: TabularDataset,
    train_config: TrainConfig,
    rare_min_count: int = 2,
    **model_overrides,
) -> tuple[ModelBundle, TrainHistory, PreparedDataset]:
    prepared = prepare(
        dataset,
        fractions=train_config.split_fractions,
        seed=train_config.seed,
        rare_min_count=rare_min_count,
    )
    bundle, history = train_prepared(prepared, train_config, **model_overrides)
    return bundle, history, prepared


def score_split(bundle: ModelBundle, prepared: PreparedDataset, which: str = "test"):
    indices = getattr(prepared.split, which)
    xs, xt, y = prepared.block(indices)
    return forward(bundle.params, xs, xt), y


def evaluate_split(
    bundle: ModelBundle, prepared: PreparedDataset, which: str = "test"
) -> metrics.EvalReport:
    scores, labels = score_split(bundle, prepared, which)
    return metrics.evaluate(scores, labels)
