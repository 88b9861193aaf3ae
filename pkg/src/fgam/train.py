"""End-to-end optimization: splitting, mini-batch cross-entropy descent
with weight decay, and early stopping on validation loss.

Runs are fully reproducible from the seed: the split permutation, parameter
init, per-epoch shuffles, and dropout masks all derive from it, and batch
reductions happen in a fixed order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .model import FGamConfig, FGamParams, backward, forward, init_params
from .nn import NonFiniteError

PROB_EPS = 1e-12


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; aborts with the offending epoch/batch."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 1e-4
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    split_fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    optimizer: str = "adam"  # "adam" | "sgd"
    positive_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "split_fractions", tuple(self.split_fractions))
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be adam or sgd")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    valid_auroc: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    def epochs(self) -> range:
        return range(1, len(self.train_loss) + 1)


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray


def split(n_rows: int, fractions, seed: int) -> SplitIndices:
    """Seeded disjoint exhaustive partition with sizes within rounding."""
    if n_rows <= 0:
        raise ValueError("cannot split an empty dataset")
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("need three positive fractions (train, valid, test)")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions sum to {sum(fractions)}, expected 1")
    perm = np.random.default_rng(seed).permutation(n_rows)
    n_train = int(round(n_rows * fractions[0]))
    n_valid = int(round(n_rows * fractions[1]))
    n_valid = min(n_valid, n_rows - n_train)
    return SplitIndices(
        train=perm[:n_train],
        valid=perm[n_train : n_train + n_valid],
        test=perm[n_train + n_valid :],
    )


def cross_entropy(probabilities, labels) -> float:
    """Mean binary cross entropy; probabilities are clipped before the logs."""
    probabilities = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if probabilities.shape != labels.shape:
        raise ValueError("probabilities and labels differ in length")
    p = np.clip(probabilities, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


def apply_weight_decay(
    grads: dict[str, np.ndarray], params: FGamParams, decay: float
) -> dict[str, np.ndarray]:
    """L2 shrinkage folded into the gradient: g + decay * theta, every
    trainable parameter (embeddings included)."""
    if decay == 0.0:
        return grads
    out = dict(grads)
    for name, value in params.named_parameters(trainable_only=True):
        out[name] = grads[name] + decay * value
    return out


class SgdOptimizer:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, named_params, grads: dict[str, np.ndarray]) -> None:
        for name, value in named_params:
            value -= self.learning_rate * grads[name]


class AdamOptimizer:
    """Adaptive-moment descent, standard defaults, deterministic updates."""

    def __init__(self, learning_rate: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, named_params, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, value in named_params:
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(value))
            v = self.v.setdefault(name, np.zeros_like(value))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            value -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd":
        return SgdOptimizer(config.learning_rate)
    return AdamOptimizer(config.learning_rate)


def clone_params(params: FGamParams) -> FGamParams:
    import copy

    return copy.deepcopy(params)


@dataclass
class TrainResult:
    params: FGamParams
    history: TrainHistory


def _sample_weights(labels: np.ndarray, positive_weight: float) -> np.ndarray | None:
    if positive_weight == 1.0:
        return None
    return np.where(labels > 0.5, positive_weight, 1.0)


def train_arrays(
    x_static: np.ndarray,
    x_tv: np.ndarray,
    labels: np.ndarray,
    x_static_valid: np.ndarray,
    x_tv_valid: np.ndarray,
    labels_valid: np.ndarray,
    model_config: FGamConfig,
    config: TrainConfig,
) -> TrainResult:
    """Optimize on pre-split, pre-standardized arrays.

    Monitors validation cross entropy; returns the best-validation
    parameters. The test split never enters here.
    """
    n = labels.shape[0]
    if n == 0 or labels_valid.shape[0] == 0:
        raise ValueError("empty train or validation split")
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    labels_valid = np.asarray(labels_valid, dtype=np.float64).reshape(-1)

    params = init_params(model_config, np.random.default_rng([config.seed, 0xA11CE]))
    optimizer = make_optimizer(config)
    weights = _sample_weights(labels, config.positive_weight)

    history = TrainHistory()
    best_loss = np.inf
    best_params = clone_params(params)
    best_epoch = 0
    bad_epochs = 0

    for epoch in range(1, config.max_epochs + 1):
        rng = np.random.default_rng([config.seed, 0xE9, epoch])
        order = rng.permutation(n)
        total_loss, total_rows = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch_weights = weights[idx] if weights is not None else None
            try:
                loss, grads = backward(
                    params,
                    x_static[idx],
                    x_tv[idx],
                    labels[idx],
                    mode="train",
                    rng=rng,
                    sample_weight=batch_weights,
                )
            except NonFiniteError as exc:
                raise TrainingDiverged(
                    f"diverged at epoch {epoch}, batch row {start}: {exc}"
                ) from exc
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch row {start}"
                )
            grads = apply_weight_decay(grads, params, config.weight_decay)
            optimizer.step(params.named_parameters(trainable_only=True), grads)
            total_loss += loss * idx.size
            total_rows += idx.size

        try:
            valid_probs = forward(params, x_static_valid, x_tv_valid)
        except NonFiniteError as exc:
            raise TrainingDiverged(f"diverged at epoch {epoch} validation: {exc}") from exc
        valid_loss = cross_entropy(valid_probs, labels_valid)
        if not np.isfinite(valid_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        try:
            valid_auroc = metrics.auroc(valid_probs, labels_valid)
        except metrics.SingleClassError:
            valid_auroc = float("nan")

        history.train_loss.append(total_loss / total_rows)
        history.valid_loss.append(valid_loss)
        history.valid_auroc.append(valid_auroc)
        history.stopped_epoch = epoch

        if valid_loss < best_loss:
            best_loss = valid_loss
            best_params = clone_params(params)
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break

    history.best_epoch = best_epoch if best_epoch else 1
    return TrainResult(params=best_params, history=history)


def write_history(history: TrainHistory, path: str | Path) -> Path:
    """One CSV record per epoch: epoch, train_loss, valid_loss, valid_auroc."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "valid_loss", "valid_auroc"])
        for i, epoch in enumerate(history.epochs()):
            writer.writerow(
                [
                    epoch,
                    repr(history.train_loss[i]),
                    repr(history.valid_loss[i]),
                    repr(history.valid_auroc[i]),
                ]
            )
    return path
