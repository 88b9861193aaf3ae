"""Factored additive risk model.

The logit is a sum of per-feature contributions ``w_t(static) * f_t(x_t)``
plus a static-conditioned bias ``w_0(static)``. Each time-varying feature
has its own deep-and-narrow shape network ``f_t``; the weights ``w_t`` and
the bias come from two linear heads on a shared trunk over the (embedded)
static features. The sigmoid of the logit is the predicted probability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .nn import (
    DenseLayer,
    EmbeddingTable,
    Mlp,
    MlpCache,
    ShapeError,
    embedding_backward,
    embedding_forward,
    glorot_init,
    init_dense,
    init_mlp,
    mlp_backward,
    mlp_forward,
)

PROB_EPS = 1e-12


@dataclass(frozen=True)
class FGamConfig:
    """Architecture hyperparameters, shared across all shape networks.

    ``static_cardinalities`` has one entry per static feature: ``None`` for
    numeric columns, the embedding-table size for categorical ones.
    """

    static_cardinalities: tuple[int | None, ...]
    d_tv: int
    dnnn_depth: int = 4
    dnnn_width: int = 8
    trunk_widths: tuple[int, ...] = (64, 32)
    embedding_dim: int = 4
    dropout_rate: float = 0.1
    identity_features: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "static_cardinalities", tuple(self.static_cardinalities)
        )
        object.__setattr__(self, "trunk_widths", tuple(self.trunk_widths))
        if self.d_tv < 0:
            raise ValueError("d_tv must be >= 0")
        if self.d_tv == 0 and self.d_static == 0:
            raise ValueError("model needs at least one static or time-varying feature")
        for card in self.static_cardinalities:
            if card is not None and card < 1:
                raise ValueError("categorical cardinality must be >= 1")

    @property
    def d_static(self) -> int:
        return len(self.static_cardinalities)

    @property
    def trunk_in_width(self) -> int:
        width = 0
        for card in self.static_cardinalities:
            width += self.embedding_dim if card is not None else 1
        return width

    @property
    def trunk_out_width(self) -> int:
        if self.d_static == 0:
            return 0
        return self.trunk_widths[-1] if self.trunk_widths else self.trunk_in_width


@dataclass
class FGamParams:
    config: FGamConfig
    shape_nets: list[Mlp]
    embeddings: dict[int, EmbeddingTable]
    trunk: Mlp
    weight_head: DenseLayer
    bias_head: DenseLayer

    def named_parameters(self, trainable_only: bool = False):
        """Yield (name, array) in a fixed canonical order."""
        if not (trainable_only and self.config.identity_features):
            for t, net in enumerate(self.shape_nets):
                for i, layer in enumerate(net.layers):
                    yield f"shape_net.{t}.layer.{i}.weight", layer.weight
                    yield f"shape_net.{t}.layer.{i}.bias", layer.bias
        for j in sorted(self.embeddings):
            yield f"embedding.{j}", self.embeddings[j].vectors
        for i, layer in enumerate(self.trunk.layers):
            yield f"trunk.layer.{i}.weight", layer.weight
            yield f"trunk.layer.{i}.bias", layer.bias
        yield "weight_head.weight", self.weight_head.weight
        yield "weight_head.bias", self.weight_head.bias
        yield "bias_head.weight", self.bias_head.weight
        yield "bias_head.bias", self.bias_head.bias

    def parameter_count(self) -> int:
        return sum(arr.size for _, arr in self.named_parameters())


@dataclass
class ContributionReport:
    """Exact additive decomposition of one prediction."""

    bias: float
    contributions: np.ndarray  # (d_tv,) w_t * f_t
    logit: float
    probability: float
    weights: np.ndarray  # (d_tv,) w_t(static)
    shape_outputs: np.ndarray  # (d_tv,) f_t(x_t)


@dataclass
class ForwardCache:
    trunk_in: np.ndarray
    trunk_cache: MlpCache
    penultimate: np.ndarray
    weights: np.ndarray  # (n, d_tv)
    bias: np.ndarray  # (n,)
    shape_outputs: np.ndarray  # (n, d_tv)
    shape_caches: list[MlpCache]
    cat_codes: dict[int, np.ndarray]
    cat_slices: dict[int, slice]
    logits: np.ndarray
    probabilities: np.ndarray


def init_params(config: FGamConfig, seed: int | np.random.Generator = 0) -> FGamParams:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    shape_nets = []
    for _ in range(config.d_tv):
        if config.identity_features:
            net = Mlp([DenseLayer(np.array([[1.0]]), np.array([0.0]), "identity")])
        else:
            widths = [1] + [config.dnnn_width] * config.dnnn_depth + [1]
            net = init_mlp(rng, widths, dropout_rate=config.dropout_rate)
        shape_nets.append(net)

    embeddings = {}
    for j, card in enumerate(config.static_cardinalities):
        if card is not None:
            vectors = rng.normal(0.0, 0.1, size=(card, config.embedding_dim))
            embeddings[j] = EmbeddingTable(vectors)

    trunk_layers = []
    if config.d_static > 0:
        d_in = config.trunk_in_width
        for d_out in config.trunk_widths:
            trunk_layers.append(init_dense(rng, d_out, d_in, "relu"))
            d_in = d_out
    trunk = Mlp(trunk_layers, dropout_rate=config.dropout_rate)

    t_out = config.trunk_out_width
    weight_head = DenseLayer(
        glorot_init(rng, config.d_tv, t_out), np.zeros(config.d_tv), "identity"
    )
    bias_head = DenseLayer(glorot_init(rng, 1, t_out), np.zeros(1), "identity")
    return FGamParams(config, shape_nets, embeddings, trunk, weight_head, bias_head)


def make_degenerate(config: FGamConfig, seed: int = 0) -> FGamParams:
    """Parameters for the reduced configurations.

    With no static features the weights and bias collapse to learnable
    scalars (the head biases); with no time-varying features the model is a
    plain network over statics routed through the bias head alone.
    """
    if config.d_static > 0 and config.d_tv > 0:
        raise ValueError("degenerate configuration requires d_static=0 or d_tv=0")
    return init_params(config, seed)


def _as_batch(x: np.ndarray, width: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ShapeError(f"{what} must have {width} columns, got shape {arr.shape}")
    return arr


def _trunk_input(params: FGamParams, x_static: np.ndarray):
    config = params.config
    n = x_static.shape[0]
    cols, cat_codes, cat_slices = [], {}, {}
    offset = 0
    for j, card in enumerate(config.static_cardinalities):
        if card is None:
            cols.append(x_static[:, j : j + 1])
            offset += 1
        else:
            raw = x_static[:, j]
            codes = raw.astype(np.int64)
            if np.any(codes != raw):
                raise ValueError(f"static column {j}: category codes must be integers")
            if codes.size and (codes.min() < 0 or codes.max() >= card):
                raise ValueError(
                    f"static column {j}: category code out of range [0, {card})"
                )
            cols.append(embedding_forward(params.embeddings[j], codes))
            cat_codes[j] = codes
            cat_slices[j] = slice(offset, offset + config.embedding_dim)
            offset += config.embedding_dim
    trunk_in = np.concatenate(cols, axis=1) if cols else np.zeros((n, 0))
    return trunk_in, cat_codes, cat_slices


def forward_full(
    params: FGamParams,
    x_static: np.ndarray,
    x_tv: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> ForwardCache:
    config = params.config
    x_static = _as_batch(x_static, config.d_static, "x_static")
    x_tv = _as_batch(x_tv, config.d_tv, "x_tv")
    if x_static.shape[0] != x_tv.shape[0]:
        raise ShapeError("static and time-varying blocks disagree on row count")
    n = x_static.shape[0]

    trunk_in, cat_codes, cat_slices = _trunk_input(params, x_static)
    penultimate, trunk_cache = mlp_forward(params.trunk, trunk_in, mode, rng)
    weights = penultimate @ params.weight_head.weight.T + params.weight_head.bias
    bias = (penultimate @ params.bias_head.weight.T + params.bias_head.bias)[:, 0]

    shape_cols, shape_caches = [], []
    for t, net in enumerate(params.shape_nets):
        out, cache = mlp_forward(net, x_tv[:, t : t + 1], mode, rng)
        shape_cols.append(out)
        shape_caches.append(cache)
    shape_outputs = (
        np.concatenate(shape_cols, axis=1) if shape_cols else np.zeros((n, 0))
    )

    logits = bias + (weights * shape_outputs).sum(axis=1)
    return ForwardCache(
        trunk_in=trunk_in,
        trunk_cache=trunk_cache,
        penultimate=penultimate,
        weights=weights,
        bias=bias,
        shape_outputs=shape_outputs,
        shape_caches=shape_caches,
        cat_codes=cat_codes,
        cat_slices=cat_slices,
        logits=logits,
        probabilities=expit(logits),
    )


def forward(
    params: FGamParams,
    x_static: np.ndarray,
    x_tv: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Predicted probabilities, one per row."""
    return forward_full(params, x_static, x_tv, mode, rng).probabilities


def contributions(
    params: FGamParams, x_static: np.ndarray, x_tv: np.ndarray
) -> ContributionReport:
    """Decompose a single prediction into bias plus per-feature terms."""
    cache = forward_full(params, x_static, x_tv, mode="eval")
    if cache.logits.shape[0] != 1:
        raise ShapeError("contributions() takes a single example")
    contribs = cache.weights[0] * cache.shape_outputs[0]
    bias = float(cache.bias[0])
    logit = bias + float(contribs.sum())
    return ContributionReport(
        bias=bias,
        contributions=contribs,
        logit=logit,
        probability=float(expit(logit)),
        weights=cache.weights[0].copy(),
        shape_outputs=cache.shape_outputs[0].copy(),
    )


def contribution_curve(
    params: FGamParams,
    x_static: np.ndarray,
    x_tv: np.ndarray,
    t: int,
    grid: np.ndarray,
) -> list[tuple[float, float]]:
    """Sweep feature ``t`` over ``grid`` with everything else held fixed.

    Returns (grid value, contribution) pairs; the static-conditioned weight
    is computed once, so the sweep only re-evaluates the shape network.
    """
    if not 0 <= t < params.config.d_tv:
        raise IndexError(f"time-varying feature index {t} out of range")
    cache = forward_full(params, x_static, x_tv, mode="eval")
    if cache.logits.shape[0] != 1:
        raise ShapeError("contribution_curve() takes a single example")
    w_t = cache.weights[0, t]
    grid = np.asarray(grid, dtype=np.float64).reshape(-1, 1)
    f_vals, _ = mlp_forward(params.shape_nets[t], grid, mode="eval")
    return [(float(g), float(w_t * f)) for g, f in zip(grid[:, 0], f_vals[:, 0])]


def shape_values_at(params: FGamParams, values: np.ndarray) -> np.ndarray:
    """Evaluate every shape network at the given per-feature inputs."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    out = np.zeros(params.config.d_tv)
    for t, net in enumerate(params.shape_nets):
        y, _ = mlp_forward(net, np.array([[values[t]]]), mode="eval")
        out[t] = y[0, 0]
    return out


def display_centering(params: FGamParams, report: ContributionReport) -> dict:
    """Offset contributions so the train-mean input contributes zero.

    Inputs are standardized, so the training mean of every time-varying
    feature sits at 0; the folded-out terms move into the displayed bias,
    which then reads as the risk before any time-varying data arrives.
    """
    f_at_mean = shape_values_at(params, np.zeros(params.config.d_tv))
    ref = report.weights * f_at_mean
    return {
        "bias": report.bias + float(ref.sum()),
        "contributions": report.contributions - ref,
    }


def cross_entropy_grad(probabilities: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(logit) for a sigmoid output: (p - y) / n."""
    return (probabilities - labels) / labels.shape[0]


def backward(
    params: FGamParams,
    x_static: np.ndarray,
    x_tv: np.ndarray,
    labels: np.ndarray,
    mode: str = "train",
    rng: np.random.Generator | None = None,
    sample_weight: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy loss and its exact parameter gradients.

    ``sample_weight`` reweights rows (e.g. a positive-class weight); the
    loss is then the weight-normalized mean.
    """
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    cache = forward_full(params, x_static, x_tv, mode, rng)
    if labels.shape[0] != cache.logits.shape[0]:
        raise ShapeError("labels length does not match batch")
    p = np.clip(cache.probabilities, PROB_EPS, 1.0 - PROB_EPS)
    per_row = -(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))
    if sample_weight is None:
        loss = float(np.mean(per_row))
        dlogit = cross_entropy_grad(cache.probabilities, labels)
    else:
        w = np.asarray(sample_weight, dtype=np.float64).reshape(-1)
        w_total = w.sum()
        loss = float((w * per_row).sum() / w_total)
        dlogit = w * (cache.probabilities - labels) / w_total
    grads: dict[str, np.ndarray] = {}

    d_shape = dlogit[:, None] * cache.weights
    for t, net in enumerate(params.shape_nets):
        layer_grads, _ = mlp_backward(net, cache.shape_caches[t], d_shape[:, t : t + 1])
        for i, lg in enumerate(layer_grads):
            grads[f"shape_net.{t}.layer.{i}.weight"] = lg.weight
            grads[f"shape_net.{t}.layer.{i}.bias"] = lg.bias

    d_weights = dlogit[:, None] * cache.shape_outputs
    d_bias = dlogit[:, None]
    grads["weight_head.weight"] = d_weights.T @ cache.penultimate
    grads["weight_head.bias"] = d_weights.sum(axis=0)
    grads["bias_head.weight"] = d_bias.T @ cache.penultimate
    grads["bias_head.bias"] = d_bias.sum(axis=0)

    d_penultimate = d_weights @ params.weight_head.weight
    d_penultimate += d_bias @ params.bias_head.weight
    trunk_grads, d_trunk_in = mlp_backward(params.trunk, cache.trunk_cache, d_penultimate)
    for i, lg in enumerate(trunk_grads):
        grads[f"trunk.layer.{i}.weight"] = lg.weight
        grads[f"trunk.layer.{i}.bias"] = lg.bias

    for j, codes in cache.cat_codes.items():
        grads[f"embedding.{j}"] = embedding_backward(
            params.embeddings[j], codes, d_trunk_in[:, cache.cat_slices[j]]
        )
    return loss, grads
