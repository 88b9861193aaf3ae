"""Minimal dense-network kernel with exact reverse-mode gradients.

Everything is float64 numpy. Layers are plain dataclasses holding their
parameters; forward passes return a cache that the matching backward pass
consumes. There is no computation graph: the supported family is stacks of
dense layers (relu or identity) with inverted dropout, plus embedding
lookups, which is all the model needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "identity")


class ShapeError(ValueError):
    """Input width does not match layer width."""


class NonFiniteError(FloatingPointError):
    """A forward or backward pass produced NaN/Inf."""


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"dense layer weight {self.weight.shape} / bias {self.bias.shape} mismatch"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def in_width(self) -> int:
        return self.weight.shape[1]

    @property
    def out_width(self) -> int:
        return self.weight.shape[0]


@dataclass
class Mlp:
    layers: list[DenseLayer]
    dropout_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_width != b.in_width:
                raise ShapeError(
                    f"layer widths do not chain: {a.out_width} -> {b.in_width}"
                )

    @property
    def in_width(self) -> int:
        return self.layers[0].in_width if self.layers else 0

    @property
    def out_width(self) -> int:
        return self.layers[-1].out_width if self.layers else 0


@dataclass
class EmbeddingTable:
    vectors: np.ndarray  # (cardinality, dim)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ShapeError("embedding table must be 2-D")

    @property
    def cardinality(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class LayerGrads:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class MlpCache:
    """Per-layer records needed to run the exact backward pass."""

    inputs: list[np.ndarray] = field(default_factory=list)
    pre_activations: list[np.ndarray] = field(default_factory=list)
    dropout_masks: list[np.ndarray | None] = field(default_factory=list)
    n_rows: int = 0


def _check_finite(arr: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values produced in {where}")


def dense_forward(layer: DenseLayer, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (post-activation output, pre-activation)."""
    if x.shape[1] != layer.in_width:
        raise ShapeError(f"input width {x.shape[1]} != layer width {layer.in_width}")
    z = x @ layer.weight.T + layer.bias
    if layer.activation == "relu":
        return np.maximum(z, 0.0), z
    return z, z


def mlp_forward(
    mlp: Mlp,
    batch: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, MlpCache]:
    """Forward pass through a layer stack.

    Dropout (inverted scaling) is applied to hidden-layer outputs in train
    mode only, so eval mode needs no rescaling and is fully deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be train or eval, got {mode!r}")
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError("batch must be 2-D (rows, features)")
    use_dropout = mode == "train" and mlp.dropout_rate > 0.0
    if use_dropout and rng is None:
        raise ValueError("train-mode dropout requires an rng")

    cache = MlpCache(n_rows=batch.shape[0])
    h = batch
    keep = 1.0 - mlp.dropout_rate
    for i, layer in enumerate(mlp.layers):
        cache.inputs.append(h)
        h, z = dense_forward(layer, h)
        cache.pre_activations.append(z)
        is_hidden = i < len(mlp.layers) - 1
        if use_dropout and is_hidden:
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
            cache.dropout_masks.append(mask)
        else:
            cache.dropout_masks.append(None)
    _check_finite(h, "mlp_forward")
    return h, cache


def mlp_backward(
    mlp: Mlp, cache: MlpCache, out_grad: np.ndarray
) -> tuple[list[LayerGrads], np.ndarray]:
    """Exact reverse-mode gradients for a matching forward call."""
    if len(cache.inputs) != len(mlp.layers):
        raise ValueError("cache does not match mlp (stale or wrong network)")
    out_grad = np.asarray(out_grad, dtype=np.float64)
    expected = (cache.n_rows, mlp.out_width) if mlp.layers else out_grad.shape
    if out_grad.shape != expected:
        raise ShapeError(f"out_grad shape {out_grad.shape} != {expected}")

    grads: list[LayerGrads] = [None] * len(mlp.layers)  # type: ignore[list-item]
    g = out_grad
    for i in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[i]
        mask = cache.dropout_masks[i]
        if mask is not None:
            g = g * mask
        if layer.activation == "relu":
            g = g * (cache.pre_activations[i] > 0.0)
        x = cache.inputs[i]
        grads[i] = LayerGrads(weight=g.T @ x, bias=g.sum(axis=0))
        g = g @ layer.weight
    _check_finite(g, "mlp_backward")
    return grads, g


def embedding_forward(table: EmbeddingTable, indices: np.ndarray) -> np.ndarray:
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= table.cardinality):
        raise IndexError(
            f"embedding index out of range for cardinality {table.cardinality}"
        )
    return table.vectors[indices]


def embedding_backward(
    table: EmbeddingTable, indices: np.ndarray, out_grad: np.ndarray
) -> np.ndarray:
    """Gradient w.r.t. the table; only looked-up rows accumulate."""
    grad = np.zeros_like(table.vectors)
    np.add.at(grad, np.asarray(indices), out_grad)
    return grad


def grad_check(loss_and_grad, params: list[np.ndarray], eps: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences.

    ``loss_and_grad(params) -> (loss, grads)`` must be deterministic across
    calls (eval mode, or replayed dropout masks). Returns the max over all
    parameter entries of ``|analytic - fd| / max(1, |fd|)``.
    """
    loss, analytic = loss_and_grad(params)
    if not np.isfinite(loss):
        raise NonFiniteError("loss is non-finite at the evaluation point")
    worst = 0.0
    for p, g in zip(params, analytic):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up, _ = loss_and_grad(params)
            flat[k] = orig - eps
            down, _ = loss_and_grad(params)
            flat[k] = orig
            fd = (up - down) / (2.0 * eps)
            err = abs(gflat[k] - fd) / max(1.0, abs(fd))
            worst = max(worst, err)
    return worst


def he_init(rng: np.random.Generator, out_width: int, in_width: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / max(in_width, 1)), size=(out_width, in_width))


def glorot_init(rng: np.random.Generator, out_width: int, in_width: int) -> np.ndarray:
    bound = np.sqrt(6.0 / max(in_width + out_width, 1))
    return rng.uniform(-bound, bound, size=(out_width, in_width))


RELU_BIAS_INIT = 0.01  # keeps units off the exact relu kink at init


def init_dense(rng: np.random.Generator, d_out: int, d_in: int, activation: str) -> DenseLayer:
    if activation == "relu":
        return DenseLayer(
            weight=he_init(rng, d_out, d_in),
            bias=np.full(d_out, RELU_BIAS_INIT),
            activation="relu",
        )
    return DenseLayer(
        weight=glorot_init(rng, d_out, d_in), bias=np.zeros(d_out), activation="identity"
    )


def init_mlp(
    rng: np.random.Generator,
    widths: list[int],
    dropout_rate: float = 0.0,
    hidden_activation: str = "relu",
) -> Mlp:
    """Build an Mlp from a width chain; final layer is always identity.

    Relu layers get He-scaled weights, identity layers Glorot-scaled.
    """
    layers = []
    for i, (d_in, d_out) in enumerate(zip(widths, widths[1:])):
        act = hidden_activation if i < len(widths) - 2 else "identity"
        layers.append(init_dense(rng, d_out, d_in, act))
    return Mlp(layers=layers, dropout_rate=dropout_rate)
