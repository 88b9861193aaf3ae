"""Versioned model file: config, schema fingerprint, standardization
statistics, and every parameter array as decimal literals.

JSON floats are written via repr, which round-trips float64 exactly, so a
saved and reloaded model reproduces forward outputs bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import FGamConfig, FGamParams
from .nn import DenseLayer, EmbeddingTable, Mlp
from .pipeline import PreparedDataset, StandardizationStats
from .schema import FeatureSchema

MODEL_FORMAT = "fgam-model"
MODEL_FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


def _mlp_to_dict(mlp: Mlp) -> dict:
    return {
        "dropout_rate": mlp.dropout_rate,
        "layers": [
            {
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in mlp.layers
        ],
    }


def _mlp_from_dict(payload: dict) -> Mlp:
    return Mlp(
        layers=[
            DenseLayer(
                weight=np.asarray(l["weight"], dtype=np.float64),
                bias=np.asarray(l["bias"], dtype=np.float64),
                activation=l["activation"],
            )
            for l in payload["layers"]
        ],
        dropout_rate=payload["dropout_rate"],
    )


def _config_to_dict(config: FGamConfig) -> dict:
    return {
        "static_cardinalities": list(config.static_cardinalities),
        "d_tv": config.d_tv,
        "dnnn_depth": config.dnnn_depth,
        "dnnn_width": config.dnnn_width,
        "trunk_widths": list(config.trunk_widths),
        "embedding_dim": config.embedding_dim,
        "dropout_rate": config.dropout_rate,
        "identity_features": config.identity_features,
    }


def _config_from_dict(payload: dict) -> FGamConfig:
    return FGamConfig(
        static_cardinalities=tuple(
            None if c is None else int(c) for c in payload["static_cardinalities"]
        ),
        d_tv=payload["d_tv"],
        dnnn_depth=payload["dnnn_depth"],
        dnnn_width=payload["dnnn_width"],
        trunk_widths=tuple(payload["trunk_widths"]),
        embedding_dim=payload["embedding_dim"],
        dropout_rate=payload["dropout_rate"],
        identity_features=payload["identity_features"],
    )


@dataclass
class ModelBundle:
    """Everything the CLI and service need to score raw payloads."""

    params: FGamParams
    schema: FeatureSchema
    stats: StandardizationStats
    static_names: list[str]
    tv_names: list[str]
    version_hash: str = ""

    @property
    def config(self) -> FGamConfig:
        return self.params.config


def bundle_from_prepared(params: FGamParams, prepared: PreparedDataset) -> ModelBundle:
    return ModelBundle(
        params=params,
        schema=prepared.schema,
        stats=prepared.stats,
        static_names=prepared.static_names,
        tv_names=prepared.tv_names,
    )


def save_model(bundle: ModelBundle, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    params = bundle.params
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "config": _config_to_dict(params.config),
        "schema": bundle.schema.to_dict(),
        "schema_fingerprint": bundle.schema.fingerprint(),
        "stats": bundle.stats.to_dict(),
        "static_names": bundle.static_names,
        "tv_names": bundle.tv_names,
        "params": {
            "shape_nets": [_mlp_to_dict(net) for net in params.shape_nets],
            "embeddings": {
                str(j): table.vectors.tolist()
                for j, table in sorted(params.embeddings.items())
            },
            "trunk": _mlp_to_dict(params.trunk),
            "weight_head": {
                "weight": params.weight_head.weight.tolist(),
                "bias": params.weight_head.bias.tolist(),
            },
            "bias_head": {
                "weight": params.bias_head.weight.tolist(),
                "bias": params.bias_head.bias.tolist(),
            },
        },
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    path.write_text(text)
    bundle.version_hash = hashlib.sha256(text.encode()).hexdigest()[:16]
    return path


def load_model(path: str | Path) -> ModelBundle:
    path = Path(path)
    text = path.read_text()
    payload = json.loads(text)
    if payload.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"{path}: not a model file")
    if payload.get("version") != MODEL_FORMAT_VERSION:
        raise ModelFileError(f"{path}: unsupported model version {payload.get('version')}")
    config = _config_from_dict(payload["config"])
    p = payload["params"]

    def head(d, width):
        w = np.asarray(d["weight"], dtype=np.float64).reshape(width, -1)
        if w.size == 0:
            w = w.reshape(width, 0)
        return DenseLayer(w, np.asarray(d["bias"], dtype=np.float64), "identity")

    params = FGamParams(
        config=config,
        shape_nets=[_mlp_from_dict(net) for net in p["shape_nets"]],
        embeddings={
            int(j): EmbeddingTable(np.asarray(vecs, dtype=np.float64))
            for j, vecs in p["embeddings"].items()
        },
        trunk=_mlp_from_dict(p["trunk"]),
        weight_head=head(p["weight_head"], config.d_tv),
        bias_head=head(p["bias_head"], 1),
    )
    schema = FeatureSchema.from_dict(payload["schema"])
    if payload.get("schema_fingerprint") != schema.fingerprint():
        raise ModelFileError(f"{path}: schema fingerprint mismatch")
    return ModelBundle(
        params=params,
        schema=schema,
        stats=StandardizationStats.from_dict(payload["stats"]),
        static_names=payload["static_names"],
        tv_names=payload["tv_names"],
        version_hash=hashlib.sha256(text.encode()).hexdigest()[:16],
    )


class PayloadError(ValueError):
    """Raw payload fails validation; ``problems`` maps field -> message."""

    def __init__(self, problems: dict[str, str]):
        super().__init__("; ".join(f"{k}: {v}" for k, v in sorted(problems.items())))
        self.problems = problems


class UnknownLevelError(ValueError):
    def __init__(self, feature: str, value: str):
        super().__init__(f"{feature}: unknown categorical level {value!r}")
        self.feature = feature
        self.value = value


def encode_payload(
    bundle: ModelBundle,
    payload: dict,
    strict_categories: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Standardize a raw-unit payload into one (static, time-varying) row.

    Values may be null to take the missing pathway (train-median impute);
    unseen categorical levels map to the reserved unknown code unless
    ``strict_categories`` rejects them.
    """
    if not isinstance(payload, dict):
        raise PayloadError({"payload": "body must be a JSON object of feature values"})
    problems: dict[str, str] = {}
    base_names = {f.name for f in bundle.schema.all_features()}
    for key in payload:
        if key not in base_names:
            problems[key] = "unknown feature"

    values: dict[str, float] = {}
    for spec in bundle.schema.all_features():
        name = spec.name
        if name in bundle.stats.categorical:
            vocab = bundle.stats.categorical[name]
            if name not in payload:
                problems[name] = "missing required feature"
                continue
            raw = payload[name]
            if raw is None:
                values[name] = float(vocab.unknown_code)
                continue
            if not isinstance(raw, str):
                problems[name] = "categorical value must be a string"
                continue
            code = vocab.encode(raw)
            if code == vocab.unknown_code and raw not in vocab.held_out:
                if strict_categories:
                    raise UnknownLevelError(name, raw)
            values[name] = float(code)
            continue
        if name not in bundle.stats.numeric:
            continue  # dropped constant column
        s = bundle.stats.numeric[name]
        if name not in payload:
            problems[name] = "missing required feature"
            continue
        raw = payload[name]
        if raw is None:
            values[name] = (s.median - s.mean) / s.std
            values[f"{name}__was_missing"] = 1.0
            continue
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            problems[name] = "numeric value required"
            continue
        if not np.isfinite(raw):
            problems[name] = "value must be finite"
            continue
        values[name] = (float(raw) - s.mean) / s.std
    if problems:
        raise PayloadError(problems)

    def row(names: list[str]) -> np.ndarray:
        out = np.zeros(len(names))
        for i, name in enumerate(names):
            if name.endswith("_missing") and name not in base_names:
                base = name[: -len("_missing")]
                ind = bundle.stats.numeric[name]
                flag = values.get(f"{base}__was_missing", 0.0)
                out[i] = (flag - ind.mean) / ind.std
            else:
                out[i] = values[name]
        return out

    return row(bundle.static_names), row(bundle.tv_names)


def feature_means_payload(bundle: ModelBundle) -> dict:
    """A baseline payload: train means for numerics, modal level for
    categoricals."""
    out = {}
    for spec in bundle.schema.all_features():
        if spec.name in bundle.stats.categorical:
            vocab = bundle.stats.categorical[spec.name]
            out[spec.name] = vocab.levels[0] if vocab.levels else None
        elif spec.name in bundle.stats.numeric:
            out[spec.name] = bundle.stats.numeric[spec.name].mean
    return out
