"""Synthetic tabular generator with a known factored ground truth.

Each generated row draws static features from declared mixtures and
time-varying features from per-feature mixtures; the label is Bernoulli of
a sigmoid score built from closed-form shape functions and static-dependent
weight functions. The truth object keeps every ingredient so tests can
score any model against the generating process itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .pipeline import TabularDataset
from .schema import STATIC, TIME_VARYING, FeatureSchema, FeatureSpec

SHAPE_FAMILIES = ("quadratic", "sigmoid_bump", "piecewise_linear", "monotone")
WEIGHT_KINDS = ("constant", "linear", "relu")


@dataclass(frozen=True)
class GaussianMixture:
    means: tuple[float, ...]
    sds: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if not len(self.means) == len(self.sds) == len(self.weights):
            raise ValueError("mixture components disagree in length")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        w = np.asarray(self.weights, dtype=np.float64)
        comp = rng.choice(len(w), size=n, p=w / w.sum())
        return rng.normal(np.take(self.means, comp), np.take(self.sds, comp))

    def to_dict(self):
        return {"means": list(self.means), "sds": list(self.sds), "weights": list(self.weights)}


@dataclass(frozen=True)
class StaticSpec:
    name: str
    kind: str = "numeric"  # numeric | categorical
    dist: GaussianMixture | None = None
    levels: tuple[str, ...] = ()
    level_probs: tuple[float, ...] = ()

    @property
    def encoded_width(self) -> int:
        return 1 if self.kind == "numeric" else len(self.levels)

    def to_dict(self):
        out = {"name": self.name, "kind": self.kind}
        if self.kind == "numeric":
            out["dist"] = self.dist.to_dict()
        else:
            out["levels"] = list(self.levels)
            out["level_probs"] = list(self.level_probs)
        return out


@dataclass(frozen=True)
class ShapeFn:
    """Closed-form per-feature transformation f*_t."""

    family: str
    params: dict

    def __post_init__(self):
        if self.family not in SHAPE_FAMILIES:
            raise ValueError(f"unknown shape family {self.family!r}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.family == "quadratic":
            return p["a"] * (x - p["center"]) ** 2 + p["offset"]
        if self.family == "sigmoid_bump":
            s, c, w = p["slope"], p["center"], p["width"]
            return p["amp"] * (expit(s * (x - c + w)) - expit(s * (x - c - w)))
        if self.family == "piecewise_linear":
            return np.interp(x, p["knots"], p["values"])
        return p["amp"] * np.tanh(p["scale"] * (x - p["center"]))  # monotone

    def to_dict(self):
        return {"family": self.family, "params": self.params}


@dataclass(frozen=True)
class WeightFn:
    """Static-conditioned weight w*_t over the one-hot-encoded statics."""

    kind: str
    intercept: float
    coefs: tuple[float, ...] = ()
    offset: float = 0.0  # relu hinge position

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")

    def __call__(self, s_encoded: np.ndarray) -> np.ndarray:
        n = s_encoded.shape[0]
        if self.kind == "constant":
            return np.full(n, self.intercept)
        dot = s_encoded @ np.asarray(self.coefs, dtype=np.float64)
        if self.kind == "linear":
            return self.intercept + dot
        return self.intercept + np.maximum(0.0, dot + self.offset)

    def to_dict(self):
        return {
            "kind": self.kind,
            "intercept": self.intercept,
            "coefs": list(self.coefs),
            "offset": self.offset,
        }


@dataclass(frozen=True)
class TvSpec:
    name: str
    dist: GaussianMixture
    shape: ShapeFn

    def to_dict(self):
        return {"name": self.name, "dist": self.dist.to_dict(), "shape": self.shape.to_dict()}


@dataclass(frozen=True)
class SyntheticSpec:
    statics: tuple[StaticSpec, ...]
    tv_features: tuple[TvSpec, ...]
    weight_fns: tuple[WeightFn, ...]
    bias_fn: WeightFn
    target_prevalence: float | None = None

    def __post_init__(self):
        if len(self.weight_fns) != len(self.tv_features):
            raise ValueError("need one weight function per time-varying feature")
        width = sum(s.encoded_width for s in self.statics)
        for fn in (*self.weight_fns, self.bias_fn):
            if fn.kind != "constant" and len(fn.coefs) != width:
                raise ValueError(
                    f"weight function expects {len(fn.coefs)} encoded statics, "
                    f"spec provides {width}"
                )

    @property
    def d_tv(self) -> int:
        return len(self.tv_features)

    def encode_statics(self, columns: dict[str, np.ndarray]) -> np.ndarray:
        """Numeric statics as-is, categoricals one-hot, in spec order."""
        parts = []
        for s in self.statics:
            col = columns[s.name]
            if s.kind == "numeric":
                parts.append(np.asarray(col, dtype=np.float64).reshape(-1, 1))
            else:
                onehot = np.zeros((len(col), len(s.levels)))
                for i, level in enumerate(s.levels):
                    onehot[:, i] = [v == level for v in col]
                parts.append(onehot)
        if parts:
            return np.concatenate(parts, axis=1)
        n = len(next(iter(columns.values()))) if columns else 0
        return np.zeros((n, 0))

    def to_dict(self):
        return {
            "statics": [s.to_dict() for s in self.statics],
            "tv_features": [t.to_dict() for t in self.tv_features],
            "weight_fns": [w.to_dict() for w in self.weight_fns],
            "bias_fn": self.bias_fn.to_dict(),
            "target_prevalence": self.target_prevalence,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SyntheticSpec":
        statics = tuple(
            StaticSpec(
                name=s["name"],
                kind=s["kind"],
                dist=GaussianMixture(**s["dist"]) if s["kind"] == "numeric" else None,
                levels=tuple(s.get("levels", ())),
                level_probs=tuple(s.get("level_probs", ())),
            )
            for s in payload["statics"]
        )
        tv = tuple(
            TvSpec(
                name=t["name"],
                dist=GaussianMixture(**t["dist"]),
                shape=ShapeFn(t["shape"]["family"], t["shape"]["params"]),
            )
            for t in payload["tv_features"]
        )
        weights = tuple(
            WeightFn(
                kind=w["kind"],
                intercept=w["intercept"],
                coefs=tuple(w.get("coefs", ())),
                offset=w.get("offset", 0.0),
            )
            for w in payload["weight_fns"]
        )
        b = payload["bias_fn"]
        return cls(
            statics=statics,
            tv_features=tv,
            weight_fns=weights,
            bias_fn=WeightFn(
                b["kind"], b["intercept"], tuple(b.get("coefs", ())), b.get("offset", 0.0)
            ),
            target_prevalence=payload.get("target_prevalence"),
        )


@dataclass
class SyntheticTruth:
    """The generating process, retained for oracle-style evaluation."""

    spec: SyntheticSpec
    bias_shift: float  # prevalence-calibration offset folded into w*_0
    bayes_probability: np.ndarray  # per generated row

    def true_weights(self, static_columns: dict[str, np.ndarray]) -> np.ndarray:
        enc = self.spec.encode_statics(static_columns)
        return np.column_stack([fn(enc) for fn in self.spec.weight_fns])

    def true_bias(self, static_columns: dict[str, np.ndarray]) -> np.ndarray:
        enc = self.spec.encode_statics(static_columns)
        return self.spec.bias_fn(enc) + self.bias_shift

    def true_shape(self, t: int, grid) -> np.ndarray:
        return self.spec.tv_features[t].shape(grid)

    def true_contribution(
        self, t: int, static_row: dict[str, np.ndarray], grid
    ) -> np.ndarray:
        w = self.true_weights(static_row)[0, t]
        return w * self.true_shape(t, grid)

    def true_probability(
        self, static_columns: dict[str, np.ndarray], tv_columns: dict[str, np.ndarray]
    ) -> np.ndarray:
        w = self.true_weights(static_columns)
        b = self.true_bias(static_columns)
        f = np.column_stack(
            [t.shape(tv_columns[t.name]) for t in self.spec.tv_features]
        )
        return expit(b + (w * f).sum(axis=1))

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "bias_shift": self.bias_shift,
            "bayes_probability": self.bayes_probability.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SyntheticTruth":
        return cls(
            spec=SyntheticSpec.from_dict(payload["spec"]),
            bias_shift=payload["bias_shift"],
            bayes_probability=np.asarray(payload["bayes_probability"], dtype=np.float64),
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict()) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticTruth":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _calibrate_shift(logits: np.ndarray, target: float) -> float:
    """Bisect the bias offset so the mean Bernoulli rate hits the target."""
    lo, hi = -30.0, 30.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(expit(logits + mid).mean()) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(
    spec: SyntheticSpec, n: int, seed: int = 0
) -> tuple[TabularDataset, SyntheticTruth]:
    """Draw a dataset of n rows; labels are Bernoulli(Bayes probability)."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng([seed, 0x5EED])

    columns: dict[str, np.ndarray] = {}
    for s in spec.statics:
        if s.kind == "numeric":
            columns[s.name] = s.dist.sample(rng, n)
        else:
            probs = np.asarray(s.level_probs, dtype=np.float64)
            draws = rng.choice(len(s.levels), size=n, p=probs / probs.sum())
            columns[s.name] = np.array([s.levels[i] for i in draws], dtype=object)
    for t in spec.tv_features:
        columns[t.name] = t.dist.sample(rng, n)

    enc = spec.encode_statics(columns)
    weights = np.column_stack([fn(enc) for fn in spec.weight_fns]) if spec.d_tv else np.zeros((n, 0))
    shapes = (
        np.column_stack([t.shape(columns[t.name]) for t in spec.tv_features])
        if spec.d_tv
        else np.zeros((n, 0))
    )
    logits = spec.bias_fn(enc) + (weights * shapes).sum(axis=1)

    shift = 0.0
    if spec.target_prevalence is not None:
        shift = _calibrate_shift(logits, spec.target_prevalence)
    bayes = expit(logits + shift)
    labels = rng.binomial(1, bayes).astype(np.int64)

    features = [
        FeatureSpec(s.name, STATIC, "categorical" if s.kind == "categorical" else "numeric")
        for s in spec.statics
    ] + [FeatureSpec(t.name, TIME_VARYING, "numeric") for t in spec.tv_features]
    schema = FeatureSchema(features=features, outcome="label")
    dataset = TabularDataset(
        schema=schema,
        columns=columns,
        y=labels,
        case_ids=np.array([f"case_{i:06d}" for i in range(n)], dtype=object),
    )
    truth = SyntheticTruth(spec=spec, bias_shift=shift, bayes_probability=bayes)
    return dataset, truth


def default_interaction_spec(target_prevalence: float = 0.06) -> SyntheticSpec:
    """Four shape families with genuinely static-dependent weights.

    Encoded statics: [age_z, severity, unit=general, unit=icu, unit=stepdown].
    """
    statics = (
        StaticSpec("age_z", dist=GaussianMixture((-0.3, 0.6), (0.8, 0.9), (0.55, 0.45))),
        StaticSpec("severity", dist=GaussianMixture((-0.5, 1.0), (0.7, 0.8), (0.65, 0.35))),
        StaticSpec(
            "care_unit",
            kind="categorical",
            levels=("general", "icu", "stepdown"),
            level_probs=(0.6, 0.25, 0.15),
        ),
    )
    bimodal = GaussianMixture((-0.9, 0.9), (0.55, 0.7), (0.55, 0.45))
    wide = GaussianMixture((0.0,), (1.1,), (1.0,))
    tilted = GaussianMixture((-0.4, 1.1), (0.8, 0.5), (0.7, 0.3))
    tv_features = (
        TvSpec("vital_a", bimodal, ShapeFn("quadratic", {"a": 0.9, "center": 0.1, "offset": -0.9})),
        TvSpec(
            "vital_b",
            wide,
            ShapeFn("sigmoid_bump", {"amp": 1.8, "center": 0.4, "width": 0.9, "slope": 4.0}),
        ),
        TvSpec(
            "dose_a",
            tilted,
            ShapeFn(
                "piecewise_linear",
                {"knots": [-2.5, -0.5, 0.5, 2.5], "values": [-1.1, -0.2, 0.2, 1.7]},
            ),
        ),
        TvSpec("dose_b", wide, ShapeFn("monotone", {"amp": 1.3, "scale": 0.8, "center": -0.2})),
    )
    weight_fns = (
        WeightFn("relu", 0.5, (0.0, 0.9, 0.0, 0.0, 0.0), offset=0.2),
        WeightFn("linear", 1.0, (0.6, 0.0, 0.0, 0.0, 0.0)),
        WeightFn("constant", 1.1),
        WeightFn("linear", 0.8, (0.0, 0.0, 0.0, 0.7, -0.5)),
    )
    bias_fn = WeightFn("linear", -2.9, (0.5, 0.3, 0.0, 0.4, 0.2))
    return SyntheticSpec(
        statics=statics,
        tv_features=tv_features,
        weight_fns=weight_fns,
        bias_fn=bias_fn,
        target_prevalence=target_prevalence,
    )


def constant_weight_spec(target_prevalence: float = 0.2) -> SyntheticSpec:
    """All weights constant: realizable exactly by the no-statics reduction."""
    base = default_interaction_spec(target_prevalence)
    weight_fns = tuple(WeightFn("constant", 1.0) for _ in base.tv_features)
    return SyntheticSpec(
        statics=(),
        tv_features=base.tv_features,
        weight_fns=weight_fns,
        bias_fn=WeightFn("constant", -1.0),
        target_prevalence=target_prevalence,
    )
