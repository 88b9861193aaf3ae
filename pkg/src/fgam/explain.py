"""Raw-unit prediction, decomposition, and curve sweeps over a loaded
model bundle. The service endpoints and the CLI explain command are thin
wrappers around these helpers, so both stay numerically identical to the
in-process model."""

from __future__ import annotations

import numpy as np

from . import model
from .persistence import ModelBundle, encode_payload
from .schema import TIME_VARYING


class StaticFeatureError(ValueError):
    """Curve requested for a non-modifiable (static) feature."""

    def __init__(self, feature: str):
        super().__init__(
            f"{feature} is a static feature; it is fixed for the case and "
            "cannot be swept"
        )
        self.feature = feature


def predict_payload(bundle: ModelBundle, payload: dict, strict_categories=False) -> dict:
    xs, xt = encode_payload(bundle, payload, strict_categories)
    cache = model.forward_full(bundle.params, xs.reshape(1, -1), xt.reshape(1, -1))
    return {
        "probability": float(cache.probabilities[0]),
        "logit": float(cache.logits[0]),
    }


def contributions_payload(
    bundle: ModelBundle, payload: dict, strict_categories=False
) -> dict:
    xs, xt = encode_payload(bundle, payload, strict_categories)
    report = model.contributions(bundle.params, xs, xt)
    display = model.display_centering(bundle.params, report)
    return {
        "bias": report.bias,
        "contributions": dict(zip(bundle.tv_names, report.contributions.tolist())),
        "logit": report.logit,
        "probability": report.probability,
        "weights": dict(zip(bundle.tv_names, report.weights.tolist())),
        "display": {
            "bias": display["bias"],
            "contributions": dict(
                zip(bundle.tv_names, display["contributions"].tolist())
            ),
        },
    }


def feature_grid(bundle: ModelBundle, feature: str, points: int = 50) -> np.ndarray:
    """Auto-range sweep: the feature's 1st..99th train percentile."""
    s = bundle.stats.numeric[feature]
    lo, hi = s.p1, s.p99
    if not lo < hi:
        lo, hi = s.mean - 1.0, s.mean + 1.0
    return np.linspace(lo, hi, points)


def curve_payload(
    bundle: ModelBundle,
    payload: dict,
    feature: str,
    grid=None,
    points: int = 50,
    strict_categories=False,
) -> dict:
    """Contribution of one time-varying feature swept over raw values.

    X is in raw units; the model sees the standardized grid. The point at
    the payload's own value matches contributions_payload exactly.
    """
    spec = bundle.schema.feature(feature)  # raises SchemaError when unknown
    if spec.role != TIME_VARYING:
        raise StaticFeatureError(feature)
    t = bundle.tv_names.index(feature)
    xs, xt = encode_payload(bundle, payload, strict_categories)

    raw_grid = np.asarray(
        grid if grid is not None else feature_grid(bundle, feature, points),
        dtype=np.float64,
    )
    s = bundle.stats.numeric[feature]
    std_grid = (raw_grid - s.mean) / s.std
    curve = model.contribution_curve(bundle.params, xs, xt, t, std_grid)
    contribs = [c for _, c in curve]

    report = model.contributions(bundle.params, xs, xt)
    display = model.display_centering(bundle.params, report)
    center = report.contributions[t] - display["contributions"][t]
    current_raw = payload.get(feature)
    return {
        "feature": feature,
        "x": raw_grid.tolist(),
        "contribution": contribs,
        "centered": [c - center for c in contribs],
        "current": {
            "value": current_raw,
            "contribution": float(report.contributions[t]),
        },
    }


def schema_payload(bundle: ModelBundle) -> dict:
    """Feature listing for clients: kinds, ranges, units, modifiability."""
    features = []
    for spec in bundle.schema.all_features():
        entry = {
            "name": spec.name,
            "role": spec.role,
            "kind": spec.kind,
            "modifiable": spec.role == TIME_VARYING,
            "units": spec.units,
        }
        if spec.name in bundle.stats.categorical:
            vocab = bundle.stats.categorical[spec.name]
            entry["levels"] = list(vocab.levels)
        elif spec.name in bundle.stats.numeric:
            s = bundle.stats.numeric[spec.name]
            entry["range"] = [s.p1, s.p99]
            entry["mean"] = s.mean
        else:
            continue  # dropped constant feature
        features.append(entry)
    return {"features": features}
