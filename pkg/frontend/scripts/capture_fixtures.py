"""Regenerate tests/fixtures/ by recording real service responses.

Run from the repository root with the python package installed:

    python3 frontend/scripts/capture_fixtures.py

Two models are recorded: a fixed seeded model over the bundled synthetic
schema, and a hand-set proportional model whose weight head reads the
single static directly (so two profiles produce exactly scaled curves).
"""

import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

import fgam.pipeline as pl
from fgam.model import init_params
from fgam.persistence import bundle_from_prepared, feature_means_payload, load_model, save_model
from fgam.pipeline import prepare
from fgam.schema import STATIC, TIME_VARYING, FeatureSchema, FeatureSpec
from fgam.service import create_app
from fgam.synthetic import default_interaction_spec, generate

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def dump(name: str, payload) -> None:
    (OUT / name).write_text(json.dumps(payload, indent=1))


def reloaded(bundle, tmp_name: str):
    path = Path("/tmp") / tmp_name
    save_model(bundle, path)
    return load_model(path)  # ensures the version hash is the served one


def capture_fixed_model() -> None:
    dataset, _ = generate(default_interaction_spec(0.2), 400, seed=77)
    prepared = prepare(dataset, (0.7, 0.1, 0.2), seed=77)
    config = prepared.model_config(
        dnnn_depth=2, dnnn_width=4, trunk_widths=(8, 4), dropout_rate=0.1
    )
    bundle = reloaded(bundle_from_prepared(init_params(config, 123), prepared),
                      "fixture_model.json")
    client = TestClient(create_app(bundle))

    profile_a = feature_means_payload(bundle)
    profile_b = dict(profile_a, severity=1.8, care_unit="icu", vital_a=1.2)
    dump("schema.json", client.get("/schema").json())
    dump("profile_a.json", profile_a)
    dump("profile_b.json", profile_b)
    for tag, payload in (("a", profile_a), ("b", profile_b)):
        dump(f"predict_{tag}.json", client.post("/predict", json=payload).json())
        dump(f"contributions_{tag}.json",
             client.post("/contributions", json=payload).json())
        for feature in bundle.tv_names:
            resp = client.post(
                "/curve", json={"feature": feature, "payload": payload, "points": 25}
            )
            dump(f"curve_{feature}_{tag}.json", resp.json())

    moved = dict(profile_a, dose_b=1.5)  # locality fixture: one feature moved
    dump("contributions_a_moved_dose_b.json",
         client.post("/contributions", json=moved).json())


def capture_proportional_model() -> None:
    schema = FeatureSchema(
        features=[
            FeatureSpec("scale", STATIC, "numeric"),
            FeatureSpec("exposure", TIME_VARYING, "numeric"),
        ],
        outcome="label",
    )
    rng = np.random.default_rng(0)
    cols = {"scale": rng.normal(1.0, 0.5, 200), "exposure": rng.normal(0.0, 1.0, 200)}
    ds = pl.TabularDataset(
        schema=schema,
        columns=cols,
        y=rng.integers(0, 2, 200).astype(np.int64),
        case_ids=np.array([str(i) for i in range(200)], dtype=object),
    )
    prep = pl.prepare(ds, (0.7, 0.1, 0.2), seed=1)
    config = prep.model_config(dnnn_depth=2, dnnn_width=3, trunk_widths=(),
                               dropout_rate=0.0)
    params = init_params(config, 5)
    params.weight_head.weight[...] = 1.0  # w(x) = standardized scale value
    params.weight_head.bias[...] = 0.0
    bundle = reloaded(bundle_from_prepared(params, prep), "prop_model.json")
    client = TestClient(create_app(bundle))

    s = prep.stats.numeric["scale"]
    profiles = {
        "a": {"scale": s.mean + 1.0 * s.std, "exposure": 0.4},  # weight exactly 1
        "b": {"scale": s.mean + 2.0 * s.std, "exposure": 0.4},  # weight exactly 2
    }
    grid = np.linspace(-2.0, 2.0, 21).tolist()
    for tag, payload in profiles.items():
        dump(f"prop_curve_{tag}.json", client.post(
            "/curve", json={"feature": "exposure", "payload": payload, "grid": grid}
        ).json())
        dump(f"prop_contributions_{tag}.json",
             client.post("/contributions", json=payload).json())


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    capture_fixed_model()
    capture_proportional_model()
    print(f"wrote {len(list(OUT.iterdir()))} fixtures to {OUT}")
