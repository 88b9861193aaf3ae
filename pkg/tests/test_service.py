import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fgam.explain import contributions_payload, curve_payload, predict_payload
from fgam.persistence import (
    PayloadError,
    encode_payload,
    feature_means_payload,
)
from fgam.service import create_app


@pytest.fixture(scope="module")
def client(demo_bundle):
    return TestClient(create_app(demo_bundle), raise_server_exceptions=False)


@pytest.fixture(scope="module")
def strict_client(demo_bundle):
    return TestClient(
        create_app(demo_bundle, strict_categories=True),
        raise_server_exceptions=False,
    )


def random_payload(bundle, rng):
    payload = {}
    for spec in bundle.schema.all_features():
        if spec.name in bundle.stats.categorical:
            vocab = bundle.stats.categorical[spec.name]
            payload[spec.name] = str(rng.choice(vocab.levels))
        elif spec.name in bundle.stats.numeric:
            s = bundle.stats.numeric[spec.name]
            payload[spec.name] = float(rng.normal(s.mean, 3 * s.std))
    return payload


class TestSchemaEndpoint:
    def test_lists_features_with_modifiability(self, client, demo_bundle):
        body = client.get("/schema").json()
        by_name = {f["name"]: f for f in body["features"]}
        assert by_name["care_unit"]["modifiable"] is False
        assert by_name["vital_a"]["modifiable"] is True
        assert "levels" in by_name["care_unit"]
        assert len(by_name["vital_a"]["range"]) == 2
        assert body["model_version"] == demo_bundle.version_hash


class TestPredict:
    def test_training_means_hit_standardized_zero(self, client, demo_bundle):
        from fgam.model import forward

        payload = feature_means_payload(demo_bundle)
        got = client.post("/predict", json=payload).json()
        xs, xt = encode_payload(demo_bundle, payload)
        assert np.allclose(xt, 0.0, atol=1e-12)  # means standardize to zero
        want = forward(demo_bundle.params, xs, xt)[0]
        assert got["probability"] == want

    def test_malformed_field_named_in_400(self, client):
        payload = {"no_such_feature": 1.0}
        resp = client.post("/predict", json=payload)
        assert resp.status_code == 400
        assert "no_such_feature" in resp.json()["fields"]

    def test_missing_feature_named_in_400(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        payload.pop("vital_a")
        resp = client.post("/predict", json=payload)
        assert resp.status_code == 400
        assert "vital_a" in resp.json()["fields"]

    def test_differential_against_library(self, client, demo_bundle):
        rng = np.random.default_rng(1)
        for _ in range(50):
            payload = random_payload(demo_bundle, rng)
            got = client.post("/predict", json=payload).json()
            want = predict_payload(demo_bundle, payload)
            assert got["probability"] == want["probability"]  # bitwise
            assert got["logit"] == want["logit"]

    def test_null_value_takes_missing_pathway(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        payload["vital_a"] = None
        resp = client.post("/predict", json=payload)
        assert resp.status_code == 200

    def test_unknown_level_maps_to_unknown_by_default(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        payload["care_unit"] = "hyperbaric_chamber"
        assert client.post("/predict", json=payload).status_code == 200

    def test_unknown_level_422_when_strict(self, strict_client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        payload["care_unit"] = "hyperbaric_chamber"
        resp = strict_client.post("/predict", json=payload)
        assert resp.status_code == 422


class TestContributions:
    def test_additivity_in_every_response(self, client, demo_bundle):
        rng = np.random.default_rng(3)
        for _ in range(25):
            body = client.post(
                "/contributions", json=random_payload(demo_bundle, rng)
            ).json()
            total = body["bias"] + sum(body["contributions"].values())
            assert abs(total - body["logit"]) <= 1e-9

    def test_field_count_matches_schema(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        body = client.post("/contributions", json=payload).json()
        tv = [f for f in demo_bundle.schema.all_features() if f.role == "time_varying"]
        assert len(body["contributions"]) == len(tv)

    def test_bitwise_match_on_fixed_payloads(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        payload["vital_a"] = 1.25
        payload["dose_b"] = -0.5
        got = client.post("/contributions", json=payload).json()
        want = contributions_payload(demo_bundle, payload)
        assert got["bias"] == want["bias"]
        assert got["contributions"] == want["contributions"]
        assert got["display"]["contributions"] == want["display"]["contributions"]

    def test_display_centering_preserves_logit(self, client, demo_bundle):
        body = client.post(
            "/contributions", json=feature_means_payload(demo_bundle)
        ).json()
        total = body["display"]["bias"] + sum(body["display"]["contributions"].values())
        assert abs(total - body["logit"]) <= 1e-9


class TestCurve:
    def test_current_value_matches_contributions(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        payload["vital_b"] = 0.8
        curve = client.post(
            "/curve", json={"feature": "vital_b", "payload": payload}
        ).json()
        contribs = client.post("/contributions", json=payload).json()
        assert curve["current"]["contribution"] == contribs["contributions"]["vital_b"]

    def test_sweep_equals_library(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        grid = np.linspace(-2.0, 2.0, 50).tolist()
        got = client.post(
            "/curve", json={"feature": "dose_a", "payload": payload, "grid": grid}
        ).json()
        want = curve_payload(demo_bundle, payload, "dose_a", grid=grid)
        assert got["x"] == want["x"]
        assert got["contribution"] == want["contribution"]

    def test_static_feature_rejected_as_non_modifiable(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        resp = client.post(
            "/curve", json={"feature": "severity", "payload": payload}
        )
        assert resp.status_code == 400
        assert "static" in resp.json()["error"]

    def test_unknown_feature_rejected(self, client, demo_bundle):
        resp = client.post(
            "/curve",
            json={"feature": "zzz", "payload": feature_means_payload(demo_bundle)},
        )
        assert resp.status_code == 400

    def test_auto_range_uses_train_percentiles(self, client, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        body = client.post(
            "/curve", json={"feature": "vital_a", "payload": payload, "points": 15}
        ).json()
        s = demo_bundle.stats.numeric["vital_a"]
        assert body["x"][0] == pytest.approx(s.p1)
        assert body["x"][-1] == pytest.approx(s.p99)
        assert len(body["x"]) == 15


class TestRobustness:
    MALFORMED = [
        b"",
        b"not json at all",
        b"[]",
        b'"just a string"',
        b"123",
        b'{"feature": {}}',
        b'{"unclosed": ',
        json.dumps({"vital_a": "NaN"}).encode(),
        json.dumps({"vital_a": True}).encode(),
        json.dumps({"vital_a": [1, 2]}).encode(),
        b'{"vital_a": NaN}',
        b'{"vital_a": Infinity}',
    ]

    @pytest.mark.parametrize("endpoint", ["/predict", "/contributions", "/curve"])
    def test_malformed_bodies_never_500(self, client, endpoint):
        for body in self.MALFORMED:
            resp = client.post(
                endpoint, content=body, headers={"content-type": "application/json"}
            )
            assert resp.status_code in (400, 422), (endpoint, body, resp.status_code)

    def test_fuzzed_payloads_never_500(self, client, demo_bundle):
        rng = np.random.default_rng(9)
        names = [f.name for f in demo_bundle.schema.all_features()] + ["bogus"]
        junk = [None, "x", -1e308, 1e308, float("inf"), [], {}, True, "nan", 0]
        for _ in range(400):
            payload = {
                str(rng.choice(names)): junk[int(rng.integers(0, len(junk)))]
                for _ in range(rng.integers(0, 5))
            }
            try:
                body = json.dumps(payload)
            except ValueError:
                continue
            resp = client.post("/predict", content=body,
                               headers={"content-type": "application/json"})
            assert resp.status_code in (200, 400, 422)

    def test_health_reports_counters_and_version(self, client, demo_bundle):
        before = client.get("/health").json()
        client.post("/predict", json=feature_means_payload(demo_bundle))
        after = client.get("/health").json()
        assert after["model_version"] == demo_bundle.version_hash
        assert after["request_counts"]["predict"] >= before["request_counts"].get(
            "predict", 0
        )


class TestEncodePayload:
    def test_missing_indicator_path(self, demo_prepared):
        import fgam.pipeline as pl
        from fgam.model import init_params
        from fgam.persistence import bundle_from_prepared

        prepared, dataset, _ = demo_prepared
        # rig missingness into a fresh dataset so an indicator column exists
        ds2 = pl.TabularDataset(
            schema=dataset.schema,
            columns={k: v.copy() for k, v in dataset.columns.items()},
            y=dataset.y.copy(),
            case_ids=dataset.case_ids.copy(),
        )
        ds2.columns["dose_a"][::5] = np.nan
        prep2 = pl.prepare(ds2, (0.7, 0.1, 0.2), seed=3)
        assert "dose_a_missing" in prep2.tv_names
        bundle = bundle_from_prepared(
            init_params(prep2.model_config(dnnn_depth=1, dnnn_width=2,
                                           trunk_widths=(4,)), 5),
            prep2,
        )
        payload = feature_means_payload(bundle)
        payload["dose_a"] = None
        xs, xt = encode_payload(bundle, payload)
        j = prep2.tv_names.index("dose_a")
        s = prep2.stats.numeric["dose_a"]
        assert xt[j] == pytest.approx((s.median - s.mean) / s.std)
        ind = prep2.stats.numeric["dose_a_missing"]
        k = prep2.tv_names.index("dose_a_missing")
        assert xt[k] == pytest.approx((1.0 - ind.mean) / ind.std)

    def test_bool_rejected_as_numeric(self, demo_bundle):
        payload = feature_means_payload(demo_bundle)
        payload["vital_a"] = True
        with pytest.raises(PayloadError):
            encode_payload(demo_bundle, payload)
