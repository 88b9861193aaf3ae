import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from fgam.cli import main
from fgam.persistence import load_model


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, runner):
    """generate -> ingest -> train once; several tests read the artifacts."""
    root = tmp_path_factory.mktemp("cli")
    config = {
        "data": {"synthetic": {"n": 700, "prevalence": 0.25}},
        "model": {"dnnn_depth": 2, "dnnn_width": 4, "trunk_widths": [8],
                  "dropout_rate": 0.05},
        "train": {"max_epochs": 6, "patience": 3, "batch_size": 128,
                  "learning_rate": 0.02, "seed": 5},
        "outputs": {"dir": str(root / "run")},
    }
    config_path = root / "config.yaml"
    config_path.write_text(yaml.safe_dump(config))

    r = runner.invoke(main, ["generate", "--config", str(config_path),
                             "--out", str(root)])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "ingest", "--config", str(config_path),
        "--data", str(root / "data.csv"), "--schema", str(root / "schema.json"),
        "--out", str(root / "cache.json"),
    ])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "train", "--config", str(config_path),
        "--data", str(root / "cache.json"), "--out", str(root / "run"),
    ])
    assert r.exit_code == 0, r.output
    return root, config_path


class TestPrintConfig:
    def test_defaults_are_valid_yaml_with_all_sections(self, runner):
        r = runner.invoke(main, ["print-config"])
        assert r.exit_code == 0
        parsed = yaml.safe_load(r.output)
        assert set(parsed) == {"data", "model", "train", "outputs"}


class TestGenerate:
    def test_writes_data_schema_truth(self, workdir):
        root, _ = workdir
        assert (root / "data.csv").exists()
        assert (root / "schema.json").exists()
        assert (root / "truth.json").exists()
        header = (root / "data.csv").read_text().splitlines()[0]
        assert header.startswith("case_id,") and header.endswith(",label")


class TestTrain:
    def test_artifacts_written(self, workdir):
        root, _ = workdir
        assert (root / "run" / "model.json").exists()
        assert (root / "run" / "history.csv").exists()
        assert (root / "run" / "history.png").exists()

    def test_model_loadable_and_eval_runs(self, workdir, runner):
        root, _ = workdir
        bundle = load_model(root / "run" / "model.json")
        assert bundle.params.config.d_tv == 4
        r = runner.invoke(main, [
            "evaluate", "--model", str(root / "run" / "model.json"),
            "--data", str(root / "cache.json"), "--out", str(root / "eval"),
        ])
        assert r.exit_code == 0, r.output
        assert "AUROC" in r.output
        assert (root / "eval" / "roc_curve.csv").exists()
        assert (root / "eval" / "pr_curve.csv").exists()
        assert (root / "eval" / "roc_pr.png").exists()

    def test_missing_dataset_path_errors(self, runner, tmp_path):
        r = runner.invoke(main, ["train", "--data", str(tmp_path / "nope.json")])
        assert r.exit_code != 0

    def test_rerun_same_seed_byte_identical_model(self, workdir, runner, tmp_path):
        root, config_path = workdir
        out2 = tmp_path / "again"
        r = runner.invoke(main, [
            "train", "--config", str(config_path),
            "--data", str(root / "cache.json"), "--out", str(out2),
        ])
        assert r.exit_code == 0, r.output
        a = (root / "run" / "model.json").read_bytes()
        b = (out2 / "model.json").read_bytes()
        assert a == b

    def test_eval_report_round_trips(self, workdir):
        root, _ = workdir
        payload = json.loads((root / "eval" / "eval.json").read_text())
        from fgam.metrics import EvalReport

        report = EvalReport.from_dict(payload)
        assert report.auroc_ci[0] <= report.auroc <= report.auroc_ci[1]


class TestExplain:
    def test_writes_curves_and_figure(self, workdir, runner, tmp_path):
        root, _ = workdir
        bundle = load_model(root / "run" / "model.json")
        from fgam.persistence import feature_means_payload

        payload = feature_means_payload(bundle)
        payload_path = tmp_path / "case.json"
        payload_path.write_text(json.dumps(payload))
        second = dict(payload, severity=2.5)
        second_path = tmp_path / "case_b.json"
        second_path.write_text(json.dumps(second))

        out = tmp_path / "explain"
        r = runner.invoke(main, [
            "explain", "--model", str(root / "run" / "model.json"),
            "--payload", str(payload_path), "--compare", str(second_path),
            "--out", str(out), "--points", "20",
        ])
        assert r.exit_code == 0, r.output
        assert (out / "curves.png").exists()
        assert (out / "contributions.json").exists()
        curve_files = list(out.glob("curve_*.csv"))
        assert len(curve_files) == 4
        lines = curve_files[0].read_text().strip().splitlines()
        assert len(lines) == 21  # header + 20 grid points
        assert lines[0].count(",") == 2  # value + two profiles

    def test_bad_payload_fails_cleanly(self, workdir, runner, tmp_path):
        root, _ = workdir
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"nonsense": 1}))
        r = runner.invoke(main, [
            "explain", "--model", str(root / "run" / "model.json"),
            "--payload", str(bad), "--out", str(tmp_path / "x"),
        ])
        assert r.exit_code != 0
        assert "payload rejected" in r.output


class TestIngestCases:
    def test_case_level_ingestion(self, runner, tmp_path):
        from fgam.schema import (
            STATIC, TIME_VARYING, ChannelSpec, FeatureSchema, FeatureSpec,
            ThresholdSpec,
        )

        schema = FeatureSchema(
            features=[
                FeatureSpec("age", STATIC, "numeric"),
                FeatureSpec("crystalloid_total", TIME_VARYING, "numeric"),
            ],
            channels=[ChannelSpec("map", statistics=("mean", "min"),
                                  thresholds=(ThresholdSpec("below", 65),))],
            outcome="aki",
        )
        schema_path = schema.save(tmp_path / "schema.json")

        base = tmp_path / "cases.csv"
        base.write_text(
            "case_id,duration_seconds,age,crystalloid_total,"
            "preop_creatinine,preop_creatinine_age_days,on_dialysis,"
            "postop_creatinine_48h\n"
            "a,3600,60,500,1.0,2,0,1.5;1.2\n"      # positive (delta 0.5)
            "b,3600,50,250,1.0,2,0,1.1\n"          # negative
            "c,3600,40,100,1.0,2,1,2.0\n"          # undefined: dialysis
            "d,3600,70,900,,2,0,1.5\n"             # undefined: no preop
            "e,3600,55,300,1.0,2,0,1.2;1.31\n"     # positive (delta 0.31)
            "f,3600,65,400,1.0,2,0,\n"             # undefined: no postop
        )
        ts = tmp_path / "ts.csv"
        ts.write_text(
            "case_id,channel,t_seconds,value\n"
            + "\n".join(
                f"{case},map,{t + 400 * k},{v + 3 * k}"
                for k, case in enumerate("abdef")
                for t, v in [(0, 70), (1800, 60)]
            )
            + "\nc,map,0,80\n"
        )
        config = {
            "data": {"source": "cases", "base_path": str(base),
                     "timeseries_path": str(ts), "rare_min_count": 1},
            "train": {"split_fractions": [0.5, 0.25, 0.25], "seed": 1},
        }
        config_path = tmp_path / "config.yaml"
        config_path.write_text(yaml.safe_dump(config))
        out = tmp_path / "cache.json"
        r = runner.invoke(main, [
            "ingest", "--config", str(config_path),
            "--schema", str(schema_path), "--out", str(out),
        ])
        assert r.exit_code == 0, r.output
        assert "excluded" in r.output

        from fgam.pipeline import load_cache

        prepared = load_cache(out)
        assert prepared.y.tolist() == [1, 0, 1]  # a, b, e survive
        assert "map_mean" in prepared.tv_names
        assert "map_frac_below_65" in prepared.tv_names
