"""Command-line workflows: generate, ingest, train, evaluate, explain,
serve. Set FGAM_LOG=debug|info|warning for verbosity."""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import config as cfg
from . import explain, metrics, pipeline, plots, synthetic, workflow
from .persistence import load_model, save_model
from .schema import FeatureSchema
from .train import write_history

log = logging.getLogger("fgam")


def _setup_logging() -> None:
    level = os.environ.get("FGAM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


@click.group()
def main() -> None:
    """Factored additive risk models: train, explain, serve."""
    _setup_logging()


@main.command("print-config")
def print_config() -> None:
    """Print the full default configuration as YAML."""
    click.echo(cfg.default_config_yaml(), nl=False)


def _synthetic_spec(config: dict) -> synthetic.SyntheticSpec:
    section = config["data"]["synthetic"]
    prevalence = float(section["prevalence"])
    if section["kind"] == "interaction":
        return synthetic.default_interaction_spec(prevalence)
    if section["kind"] == "constant_weight":
        return synthetic.constant_weight_spec(prevalence)
    raise _fail(f"unknown synthetic kind {section['kind']!r}")


def write_dataset_csv(dataset: pipeline.TabularDataset, path: Path) -> Path:
    specs = dataset.schema.all_features()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case_id"] + [s.name for s in specs] + ["label"])
        for i in range(dataset.n_rows):
            row = [dataset.case_ids[i]]
            for s in specs:
                v = dataset.columns[s.name][i]
                if s.kind == "categorical":
                    row.append("" if v is None else str(v))
                else:
                    row.append("" if np.isnan(v) else repr(float(v)))
            row.append(int(dataset.y[i]))
            writer.writerow(row)
    return path


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="output directory")
@click.option("--seed", type=int, default=None)
@click.option("--n", type=int, default=None, help="rows to generate")
def generate(config_path, out_dir, seed, n):
    """Generate a synthetic dataset with known ground truth."""
    config = cfg.load_config(config_path)
    out = Path(out_dir or config["outputs"]["dir"])
    seed = seed if seed is not None else int(config["train"]["seed"])
    n = n if n is not None else int(config["data"]["synthetic"]["n"])

    spec = _synthetic_spec(config)
    dataset, truth = synthetic.generate(spec, n, seed)
    data_path = write_dataset_csv(dataset, out / "data.csv")
    schema_path = dataset.schema.save(out / "schema.json")
    truth_path = truth.save(out / "truth.json")
    rate = float(dataset.y.mean())
    click.echo(f"wrote {data_path} ({n} rows, positive rate {rate:.4f})")
    click.echo(f"wrote {schema_path}")
    click.echo(f"wrote {truth_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_path", type=click.Path(exists=True), default=None,
              help="combined tabular csv")
@click.option("--schema", "schema_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="dataset cache file")
@click.option("--seed", type=int, default=None)
def ingest(config_path, data_path, schema_path, out_path, seed):
    """Parse, label, split, and standardize raw data into a cache file."""
    config = cfg.load_config(config_path)
    data_section = config["data"]
    schema_path = schema_path or data_section["schema_path"]
    if schema_path is None:
        raise _fail("a schema file is required (--schema or data.schema_path)")
    schema = FeatureSchema.load(schema_path)
    seed = seed if seed is not None else int(config["train"]["seed"])

    source = data_section["source"]
    if data_path or source in ("tabular", "synthetic"):
        path = data_path or data_section["path"]
        if path is None:
            raise _fail("a data file is required (--data or data.path)")
        try:
            dataset = pipeline.load_delimited(path, schema)
        except pipeline.DataError as exc:
            raise _fail(str(exc))
        exclusions = {}
    elif source == "cases":
        base, ts = data_section["base_path"], data_section["timeseries_path"]
        if not base or not ts:
            raise _fail("source=cases needs data.base_path and data.timeseries_path")
        try:
            dataset, exclusions = pipeline.ingest_cases(base, ts, schema)
        except pipeline.DataError as exc:
            raise _fail(str(exc))
    else:
        raise _fail(f"unknown data source {source!r}")

    prepared = pipeline.prepare(
        dataset,
        fractions=tuple(config["train"]["split_fractions"]),
        seed=seed,
        rare_min_count=int(data_section["rare_min_count"]),
    )
    cache_path = Path(out_path or data_section["cache_path"])
    pipeline.save_cache(prepared, cache_path)
    click.echo(f"wrote {cache_path} ({prepared.y.shape[0]} rows, "
               f"{len(prepared.static_names)} static + {prepared.d_tv} time-varying)")
    if exclusions:
        click.echo(f"excluded: {exclusions}")
    if prepared.dropped:
        click.echo(f"dropped constant features: {prepared.dropped}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_path", type=click.Path(exists=True), default=None,
              help="dataset cache from ingest")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
def train(config_path, data_path, out_dir, seed):
    """Train a model on an ingested dataset cache."""
    config = cfg.load_config(config_path)
    cache_path = data_path or config["data"]["cache_path"]
    if not Path(cache_path).exists():
        raise _fail(f"dataset cache not found: {cache_path}")
    out = Path(out_dir or config["outputs"]["dir"])
    prepared = pipeline.load_cache(cache_path)

    train_config = cfg.train_config_from(config, seed)
    try:
        bundle, history = workflow.train_prepared(
            prepared, train_config, **cfg.model_overrides_from(config)
        )
    except Exception as exc:  # divergence, schema/config mismatch
        raise _fail(f"training failed: {exc}")

    model_path = save_model(bundle, out / "model.json")
    history_path = write_history(history, out / "history.csv")
    plots.render_history_figure(history, out / "history.png")
    click.echo(f"wrote {model_path} (version {bundle.version_hash})")
    click.echo(f"wrote {history_path}")
    click.echo(
        f"stopped at epoch {history.stopped_epoch}, best epoch {history.best_epoch}, "
        f"validation AUROC {history.valid_auroc[history.best_epoch - 1]:.4f}"
    )


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--split", type=click.Choice(["train", "valid", "test"]), default="test")
@click.option("--out", "out_dir", type=click.Path(), default=None)
def evaluate(model_path, data_path, split, out_dir):
    """Score a split; print metrics and write curve files and figures."""
    config = cfg.load_config(None)
    out = Path(out_dir or config["outputs"]["dir"])
    bundle = load_model(model_path)
    prepared = pipeline.load_cache(data_path)
    if prepared.schema.fingerprint() != bundle.schema.fingerprint():
        raise _fail("model and dataset cache disagree on the feature schema")

    scores, labels = workflow.score_split(bundle, prepared, split)
    try:
        report = metrics.evaluate(scores, labels)
    except metrics.SingleClassError as exc:
        raise _fail(f"cannot evaluate split {split!r}: {exc}")

    for line in report.summary_lines():
        click.echo(line)
    out.mkdir(parents=True, exist_ok=True)
    roc_path, pr_path = metrics.write_curve_files(report, out)
    report_path = out / "eval.json"
    report_path.write_text(json.dumps(report.to_dict()) + "\n")
    fig_path = plots.render_eval_figure(report, out / "roc_pr.png")
    click.echo(f"wrote {roc_path}, {pr_path}, {report_path}, {fig_path}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--payload", "payload_path", type=click.Path(exists=True), required=True,
              help="JSON file of raw feature values for the case")
@click.option("--compare", "compare_path", type=click.Path(exists=True), default=None,
              help="optional second profile to overlay")
@click.option("--points", type=int, default=50)
@click.option("--out", "out_dir", type=click.Path(), default=None)
def explain_case(model_path, payload_path, compare_path, points, out_dir):
    """Per-feature contribution curves and decomposition for one case."""
    config = cfg.load_config(None)
    out = Path(out_dir or config["outputs"]["dir"])
    bundle = load_model(model_path)
    payloads = [json.loads(Path(payload_path).read_text())]
    labels = ["profile A"]
    if compare_path:
        payloads.append(json.loads(Path(compare_path).read_text()))
        labels.append("profile B")

    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for p in payloads:
        try:
            reports.append(explain.contributions_payload(bundle, p))
        except Exception as exc:
            raise _fail(f"payload rejected: {exc}")
    (out / "contributions.json").write_text(json.dumps(
        reports[0] if len(reports) == 1 else reports) + "\n")

    curves: dict[str, list[dict]] = {}
    tv_features = [f.name for f in bundle.schema.time_varying_features()]
    for feature in tv_features:
        per_profile = [
            explain.curve_payload(bundle, p, feature, points=points) for p in payloads
        ]
        curves[feature] = per_profile
        with open(out / f"curve_{feature}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["value"] + [f"contribution_{l.replace(' ', '_')}" for l in labels]
            writer.writerow(header)
            for i, x in enumerate(per_profile[0]["x"]):
                writer.writerow([repr(x)] + [repr(c["contribution"][i]) for c in per_profile])

    fig_path = plots.render_contribution_curves(curves, out / "curves.png", tuple(labels))
    click.echo(f"probability: {reports[0]['probability']:.4f} "
               f"(baseline {reports[0]['display']['bias']:+.4f} logit)")
    ranked = sorted(reports[0]["contributions"].items(), key=lambda kv: -abs(kv[1]))
    for name, value in ranked:
        click.echo(f"  {name:>28s}  {value:+.4f}")
    click.echo(f"wrote {len(curves)} curve files and {fig_path} in {out}")


# click registers the function under its own name; keep the verb "explain"
explain_case.name = "explain"
main.add_command(explain_case, "explain")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="static bundle directory to serve at /")
@click.option("--strict-categories", is_flag=True, default=False,
              help="reject unseen categorical levels (422) instead of mapping to unknown")
def serve(model_path, port, host, ui_dir, strict_categories):
    """Serve /schema, /predict, /contributions, /curve over HTTP."""
    import uvicorn

    from .service import create_app

    bundle = load_model(model_path)
    app = create_app(bundle, strict_categories=strict_categories, ui_dir=ui_dir)
    click.echo(f"serving model version {bundle.version_hash} on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
