"""Clinical-style data pipeline.

Raw per-case material (static columns, long-format intraoperative series,
outcome ingredients) becomes a tabular dataset; the dataset is then split,
imputed, and standardized with statistics fitted on the train split only.

Threshold-duration features integrate a last-observation-carried-forward
step function over the surgery window, so "fraction of surgery below 55"
is duration-weighted, not sample-counted.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import FGamConfig
from .schema import STATIC, TIME_VARYING, ChannelSpec, FeatureSchema, SchemaError
from .train import SplitIndices, split

log = logging.getLogger("fgam")

CACHE_FORMAT_VERSION = 1

POSITIVE, NEGATIVE, UNDEFINED = "positive", "negative", "undefined"

AKI_ABS_RISE = 0.3  # mg/dL
AKI_REL_RISE = 1.5  # ratio vs preop
AKI_PREOP_MAX_AGE_DAYS = 30.0
ARF_VENT_HOURS = 48.0


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# raw-series summarization


def _locf_segments(
    times: np.ndarray, values: np.ndarray, duration: float
) -> tuple[np.ndarray, np.ndarray]:
    """Carried-forward segment values and dwell times over [0, duration].

    The first observation extends back to 0; the last extends to the end of
    the window. Observations after the window are ignored.
    """
    if np.any(np.diff(times) < 0):
        raise DataError("series timestamps must be nondecreasing")
    keep = times <= duration
    times, values = times[keep], values[keep]
    if times.size == 0:
        return np.array([]), np.array([])
    starts = np.clip(times, 0.0, duration)
    starts[0] = 0.0
    ends = np.append(starts[1:], duration)
    return values, ends - starts


def summarize_channel(
    times,
    values,
    duration: float,
    spec: ChannelSpec,
    weight_kg: float | None = None,
) -> dict[str, float]:
    """Summary features for one channel of one case.

    Empty series (or missing weight for a per-kg channel) routes every
    emitted feature to the missing-value pathway (NaN).
    """
    if duration <= 0:
        raise DataError("surgery duration must be positive")
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    names = spec.feature_names()
    if spec.per_kg:
        if weight_kg is None or not np.isfinite(weight_kg) or weight_kg <= 0:
            return {name: float("nan") for name in names}
        values = values / weight_kg
    seg_values, seg_dwell = _locf_segments(times, values, duration)
    if seg_values.size == 0:
        return {name: float("nan") for name in names}

    total = seg_dwell.sum()
    mean = float((seg_values * seg_dwell).sum() / total)
    var = float((seg_dwell * (seg_values - mean) ** 2).sum() / total)
    stats = {
        "mean": mean,
        "std": float(np.sqrt(var)),
        "min": float(seg_values.min()),
        "max": float(seg_values.max()),
    }
    out = {f"{spec.channel}_{s}": stats[s] for s in spec.statistics}
    for t in spec.thresholds:
        if t.direction == "below":
            inside = seg_values < t.cutoff
        else:
            inside = seg_values > t.cutoff
        out[f"{spec.channel}_{t.feature_suffix()}"] = float(
            seg_dwell[inside].sum() / total
        )
    return out


def compliance(final_tidal_volume: float, final_peak_pressure: float) -> float:
    """Final tidal volume over final peak inspiratory pressure; a
    nonpositive denominator yields a missing value, never infinity."""
    if not np.isfinite(final_peak_pressure) or final_peak_pressure <= 0:
        return float("nan")
    if not np.isfinite(final_tidal_volume):
        return float("nan")
    return float(final_tidal_volume) / float(final_peak_pressure)


# ---------------------------------------------------------------------------
# outcome labeling


def label_aki(
    preop_creatinine: float | None,
    preop_age_days: float | None,
    postop_values_48h,
    on_dialysis: bool,
) -> str:
    """Kidney-injury label from creatinine: rise >0.3 mg/dL or >50% within
    48 h of surgery, both strict. Undefined on dialysis, stale/missing
    preop draw, or no postop value."""
    postop = [float(v) for v in postop_values_48h]
    for v in postop:
        if v < 0:
            raise DataError("creatinine values cannot be negative")
    if on_dialysis:
        return UNDEFINED
    if preop_creatinine is None or not np.isfinite(preop_creatinine):
        return UNDEFINED
    if preop_creatinine < 0:
        raise DataError("creatinine values cannot be negative")
    if preop_age_days is None or preop_age_days > AKI_PREOP_MAX_AGE_DAYS:
        return UNDEFINED
    if not postop:
        return UNDEFINED
    abs_limit = preop_creatinine + AKI_ABS_RISE
    rel_limit = preop_creatinine * AKI_REL_RISE
    for v in postop:
        if v > abs_limit or v > rel_limit:
            return POSITIVE
    return NEGATIVE


def label_arf(
    ventilation_hours_post: float,
    reintubated_48h: bool,
    preop_ventilated: bool,
    second_surgery_48h: bool,
    died_48h: bool,
) -> str:
    """Respiratory-failure label: ventilation >48 h post-surgery (strict)
    or reintubation within 48 h; undefined under any exclusion."""
    if preop_ventilated or second_surgery_48h or died_48h:
        return UNDEFINED
    if ventilation_hours_post > ARF_VENT_HOURS or reintubated_48h:
        return POSITIVE
    return NEGATIVE


# ---------------------------------------------------------------------------
# tabular dataset and standardization


@dataclass
class TabularDataset:
    """Typed but unstandardized columns; NaN / None mark missing cells."""

    schema: FeatureSchema
    columns: dict[str, np.ndarray]
    y: np.ndarray
    case_ids: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.y.shape[0]

    def missingness(self) -> dict[str, int]:
        out = {}
        for spec in self.schema.all_features():
            col = self.columns[spec.name]
            if spec.kind == "categorical":
                out[spec.name] = int(sum(v is None for v in col))
            else:
                out[spec.name] = int(np.isnan(col).sum())
        return out


@dataclass
class NumericStats:
    mean: float
    std: float  # population (1/n) std over non-missing train cells
    median: float
    p1: float
    p99: float
    n_missing: int
    constant: bool = False

    def to_dict(self):
        return self.__dict__.copy()


@dataclass
class CategoricalVocab:
    levels: list[str]  # ordered; code = position; unknown = len(levels)
    held_out: list[str] = field(default_factory=list)

    @property
    def unknown_code(self) -> int:
        return len(self.levels)

    @property
    def cardinality(self) -> int:
        return len(self.levels) + 1

    def encode(self, value) -> int:
        if value is None:
            return self.unknown_code
        try:
            return self.levels.index(str(value))
        except ValueError:
            return self.unknown_code

    def to_dict(self):
        return {"levels": self.levels, "held_out": self.held_out}


@dataclass
class StandardizationStats:
    numeric: dict[str, NumericStats]
    categorical: dict[str, CategoricalVocab]

    def to_dict(self):
        return {
            "numeric": {k: v.to_dict() for k, v in self.numeric.items()},
            "categorical": {k: v.to_dict() for k, v in self.categorical.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StandardizationStats":
        return cls(
            numeric={k: NumericStats(**v) for k, v in payload["numeric"].items()},
            categorical={
                k: CategoricalVocab(**v) for k, v in payload["categorical"].items()
            },
        )

    def standardize_value(self, name: str, value: float) -> float:
        s = self.numeric[name]
        return (value - s.mean) / s.std

    def destandardize_value(self, name: str, value: float) -> float:
        s = self.numeric[name]
        return value * s.std + s.mean


def fit_numeric_stats(values: np.ndarray) -> NumericStats:
    """Stats over one train-split column; missing cells are excluded."""
    present = values[~np.isnan(values)]
    n_missing = int(values.size - present.size)
    if present.size == 0:
        return NumericStats(0.0, 0.0, 0.0, 0.0, 0.0, n_missing, constant=True)
    mean = float(present.mean())
    std = float(present.std())  # ddof=0
    # a column of identical values can pick up ~1e-16 rounding in the mean
    constant = std <= 1e-12 * max(1.0, abs(mean))
    return NumericStats(
        mean=mean,
        std=std,
        median=float(np.median(present)),
        p1=float(np.percentile(present, 1)),
        p99=float(np.percentile(present, 99)),
        n_missing=n_missing,
        constant=constant,
    )


def fit_categorical_vocab(values: np.ndarray, rare_min_count: int) -> CategoricalVocab:
    """Vocabulary from train cells; levels rarer than ``rare_min_count``
    are held out so the reserved unknown row sees training gradient."""
    counts: dict[str, int] = {}
    for v in values:
        if v is not None:
            counts[str(v)] = counts.get(str(v), 0) + 1
    ordered = sorted(counts, key=lambda k: (-counts[k], k))
    levels = [k for k in ordered if counts[k] >= rare_min_count]
    held_out = [k for k in ordered if counts[k] < rare_min_count]
    return CategoricalVocab(levels=levels, held_out=held_out)


@dataclass
class PreparedDataset:
    """Encoded, standardized design matrix split into static and
    time-varying blocks, plus split assignment and the fitted stats."""

    schema: FeatureSchema
    stats: StandardizationStats
    static_names: list[str]
    tv_names: list[str]
    static_cardinalities: tuple[int | None, ...]
    x_static: np.ndarray
    x_tv: np.ndarray
    y: np.ndarray
    case_ids: np.ndarray
    split: SplitIndices
    dropped: list[str] = field(default_factory=list)

    @property
    def d_tv(self) -> int:
        return len(self.tv_names)

    def block(self, indices: np.ndarray):
        return self.x_static[indices], self.x_tv[indices], self.y[indices]

    def model_config(self, **overrides) -> FGamConfig:
        return FGamConfig(
            static_cardinalities=self.static_cardinalities,
            d_tv=self.d_tv,
            **overrides,
        )


def _encode_feature(
    name: str,
    kind: str,
    column: np.ndarray,
    stats: StandardizationStats,
) -> tuple[list[np.ndarray], list[str], list[int | None]]:
    """Encoded column(s) for one feature: the standardized/imputed value,
    plus a missing indicator when the train split had gaps."""
    if kind == "categorical":
        vocab = stats.categorical[name]
        codes = np.array([vocab.encode(v) for v in column], dtype=np.float64)
        return [codes], [name], [vocab.cardinality]
    s = stats.numeric[name]
    missing = np.isnan(column)
    filled = np.where(missing, s.median, column)
    standardized = (filled - s.mean) / s.std
    cols, names, cards = [standardized], [name], [None]
    if s.n_missing > 0:
        indicator_name = f"{name}_missing"
        ind = stats.numeric[indicator_name]
        cols.append((missing.astype(np.float64) - ind.mean) / ind.std)
        names.append(indicator_name)
        cards.append(None)
    return cols, names, cards


def prepare(
    dataset: TabularDataset,
    fractions=(0.7, 0.1, 0.2),
    seed: int = 0,
    rare_min_count: int = 2,
) -> PreparedDataset:
    """Split, fit standardization on the train rows only, and encode.

    Constant train columns are dropped with a warning. Numeric features
    with train-split gaps get a companion ``<name>_missing`` indicator.
    """
    indices = split(dataset.n_rows, fractions, seed)
    train_idx = indices.train

    numeric: dict[str, NumericStats] = {}
    categorical: dict[str, CategoricalVocab] = {}
    dropped: list[str] = []
    for spec in dataset.schema.all_features():
        col = dataset.columns[spec.name]
        if spec.kind == "categorical":
            categorical[spec.name] = fit_categorical_vocab(
                col[train_idx], rare_min_count
            )
            continue
        s = fit_numeric_stats(col[train_idx].astype(np.float64))
        if s.constant:
            warnings.warn(
                f"feature {spec.name!r} is constant on the train split; dropping"
            )
            dropped.append(spec.name)
            continue
        numeric[spec.name] = s
        if s.n_missing > 0:
            indicator = (
                np.isnan(col[train_idx].astype(np.float64)).astype(np.float64)
            )
            numeric[f"{spec.name}_missing"] = fit_numeric_stats(indicator)
    stats = StandardizationStats(numeric=numeric, categorical=categorical)

    blocks = {STATIC: ([], [], []), TIME_VARYING: ([], [], [])}
    for spec in dataset.schema.all_features():
        if spec.name in dropped:
            continue
        cols, names, cards = _encode_feature(
            spec.name, spec.kind, dataset.columns[spec.name], stats
        )
        blocks[spec.role][0].extend(cols)
        blocks[spec.role][1].extend(names)
        blocks[spec.role][2].extend(cards)

    n = dataset.n_rows
    s_cols, s_names, s_cards = blocks[STATIC]
    t_cols, t_names, _ = blocks[TIME_VARYING]
    x_static = np.column_stack(s_cols) if s_cols else np.zeros((n, 0))
    x_tv = np.column_stack(t_cols) if t_cols else np.zeros((n, 0))
    return PreparedDataset(
        schema=dataset.schema,
        stats=stats,
        static_names=s_names,
        tv_names=t_names,
        static_cardinalities=tuple(s_cards),
        x_static=x_static,
        x_tv=x_tv,
        y=dataset.y.astype(np.int64),
        case_ids=dataset.case_ids,
        split=indices,
        dropped=dropped,
    )


# ---------------------------------------------------------------------------
# delimited input


def load_delimited(path: str | Path, schema: FeatureSchema) -> TabularDataset:
    """Read a combined tabular file (comma-separated, header row, UTF-8).

    The header must carry every schema feature plus ``label`` (and
    optionally ``case_id``); unknown or missing headers are errors. Empty
    cells go down the imputation pathway.
    """
    path = Path(path)
    specs = schema.all_features()
    expected = {f.name for f in specs} | {"label"}
    optional = {"case_id"}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        unknown = [h for h in header if h not in expected | optional]
        if unknown:
            raise DataError(f"{path}: unknown header column(s) {unknown}")
        missing = sorted(expected - set(header))
        if missing:
            raise DataError(f"{path}: missing required column(s) {missing}")
        col_of = {h: i for i, h in enumerate(header)}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}"
                )
            rows.append(row)

    n = len(rows)
    columns: dict[str, np.ndarray] = {}
    for spec in specs:
        idx = col_of[spec.name]
        if spec.kind == "categorical":
            columns[spec.name] = np.array(
                [row[idx] if row[idx] != "" else None for row in rows], dtype=object
            )
        else:
            out = np.empty(n, dtype=np.float64)
            for r, row in enumerate(rows):
                cell = row[idx]
                if cell == "":
                    out[r] = np.nan
                    continue
                try:
                    out[r] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: line {r + 2}, column {spec.name!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
            columns[spec.name] = out

    y = np.empty(n, dtype=np.int64)
    for r, row in enumerate(rows):
        cell = row[col_of["label"]]
        if cell not in ("0", "1"):
            raise DataError(f"{path}: line {r + 2}: label must be 0 or 1, got {cell!r}")
        y[r] = int(cell)
    if "case_id" in col_of:
        case_ids = np.array([row[col_of["case_id"]] for row in rows], dtype=object)
    else:
        case_ids = np.array([str(i) for i in range(n)], dtype=object)

    dataset = TabularDataset(schema=schema, columns=columns, y=y, case_ids=case_ids)
    miss = dataset.missingness()
    gaps = {k: v for k, v in miss.items() if v}
    log.info("loaded %d rows from %s; missing cells per feature: %s", n, path, gaps or "none")
    return dataset


# ---------------------------------------------------------------------------
# dataset cache


def save_cache(prepared: PreparedDataset, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": "fgam-dataset-cache",
        "version": CACHE_FORMAT_VERSION,
        "schema": prepared.schema.to_dict(),
        "stats": prepared.stats.to_dict(),
        "static_names": prepared.static_names,
        "tv_names": prepared.tv_names,
        "static_cardinalities": list(prepared.static_cardinalities),
        "x_static": prepared.x_static.tolist(),
        "x_tv": prepared.x_tv.tolist(),
        "y": prepared.y.tolist(),
        "case_ids": prepared.case_ids.tolist(),
        "split": {
            "train": prepared.split.train.tolist(),
            "valid": prepared.split.valid.tolist(),
            "test": prepared.split.test.tolist(),
        },
        "dropped": prepared.dropped,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, separators=(",", ":"), sort_keys=True)
    return path


def load_cache(path: str | Path) -> PreparedDataset:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "fgam-dataset-cache":
        raise DataError(f"{path}: not a dataset cache file")
    if payload["version"] != CACHE_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported cache version {payload['version']}")
    return PreparedDataset(
        schema=FeatureSchema.from_dict(payload["schema"]),
        stats=StandardizationStats.from_dict(payload["stats"]),
        static_names=payload["static_names"],
        tv_names=payload["tv_names"],
        static_cardinalities=tuple(
            None if c is None else int(c) for c in payload["static_cardinalities"]
        ),
        x_static=np.asarray(payload["x_static"], dtype=np.float64).reshape(
            len(payload["y"]), -1
        )
        if payload["x_static"]
        else np.zeros((len(payload["y"]), 0)),
        x_tv=np.asarray(payload["x_tv"], dtype=np.float64).reshape(
            len(payload["y"]), -1
        )
        if payload["x_tv"]
        else np.zeros((len(payload["y"]), 0)),
        y=np.asarray(payload["y"], dtype=np.int64),
        case_ids=np.asarray(payload["case_ids"], dtype=object),
        split=SplitIndices(
            train=np.asarray(payload["split"]["train"], dtype=np.int64),
            valid=np.asarray(payload["split"]["valid"], dtype=np.int64),
            test=np.asarray(payload["split"]["test"], dtype=np.int64),
        ),
        dropped=payload.get("dropped", []),
    )


# ---------------------------------------------------------------------------
# case-level ingestion (base table + long-format series)

AKI_COLUMNS = (
    "preop_creatinine",
    "preop_creatinine_age_days",
    "on_dialysis",
    "postop_creatinine_48h",
)
ARF_COLUMNS = (
    "vent_hours_post",
    "reintubated_48h",
    "preop_ventilated",
    "second_surgery_48h",
    "died_48h",
)


def _parse_flag(cell: str) -> bool:
    return cell.strip() in ("1", "true", "True", "yes")


def _parse_series_cell(cell: str) -> list[float]:
    cell = cell.strip()
    if not cell:
        return []
    return [float(v) for v in cell.split(";")]


def read_timeseries(path: str | Path) -> dict[str, dict[str, list[tuple[float, float]]]]:
    """Long-format file (case_id, channel, t_seconds, value) grouped into
    per-case per-channel sample lists."""
    out: dict[str, dict[str, list[tuple[float, float]]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"case_id", "channel", "t_seconds", "value"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise DataError(f"{path}: header must contain {sorted(required)}")
        for row in reader:
            out.setdefault(row["case_id"], {}).setdefault(row["channel"], []).append(
                (float(row["t_seconds"]), float(row["value"]))
            )
    return out


def ingest_cases(
    base_path: str | Path,
    timeseries_path: str | Path,
    schema: FeatureSchema,
) -> tuple[TabularDataset, dict[str, int]]:
    """Build a labeled dataset from the two raw files.

    Cases whose outcome is undefined are excluded; the returned tally says
    how many fell to each exclusion so reports can account for them.
    """
    base_path = Path(base_path)
    series = read_timeseries(timeseries_path)
    declared = {f.name for f in schema.features}
    label_cols = (
        AKI_COLUMNS
        if schema.outcome == "aki"
        else ARF_COLUMNS
        if schema.outcome == "arf"
        else ("label",)
    )

    with open(base_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or [])
        needed = declared | set(label_cols) | {"case_id", "duration_seconds"}
        if any(c.per_kg for c in schema.channels):
            needed.add("weight")
        missing = sorted(needed - header)
        if missing:
            raise DataError(f"{base_path}: missing required column(s) {missing}")
        base_rows = list(reader)

    specs = schema.all_features()
    columns: dict[str, list] = {spec.name: [] for spec in specs}
    y: list[int] = []
    case_ids: list[str] = []
    exclusions = {"undefined_label": 0}

    for row in base_rows:
        case_id = row["case_id"]
        duration = float(row["duration_seconds"])
        weight = float(row["weight"]) if row.get("weight") else None

        if schema.outcome == "aki":
            label = label_aki(
                preop_creatinine=float(row["preop_creatinine"])
                if row["preop_creatinine"]
                else None,
                preop_age_days=float(row["preop_creatinine_age_days"])
                if row["preop_creatinine_age_days"]
                else None,
                postop_values_48h=_parse_series_cell(row["postop_creatinine_48h"]),
                on_dialysis=_parse_flag(row["on_dialysis"]),
            )
        elif schema.outcome == "arf":
            label = label_arf(
                ventilation_hours_post=float(row["vent_hours_post"] or 0.0),
                reintubated_48h=_parse_flag(row["reintubated_48h"]),
                preop_ventilated=_parse_flag(row["preop_ventilated"]),
                second_surgery_48h=_parse_flag(row["second_surgery_48h"]),
                died_48h=_parse_flag(row["died_48h"]),
            )
        else:
            label = POSITIVE if row["label"] == "1" else NEGATIVE
        if label == UNDEFINED:
            exclusions["undefined_label"] += 1
            continue

        case_channels = series.get(case_id, {})
        summary: dict[str, float] = {}
        for cspec in schema.channels:
            samples = sorted(case_channels.get(cspec.channel, []))
            times = [t for t, _ in samples]
            vals = [v for _, v in samples]
            summary.update(
                summarize_channel(times, vals, duration, cspec, weight_kg=weight)
            )
        if schema.compliance_feature:
            tv = sorted(case_channels.get("tidal_volume", []))
            pip = sorted(case_channels.get("pip", []))
            summary["compliance"] = compliance(
                tv[-1][1] if tv else float("nan"),
                pip[-1][1] if pip else float("nan"),
            )

        for spec in specs:
            if spec.name in summary:
                columns[spec.name].append(summary[spec.name])
            elif spec.kind == "categorical":
                columns[spec.name].append(row[spec.name] or None)
            else:
                cell = row[spec.name]
                columns[spec.name].append(float(cell) if cell else float("nan"))
        y.append(1 if label == POSITIVE else 0)
        case_ids.append(case_id)

    arrays = {}
    for spec in specs:
        if spec.kind == "categorical":
            arrays[spec.name] = np.array(columns[spec.name], dtype=object)
        else:
            arrays[spec.name] = np.array(columns[spec.name], dtype=np.float64)
    dataset = TabularDataset(
        schema=schema,
        columns=arrays,
        y=np.array(y, dtype=np.int64),
        case_ids=np.array(case_ids, dtype=object),
    )
    log.info(
        "ingested %d cases (%d excluded as undefined) from %s",
        dataset.n_rows,
        exclusions["undefined_label"],
        base_path,
    )
    return dataset, exclusions
