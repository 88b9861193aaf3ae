"""Feature schema: which columns exist, their roles and kinds, and how raw
intraoperative series get summarized into tabular features.

Static features may be numeric, ordinal, or categorical; time-varying
features are quantitative or ordinal only, so categorical kinds are
rejected outside the static role.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

STATIC = "static"
TIME_VARYING = "time_varying"
ROLES = (STATIC, TIME_VARYING)
KINDS = ("numeric", "ordinal", "categorical")
STATISTICS = ("mean", "std", "min", "max")

SCHEMA_FORMAT_VERSION = 1


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    role: str
    kind: str = "numeric"
    units: str | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"{self.name}: unknown role {self.role!r}")
        if self.kind not in KINDS:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and self.role != STATIC:
            raise SchemaError(
                f"{self.name}: categorical features must be static "
                "(time-varying inputs are quantitative or ordinal)"
            )

    def to_dict(self) -> dict:
        out = {"name": self.name, "role": self.role, "kind": self.kind}
        if self.units:
            out["units"] = self.units
        return out


@dataclass(frozen=True)
class ThresholdSpec:
    direction: str  # "below" | "above"
    cutoff: float

    def __post_init__(self):
        if self.direction not in ("below", "above"):
            raise SchemaError("threshold direction must be below/above")
        object.__setattr__(self, "cutoff", float(self.cutoff))

    def feature_suffix(self) -> str:
        cutoff = f"{self.cutoff:g}".replace(".", "p")
        return f"frac_{self.direction}_{cutoff}"


@dataclass(frozen=True)
class ChannelSpec:
    """How one raw time-series channel folds into tabular features."""

    channel: str
    statistics: tuple[str, ...] = STATISTICS
    thresholds: tuple[ThresholdSpec, ...] = ()
    per_kg: bool = False  # normalize samples by patient weight first
    units: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "statistics", tuple(self.statistics))
        object.__setattr__(self, "thresholds", tuple(self.thresholds))
        for stat in self.statistics:
            if stat not in STATISTICS:
                raise SchemaError(f"{self.channel}: unknown statistic {stat!r}")

    def feature_names(self) -> list[str]:
        names = [f"{self.channel}_{stat}" for stat in self.statistics]
        names += [f"{self.channel}_{t.feature_suffix()}" for t in self.thresholds]
        return names


@dataclass
class FeatureSchema:
    features: list[FeatureSpec]
    channels: list[ChannelSpec] = field(default_factory=list)
    outcome: str = "label"  # "label" (provided column) | "aki" | "arf"
    compliance_feature: bool = False

    def __post_init__(self):
        names = [f.name for f in self.all_features()]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate feature names: {dupes}")
        if self.outcome not in ("label", "aki", "arf"):
            raise SchemaError(f"unknown outcome {self.outcome!r}")

    def all_features(self) -> list[FeatureSpec]:
        """Declared features plus the ones channel summarization will emit."""
        out = list(self.features)
        for spec in self.channels:
            units = spec.units
            for name in spec.feature_names():
                out.append(FeatureSpec(name, TIME_VARYING, "numeric", units))
        if self.compliance_feature:
            out.append(FeatureSpec("compliance", TIME_VARYING, "numeric", "mL/cmH2O"))
        return out

    def static_features(self) -> list[FeatureSpec]:
        return [f for f in self.all_features() if f.role == STATIC]

    def time_varying_features(self) -> list[FeatureSpec]:
        return [f for f in self.all_features() if f.role == TIME_VARYING]

    def feature(self, name: str) -> FeatureSpec:
        for f in self.all_features():
            if f.name == name:
                return f
        raise SchemaError(f"unknown feature {name!r}")

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_FORMAT_VERSION,
            "outcome": self.outcome,
            "compliance_feature": self.compliance_feature,
            "features": [f.to_dict() for f in self.features],
            "channels": [
                {
                    "channel": c.channel,
                    "statistics": list(c.statistics),
                    "thresholds": [
                        {"direction": t.direction, "cutoff": t.cutoff}
                        for t in c.thresholds
                    ],
                    "per_kg": c.per_kg,
                    **({"units": c.units} if c.units else {}),
                }
                for c in self.channels
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureSchema":
        version = payload.get("version", SCHEMA_FORMAT_VERSION)
        if version != SCHEMA_FORMAT_VERSION:
            raise SchemaError(f"unsupported schema version {version}")
        features = [
            FeatureSpec(
                name=f["name"],
                role=f["role"],
                kind=f.get("kind", "numeric"),
                units=f.get("units"),
            )
            for f in payload.get("features", [])
        ]
        channels = [
            ChannelSpec(
                channel=c["channel"],
                statistics=tuple(c.get("statistics", STATISTICS)),
                thresholds=tuple(
                    ThresholdSpec(t["direction"], float(t["cutoff"]))
                    for t in c.get("thresholds", [])
                ),
                per_kg=c.get("per_kg", False),
                units=c.get("units"),
            )
            for c in payload.get("channels", [])
        ]
        return cls(
            features=features,
            channels=channels,
            outcome=payload.get("outcome", "label"),
            compliance_feature=payload.get("compliance_feature", False),
        )

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        return cls.from_dict(json.loads(Path(path).read_text()))


def clinical_channel_specs() -> list[ChannelSpec]:
    """Intraoperative vital-sign channels with the standard cutoff families.

    Pulse oximetry omits its max (ceiling effect); peak inspiratory pressure
    and tidal volume omit their min (not clinically meaningful).
    """
    below = lambda *cs: tuple(ThresholdSpec("below", c) for c in cs)
    above = lambda *cs: tuple(ThresholdSpec("above", c) for c in cs)
    return [
        ChannelSpec("map", thresholds=below(55, 60, 65), units="mmHg"),
        ChannelSpec("sbp", units="mmHg"),
        ChannelSpec("dbp", units="mmHg"),
        ChannelSpec(
            "hr", thresholds=above(100, 110, 120) + below(60, 55, 50), units="bpm"
        ),
        ChannelSpec(
            "spo2", statistics=("mean", "std", "min"), thresholds=below(90, 85),
            units="%",
        ),
        ChannelSpec("temp", thresholds=below(36, 35.5), units="degC"),
        ChannelSpec("resp_rate", units="breaths/min"),
        ChannelSpec(
            "tidal_volume",
            statistics=("mean", "std", "max"),
            thresholds=above(10),
            per_kg=True,
            units="mL/kg",
        ),
        ChannelSpec(
            "pip", statistics=("mean", "std", "max"), thresholds=above(30),
            units="cmH2O",
        ),
        ChannelSpec("peep", units="cmH2O"),
        ChannelSpec("fio2", units="fraction"),
        ChannelSpec("etco2", thresholds=above(50) + below(30), units="mmHg"),
        ChannelSpec("et_agent", units="MAC"),
    ]


def clinical_demo_schema(outcome: str = "aki") -> FeatureSchema:
    """A compact clinical-style schema: demographics and preop values as
    statics, medication totals plus channel summaries as time-varying."""
    statics = [
        FeatureSpec("age", STATIC, "numeric", "years"),
        FeatureSpec("sex", STATIC, "categorical"),
        FeatureSpec("weight", STATIC, "numeric", "kg"),
        FeatureSpec("asa_status", STATIC, "ordinal"),
        FeatureSpec("charlson_index", STATIC, "ordinal"),
        FeatureSpec("surgery_type", STATIC, "categorical"),
        FeatureSpec("preop_creatinine", STATIC, "numeric", "mg/dL"),
        FeatureSpec("preop_hematocrit", STATIC, "numeric", "%"),
    ]
    meds = [
        FeatureSpec("crystalloid_total", TIME_VARYING, "numeric", "mL"),
        FeatureSpec("phenylephrine_total", TIME_VARYING, "numeric", "mcg/kg"),
        FeatureSpec("fentanyl_total", TIME_VARYING, "numeric", "mcg"),
    ]
    return FeatureSchema(
        features=statics + meds,
        channels=clinical_channel_specs(),
        outcome=outcome,
        compliance_feature=True,
    )
