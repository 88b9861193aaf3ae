"""Ranking metrics: ROC / precision-recall curves, AUROC, AUPRC, and
normal-approximation confidence intervals for the AUC.

AUROC is computed from the rank statistic (tie credit 0.5), which is exact
and deterministic; the plotted trapezoid agrees with it absent ties. AUPRC
is average precision with right-continuous steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm, rankdata


class SingleClassError(ValueError):
    """Metric undefined because only one label class is present."""


def _validated(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be binary 0/1")
    return scores, labels.astype(np.int64)


def auroc(scores, labels) -> float:
    """Probability a random positive outranks a random negative (ties: 0.5)."""
    scores, labels = _validated(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUROC needs at least one positive and one negative")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auprc(scores, labels) -> float:
    """Average precision: sum of precision at each recall step."""
    scores, labels = _validated(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise SingleClassError("AUPRC needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # group tied scores into single thresholds
    boundaries = np.flatnonzero(np.diff(s)) + 1
    tp = np.cumsum(y)[np.append(boundaries - 1, y.size - 1)]
    seen = np.append(boundaries, y.size)
    precision = tp / seen
    recall = tp / n_pos
    return float(np.sum(np.diff(np.append(0.0, recall)) * precision))


def hanley_mcneil_ci(
    auc: float, n_pos: int, n_neg: int, level: float = 0.95
) -> tuple[float, float]:
    """Symmetric normal-approximation CI for an AUC, clipped to [0, 1]."""
    if not 0.0 <= auc <= 1.0:
        raise ValueError("auc must lie in [0, 1]")
    if n_pos < 1 or n_neg < 1:
        raise ValueError("class counts must be >= 1")
    se = hanley_mcneil_se(auc, n_pos, n_neg)
    z = norm.ppf(0.5 + level / 2.0)
    return max(0.0, auc - z * se), min(1.0, auc + z * se)


def hanley_mcneil_se(auc: float, n_pos: int, n_neg: int) -> float:
    a = auc
    q1 = a / (2.0 - a)
    q2 = 2.0 * a * a / (1.0 + a)
    var = (
        a * (1.0 - a) + (n_pos - 1) * (q1 - a * a) + (n_neg - 1) * (q2 - a * a)
    ) / (n_pos * n_neg)
    return float(np.sqrt(max(var, 0.0)))


def roc_points(scores, labels) -> np.ndarray:
    """(fpr, tpr) pairs swept over unique score thresholds, (0,0) first."""
    scores, labels = _validated(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC needs both classes")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    boundaries = np.append(np.flatnonzero(np.diff(s)) + 1, y.size) - 1
    tp = np.cumsum(y)[boundaries]
    fp = np.cumsum(1 - y)[boundaries]
    pts = np.column_stack([fp / n_neg, tp / n_pos])
    return np.vstack([[0.0, 0.0], pts])


def pr_points(scores, labels) -> np.ndarray:
    """(recall, precision) pairs swept over unique score thresholds."""
    scores, labels = _validated(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise SingleClassError("PR curve needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    boundaries = np.append(np.flatnonzero(np.diff(s)) + 1, y.size) - 1
    tp = np.cumsum(y)[boundaries]
    seen = boundaries + 1
    return np.column_stack([tp / n_pos, tp / seen])


@dataclass
class EvalReport:
    auroc: float
    auroc_ci: tuple[float, float]
    auprc: float
    auprc_ci: tuple[float, float]
    n_pos: int
    n_neg: int
    roc_points: np.ndarray = field(repr=False)
    pr_points: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "auroc_ci": list(self.auroc_ci),
            "auprc": self.auprc,
            "auprc_ci": list(self.auprc_ci),
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "roc_points": self.roc_points.tolist(),
            "pr_points": self.pr_points.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalReport":
        return cls(
            auroc=payload["auroc"],
            auroc_ci=tuple(payload["auroc_ci"]),
            auprc=payload["auprc"],
            auprc_ci=tuple(payload["auprc_ci"]),
            n_pos=payload["n_pos"],
            n_neg=payload["n_neg"],
            roc_points=np.asarray(payload["roc_points"], dtype=np.float64),
            pr_points=np.asarray(payload["pr_points"], dtype=np.float64),
        )

    def summary_lines(self) -> list[str]:
        return [
            f"AUROC {self.auroc:.4f}  95% CI [{self.auroc_ci[0]:.4f}, {self.auroc_ci[1]:.4f}]",
            f"AUPRC {self.auprc:.4f}  95% CI [{self.auprc_ci[0]:.4f}, {self.auprc_ci[1]:.4f}]",
            f"positives {self.n_pos}  negatives {self.n_neg}",
        ]


def evaluate(scores, labels, level: float = 0.95) -> EvalReport:
    scores, labels = _validated(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    a_roc = auroc(scores, labels)
    a_prc = auprc(scores, labels)
    return EvalReport(
        auroc=a_roc,
        auroc_ci=hanley_mcneil_ci(a_roc, n_pos, n_neg, level),
        auprc=a_prc,
        auprc_ci=hanley_mcneil_ci(a_prc, n_pos, n_neg, level),
        n_pos=n_pos,
        n_neg=n_neg,
        roc_points=roc_points(scores, labels),
        pr_points=pr_points(scores, labels),
    )


def write_curve_files(report: EvalReport, out_dir: str | Path) -> tuple[Path, Path]:
    """One CSV per curve, one row per threshold, for external plotting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    roc_path = out_dir / "roc_curve.csv"
    pr_path = out_dir / "pr_curve.csv"
    with open(roc_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        writer.writerows(report.roc_points.tolist())
    with open(pr_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["recall", "precision"])
        writer.writerows(report.pr_points.tolist())
    return roc_path, pr_path
