"""Matplotlib renders for the report paths: ROC/PR panels, training
history, and per-feature contribution curves with optional two-profile
overlay."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import EvalReport
from .train import TrainHistory

PROFILE_COLORS = ("#1f77b4", "#ff7f0e")  # blue / orange overlay pair


def render_eval_figure(report: EvalReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, (ax_roc, ax_pr) = plt.subplots(1, 2, figsize=(9, 4))

    ax_roc.plot(report.roc_points[:, 0], report.roc_points[:, 1], lw=1.8)
    ax_roc.plot([0, 1], [0, 1], ls="--", lw=0.8, color="grey")
    ax_roc.set_xlabel("False positive rate")
    ax_roc.set_ylabel("True positive rate")
    ax_roc.set_title(
        f"ROC  AUROC {report.auroc:.3f} "
        f"[{report.auroc_ci[0]:.3f}, {report.auroc_ci[1]:.3f}]"
    )

    prevalence = report.n_pos / (report.n_pos + report.n_neg)
    ax_pr.plot(report.pr_points[:, 0], report.pr_points[:, 1], lw=1.8)
    ax_pr.axhline(prevalence, ls="--", lw=0.8, color="grey")
    ax_pr.set_xlabel("Recall")
    ax_pr.set_ylabel("Precision")
    ax_pr.set_ylim(0, 1.02)
    ax_pr.set_title(
        f"PR  AUPRC {report.auprc:.3f} "
        f"[{report.auprc_ci[0]:.3f}, {report.auprc_ci[1]:.3f}]"
    )

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_history_figure(history: TrainHistory, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    epochs = list(history.epochs())
    fig, (ax_loss, ax_auc) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax_loss.plot(epochs, history.train_loss, label="train")
    ax_loss.plot(epochs, history.valid_loss, label="validation")
    ax_loss.axvline(history.best_epoch, ls=":", lw=0.8, color="grey")
    ax_loss.set_xlabel("Epoch")
    ax_loss.set_ylabel("Cross entropy")
    ax_loss.legend(frameon=False)
    ax_auc.plot(epochs, history.valid_auroc, color="#2ca02c")
    ax_auc.set_xlabel("Epoch")
    ax_auc.set_ylabel("Validation AUROC")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_contribution_curves(
    curves: dict[str, list[dict]],
    path: str | Path,
    profile_labels: tuple[str, ...] = ("profile A",),
) -> Path:
    """Panel grid of per-feature contribution curves.

    ``curves`` maps feature name to one curve payload per profile (the
    dicts from explain.curve_payload); markers show each profile's current
    value.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(curves)
    cols = min(3, max(1, len(names)))
    rows = math.ceil(len(names) / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.2 * rows), squeeze=False)

    for i, name in enumerate(names):
        ax = axes[i // cols][i % cols]
        for k, payload in enumerate(curves[name]):
            color = PROFILE_COLORS[k % len(PROFILE_COLORS)]
            ax.plot(payload["x"], payload["contribution"], color=color,
                    label=profile_labels[k] if k < len(profile_labels) else None)
            current = payload["current"]
            if current["value"] is not None:
                ax.plot(
                    [current["value"]], [current["contribution"]],
                    marker="o", ms=5, color=color,
                )
        ax.set_title(name, fontsize=10)
        ax.set_xlabel("feature value")
        ax.set_ylabel("contribution to logit")
    for j in range(len(names), rows * cols):
        axes[j // cols][j % cols].axis("off")
    if len(profile_labels) > 1:
        axes[0][0].legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
