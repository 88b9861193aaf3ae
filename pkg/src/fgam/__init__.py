"""Factored generalized additive models for interpretable risk prediction.

Per-feature shape networks transform time-varying inputs; a shared trunk
over the static profile emits context-dependent weights and a bias; the
sigmoid of the weighted sum is the predicted risk. The factorization keeps
every prediction exactly decomposable into per-feature contributions.
"""

from .metrics import EvalReport, auprc, auroc, evaluate, hanley_mcneil_ci
from .model import (
    ContributionReport,
    FGamConfig,
    FGamParams,
    backward,
    contribution_curve,
    contributions,
    forward,
    init_params,
    make_degenerate,
)
from .persistence import ModelBundle, load_model, save_model
from .pipeline import (
    PreparedDataset,
    TabularDataset,
    compliance,
    label_aki,
    label_arf,
    load_delimited,
    prepare,
    summarize_channel,
)
from .schema import ChannelSpec, FeatureSchema, FeatureSpec, ThresholdSpec
from .synthetic import SyntheticSpec, SyntheticTruth, default_interaction_spec, generate
from .train import TrainConfig, TrainHistory, cross_entropy, split, train_arrays

__version__ = "0.1.0"
