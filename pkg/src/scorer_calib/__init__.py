"""Scorer bias and temperature models for ordinal automated scoring."""

from .core import (
    DataError, DataPoint, Dataset, FoldPlan, ResponseFeatures, ScoreScale, ScorerStats,
    filter_sparse_scorers, load_dataset, make_folds, save_dataset, scorer_summary, seeded_rng,
)
from .analysis import (
    GmmModel, case_study, cluster_embeddings, cluster_profiles, correlation_matrix, fit_gmm, pca_2d,
    pearson, scorer_variables,
)
from .head import ContentHead, ScorerSpecificHead, UniversalHead, init_head
from .loss import LossKind, batch_loss, ce_loss, mse_loss, oll_loss
from .metrics import EvalResult, KappaWeighting, auc_averaged, evaluate, kappa, rmse
from .optim import Adam, TrainConfig, TrainReport, cross_validate, train
from .synth import GroundTruth, SynthConfig, default_archetypes, generate, preset, recovery_report

__version__ = "0.1.0"
