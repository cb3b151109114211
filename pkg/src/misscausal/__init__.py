"""Causal DAG discovery from incomplete data with an actor-critic search."""

from .critic import RewardBreakdown, bic_score, compute_reward, exhaustive_best_graph
from .datagen import (
    GroundTruthGraph,
    MaskedDataset,
    apply_missingness,
    generate_dag,
    graph_from_edges,
    load_csv,
    simulate_sem,
    standardize,
)
from .imputer import impute, imputation_rmse, mean_impute, pretrain_adversarial
from .metrics import GraphMetrics, compute_metrics
from .numcore import RngStream
from .trainer import TrainConfig, Trainer, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "GraphMetrics",
    "GroundTruthGraph",
    "MaskedDataset",
    "RewardBreakdown",
    "RngStream",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "apply_missingness",
    "bic_score",
    "compute_metrics",
    "compute_reward",
    "exhaustive_best_graph",
    "generate_dag",
    "graph_from_edges",
    "impute",
    "imputation_rmse",
    "load_csv",
    "mean_impute",
    "pretrain_adversarial",
    "simulate_sem",
    "standardize",
    "train",
]
