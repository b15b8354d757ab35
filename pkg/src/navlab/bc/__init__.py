"""
Behavior cloning

inflection weighting, 가중 NLL loss, replay 기반 학습 루프
"""

from .inflection import (
    TrainingError,
    dataset_inflection_sigma,
    inflection_mask,
    inflection_weights,
)
from .loss import (
    BCBatch,
    WeightedNLL,
    action_agreement,
    bc_loss,
    dataset_loss,
    demo_batches,
    weighted_nll,
)
from .trainer import METRIC_COLUMNS, BCRunResult, BCTrainer, BCUpdateStats, train_bc

__all__ = [
    # Inflection
    "inflection_mask",
    "inflection_weights",
    "dataset_inflection_sigma",
    # Loss
    "BCBatch",
    "WeightedNLL",
    "weighted_nll",
    "bc_loss",
    "demo_batches",
    "dataset_loss",
    "action_agreement",
    # Training
    "BCTrainer",
    "BCUpdateStats",
    "BCRunResult",
    "METRIC_COLUMNS",
    "train_bc",
    # Errors
    "TrainingError",
]
