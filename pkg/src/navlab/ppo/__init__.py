"""
PPO finetuning

GAE, clipped surrogate loss, critic 선학습 + actor warmup 스케줄, VPT 방식 KL 패널티
"""

from .buffer import RolloutBuffer
from .gae import FinetuneError, compute_gae
from .loss import PPOLossTerms, PPOMinibatch, PPOSequence, clipped_surrogate, ppo_loss
from .schedule import ALWAYS_FROZEN, ScheduleState, lr_schedule, schedule_state
from .trainer import (
    METRIC_COLUMNS,
    PPOTrainer,
    PPOUpdateStats,
    RLRunResult,
    check_policy_env,
    ppo_update,
    reset_critic,
    train_rl_finetune,
)
from .vpt import kl_divergence, kl_penalty, rho_step

__all__ = [
    # Advantage
    "compute_gae",
    "RolloutBuffer",
    # Loss
    "PPOSequence",
    "PPOMinibatch",
    "PPOLossTerms",
    "clipped_surrogate",
    "ppo_loss",
    "kl_divergence",
    "kl_penalty",
    "rho_step",
    # Schedule
    "ScheduleState",
    "ALWAYS_FROZEN",
    "lr_schedule",
    "schedule_state",
    # Training
    "PPOTrainer",
    "PPOUpdateStats",
    "RLRunResult",
    "METRIC_COLUMNS",
    "ppo_update",
    "reset_critic",
    "check_policy_env",
    "train_rl_finetune",
    # Errors
    "FinetuneError",
]
