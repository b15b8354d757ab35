"""
Policy model

actor-critic 네트워크, 행동 선택, 체크포인트
"""

from .io import load_policy, save_policy
from .model import (
    GROUP_NAMES,
    HiddenState,
    ObsBatch,
    PolicyError,
    PolicyOutput,
    PolicyParams,
    SequenceOutput,
    as_batch,
    embedding_dim,
    encode_observation,
    forward_sequence,
    init_policy,
    initial_hidden,
    policy_forward,
)
from .sampling import argmax_action, log_probs, probs, sample_action

__all__ = [
    # Model
    "PolicyParams",
    "HiddenState",
    "PolicyOutput",
    "SequenceOutput",
    "ObsBatch",
    "GROUP_NAMES",
    "init_policy",
    "initial_hidden",
    "embedding_dim",
    "as_batch",
    "encode_observation",
    "policy_forward",
    "forward_sequence",
    # Sampling
    "sample_action",
    "argmax_action",
    "log_probs",
    "probs",
    # Checkpoint
    "save_policy",
    "load_policy",
    # Errors
    "PolicyError",
]
