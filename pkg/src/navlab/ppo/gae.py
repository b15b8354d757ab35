"""
Generalized Advantage Estimation
"""

from typing import Tuple

import numpy as np

from navlab.bc import TrainingError


class FinetuneError(TrainingError):
    """RL finetuning 에러"""

    pass


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: np.ndarray,
    gamma: float,
    gae_tau: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    segment 의 advantage 와 return 계산

    δ_t = r_t + γ·V_{t+1}·(1 − done_t) − V_t
    Â_t = δ_t + γ·τ·(1 − done_t)·Â_{t+1}
    R_t = Â_t + V_t

    Args:
        rewards: (T, ...) 보상
        values: (T, ...) 수집 시점의 value 예측
        dones: (T, ...) step t 에서 에피소드가 끝났는지
        bootstrap_value: (...) segment 다음 step 의 value (잘린 segment 포함)
        gamma: 할인율
        gae_tau: GAE λ

    Returns:
        (advantages, returns), 둘 다 values 와 같은 shape

    Raises:
        FinetuneError: shape 가 맞지 않을 때
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    bootstrap_value = np.asarray(bootstrap_value, dtype=np.float64)
    if rewards.shape != values.shape or dones.shape != values.shape:
        raise FinetuneError(
            f"compute_gae: shape 불일치 rewards {rewards.shape}, values {values.shape}, "
            f"dones {dones.shape}"
        )
    if bootstrap_value.shape != values.shape[1:]:
        raise FinetuneError(
            f"compute_gae: bootstrap shape {bootstrap_value.shape} != {values.shape[1:]}"
        )

    advantages = np.zeros_like(values)
    not_done = 1.0 - dones.astype(np.float64)
    next_value = bootstrap_value
    next_advantage = np.zeros_like(bootstrap_value)
    for t in range(values.shape[0] - 1, -1, -1):
        delta = rewards[t] + gamma * next_value * not_done[t] - values[t]
        next_advantage = delta + gamma * gae_tau * not_done[t] * next_advantage
        advantages[t] = next_advantage
        next_value = values[t]
    return advantages, advantages + values
