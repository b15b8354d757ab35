"""
PPO clipped surrogate loss (recurrent minibatch)
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from common.config import PPOConfig
from navlab.autodiff import Tensor
from navlab.autodiff import functional as F
from navlab.policy import HiddenState, ObsBatch, PolicyParams, forward_sequence
from navlab.rollout import CollectedSegment

from .gae import FinetuneError
from .vpt import kl_divergence, kl_penalty


@dataclass
class PPOSequence:
    """
    env 열 묶음 하나의 전체 시퀀스 (T, n)

    hidden0 은 수집 시점 segment 시작 hidden 이고, bc_logits 는 VPT 모드에서
    기준 정책의 (T, n, 4) logit 입니다.
    """

    observations: List[ObsBatch]
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    episode_starts: np.ndarray
    hidden0: HiddenState
    bc_logits: Optional[np.ndarray] = None

    @classmethod
    def from_segment(
        cls,
        segment: CollectedSegment,
        columns: np.ndarray,
        advantages: np.ndarray,
        returns: np.ndarray,
        bc_logits: Optional[np.ndarray] = None,
    ) -> "PPOSequence":
        if segment.hidden0 is None:
            raise FinetuneError(f"worker {segment.worker_id}: segment 에 시작 hidden 이 없습니다")
        sub = segment.take(columns)
        return cls(
            observations=sub.observations,
            actions=sub.actions,
            old_log_probs=sub.log_probs,
            advantages=advantages[:, columns],
            returns=returns[:, columns],
            episode_starts=sub.episode_starts,
            hidden0=segment.hidden0.take(columns),
            bc_logits=None if bc_logits is None else bc_logits[:, columns],
        )

    @property
    def num_steps(self) -> int:
        return int(self.actions.size)


@dataclass
class PPOMinibatch:
    """recurrent minibatch (시퀀스 목록)"""

    sequences: List[PPOSequence]

    @property
    def num_steps(self) -> int:
        return sum(s.num_steps for s in self.sequences)

    def flat(self, name: str) -> np.ndarray:
        """시퀀스별 (T, n) 배열을 time-major 로 펼쳐 이어붙임"""
        return np.concatenate([getattr(s, name).reshape(-1) for s in self.sequences])


@dataclass
class PPOLossTerms:
    """total 은 tape 위 Tensor, 나머지는 로그용 스칼라"""

    total: Tensor
    policy_term: float
    value_term: float
    entropy: float
    kl: float
    grad_norm: float = float("nan")


def clipped_surrogate(
    log_probs: Tensor, old_log_probs: np.ndarray, advantages: np.ndarray, clip: float
) -> Tensor:
    """mean(min(r·Â, clip(r, 1−ε, 1+ε)·Â)), r = exp(log π − log π_old)"""
    ratio = F.exp(F.sub(log_probs, old_log_probs))
    unclipped = F.mul(ratio, advantages)
    clipped = F.mul(F.clip(ratio, 1.0 - clip, 1.0 + clip), advantages)
    return F.mean(F.minimum(unclipped, clipped))


def ppo_loss(
    minibatch: PPOMinibatch,
    params: PolicyParams,
    cfg: PPOConfig,
    phase: int = 2,
    rho: Optional[float] = None,
) -> PPOLossTerms:
    """
    minibatch 하나의 PPO loss

    total = −policy + value_loss_coef·value − entropy_coef·entropy
    phase 1 에서는 value 항만 사용하고, rho 가 주어지면 (VPT 모드) entropy 항 대신
    ρ·KL(π_BC ‖ π_θ) 를 더합니다.

    Args:
        minibatch: recurrent minibatch
        params: 현재 정책 파라미터
        cfg: PPO 설정
        phase: 1 (critic 만) 또는 2
        rho: VPT KL 계수 (None 이면 일반 PPO)

    Returns:
        PPOLossTerms

    Raises:
        FinetuneError: 빈 minibatch 또는 VPT 모드에서 bc_logits 가 없을 때
    """
    if not minibatch.sequences:
        raise FinetuneError("빈 PPO minibatch")

    all_logits, all_values = [], []
    for seq in minibatch.sequences:
        out = forward_sequence(seq.observations, seq.hidden0, seq.episode_starts, params)
        all_logits.append(out.logits)
        all_values.append(out.values)
    logits = F.concat(all_logits, axis=0) if len(all_logits) > 1 else all_logits[0]
    values = F.concat(all_values, axis=0) if len(all_values) > 1 else all_values[0]

    log_probs_all = F.log_softmax(logits, axis=1)
    chosen = F.gather(log_probs_all, minibatch.flat("actions"))
    policy = clipped_surrogate(
        chosen, minibatch.flat("old_log_probs"), minibatch.flat("advantages"), cfg.clip
    )
    value = F.mul(F.mean(F.square(F.sub(minibatch.flat("returns"), values))), 0.5)
    entropy = F.mean(F.neg(F.sum(F.mul(F.exp(log_probs_all), log_probs_all), axis=1)))

    kl_value = 0.0
    kl_term = None
    if rho is not None:
        if any(seq.bc_logits is None for seq in minibatch.sequences):
            raise FinetuneError("VPT 모드에는 기준 정책 logit 이 필요합니다")
        bc_logits = np.concatenate(
            [s.bc_logits.reshape(-1, s.bc_logits.shape[-1]) for s in minibatch.sequences]
        )
        kl_value = float(np.mean(kl_divergence(bc_logits, logits.data)))
        kl_term = kl_penalty(bc_logits, logits, rho)

    if phase == 1:
        total = F.mul(value, cfg.value_loss_coef)
    else:
        total = F.sub(F.mul(value, cfg.value_loss_coef), policy)
        if kl_term is not None:
            total = F.add(total, kl_term)
        elif cfg.entropy_coef > 0:
            total = F.sub(total, F.mul(entropy, cfg.entropy_coef))

    return PPOLossTerms(
        total=total,
        policy_term=policy.item(),
        value_term=value.item(),
        entropy=entropy.item(),
        kl=kl_value,
    )
