"""
Rollout buffer

수집 결과에 GAE advantage/return 을 붙이고 env 열 단위로 recurrent minibatch 를 만듭니다.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from navlab.rollout import CollectedSegment, CollectResult, partition_envs

from .gae import FinetuneError, compute_gae
from .loss import PPOMinibatch, PPOSequence


@dataclass
class RolloutBuffer:
    """segment 별 (T, N) advantage / return (무효 env 열은 minibatch 에 들어가지 않음)"""

    segments: List[CollectedSegment]
    advantages: List[np.ndarray]
    returns: List[np.ndarray]
    reference_logits: Optional[List[np.ndarray]] = None

    @classmethod
    def from_result(
        cls,
        result: CollectResult,
        gamma: float,
        gae_tau: float,
        normalize_advantage: bool = False,
        reference_logits: Optional[Sequence[np.ndarray]] = None,
    ) -> "RolloutBuffer":
        """
        CollectResult 로 버퍼 생성

        잘린 segment 는 잘린 지점의 bootstrap value 로 이어 계산합니다.

        Args:
            result: 정책 모드 수집 결과
            gamma: 할인율
            gae_tau: GAE λ
            normalize_advantage: 유효 step 전체로 advantage 정규화
            reference_logits: segment 별 (T, N, 4) 기준 정책 logit (VPT 모드)

        Raises:
            FinetuneError: replay 모드 결과이거나 reference_logits 길이가 맞지 않을 때
        """
        if not result.mode.uses_policy:
            raise FinetuneError(f"{result.mode.value} 모드 결과로는 PPO 버퍼를 만들 수 없습니다")
        if reference_logits is not None and len(reference_logits) != len(result.segments):
            raise FinetuneError("reference_logits 와 segment 수가 다릅니다")

        advantages, returns = [], []
        for segment in result.segments:
            adv, ret = compute_gae(
                segment.rewards,
                segment.values,
                segment.dones,
                segment.bootstrap_value,
                gamma,
                gae_tau,
            )
            advantages.append(adv)
            returns.append(ret)

        if normalize_advantage:
            pooled = np.concatenate(
                [adv[:, s.valid].reshape(-1) for adv, s in zip(advantages, result.segments)]
            )
            if pooled.size > 1:
                mean, std = pooled.mean(), pooled.std()
                advantages = [(adv - mean) / (std + 1e-8) for adv in advantages]

        return cls(
            segments=list(result.segments),
            advantages=advantages,
            returns=returns,
            reference_logits=None if reference_logits is None else list(reference_logits),
        )

    @property
    def env_steps(self) -> int:
        return sum(s.env_steps for s in self.segments)

    def minibatches(self, num_minibatches: int, rng: np.random.Generator) -> List[PPOMinibatch]:
        """유효 env 열을 섞어 num_minibatches 개로 분할 (빈 minibatch 는 생략)"""
        index = {id(segment): i for i, segment in enumerate(self.segments)}
        out = []
        for groups in partition_envs(self.segments, num_minibatches, rng):
            sequences = []
            for segment, columns in groups:
                i = index[id(segment)]
                sequences.append(
                    PPOSequence.from_segment(
                        segment,
                        columns,
                        self.advantages[i],
                        self.returns[i],
                        None if self.reference_logits is None else self.reference_logits[i],
                    )
                )
            out.append(PPOMinibatch(sequences))
        return out
