"""
Behavior cloning loss

loss = Σ w_t · (−log π(a_t | o_t)) / Σ w_t
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from common.config import PolicyConfig
from common.models import Demonstration
from navlab.autodiff import Tensor
from navlab.autodiff import functional as F
from navlab.demos import DemoError, replay
from navlab.gridnav import WorldRegistry
from navlab.policy import HiddenState, ObsBatch, PolicyParams, forward_sequence, initial_hidden
from navlab.rollout import CollectedSegment

from .inflection import TrainingError, inflection_weights


@dataclass
class BCBatch:
    """
    BPTT 창 하나 분량의 지도학습 배치

    배열은 (T, N) time-major 이며 episode_starts 가 True 인 step 직전에 hidden 이 0 으로
    초기화됩니다.
    """

    observations: List[ObsBatch]
    actions: np.ndarray
    weights: np.ndarray
    episode_starts: np.ndarray
    hidden0: HiddenState

    def __post_init__(self) -> None:
        if not self.observations:
            raise TrainingError("빈 BC 배치")
        shape = (len(self.observations), len(self.observations[0]))
        for name in ("actions", "weights", "episode_starts"):
            if getattr(self, name).shape != shape:
                raise TrainingError(f"BCBatch.{name} shape {getattr(self, name).shape} != {shape}")
        if np.any(self.weights <= 0):
            raise TrainingError("BC 가중치는 양수여야 합니다")

    @property
    def num_steps(self) -> int:
        return int(self.actions.size)

    @classmethod
    def from_segment(
        cls,
        segment: CollectedSegment,
        columns: np.ndarray,
        hidden0: HiddenState,
        sigma: float = 1.0,
    ) -> "BCBatch":
        """replay segment 의 일부 env 열로 배치 생성 (hidden0 은 그 열들의 carry)"""
        sub = segment.take(columns)
        return cls(
            observations=sub.observations,
            actions=sub.actions,
            weights=np.where(sub.inflections, float(sigma), 1.0),
            episode_starts=sub.episode_starts,
            hidden0=hidden0,
        )

    @classmethod
    def from_demo(
        cls,
        demo: Demonstration,
        registry: WorldRegistry,
        config: PolicyConfig,
        sigma: float = 1.0,
    ) -> "BCBatch":
        """
        데모 하나를 재생해 전체 에피소드 배치 생성 (N = 1)

        Raises:
            TrainingError: 빈 데모이거나 재생 실패
        """
        if demo.length == 0:
            raise TrainingError(f"{demo.episode_id}: 빈 데모")
        try:
            pairs = replay(demo, registry).pairs
        except DemoError as e:
            raise TrainingError(str(e)) from e
        actions = np.array([[int(a)] for _, a in pairs], dtype=np.int64)
        starts = np.zeros_like(actions, dtype=bool)
        starts[0] = True
        return cls(
            observations=[ObsBatch.from_observations([obs]) for obs, _ in pairs],
            actions=actions,
            weights=inflection_weights(actions[:, 0], sigma)[:, None],
            episode_starts=starts,
            hidden0=initial_hidden(config, 1),
        )


@dataclass
class WeightedNLL:
    """가중 NLL 의 분자 (tape 에 기록됨) 와 가중치 합"""

    numerator: Tensor
    weight_sum: float
    hidden: HiddenState
    logits: np.ndarray


def weighted_nll(batch: BCBatch, params: PolicyParams) -> WeightedNLL:
    """Σ w_t · (−log π(a_t | o_t)), 정규화 전"""
    out = forward_sequence(batch.observations, batch.hidden0, batch.episode_starts, params)
    chosen = F.gather(F.log_softmax(out.logits, axis=1), batch.actions.reshape(-1))
    numerator = F.neg(F.sum(F.mul(chosen, batch.weights.reshape(-1))))
    return WeightedNLL(
        numerator=numerator,
        weight_sum=float(batch.weights.sum()),
        hidden=out.hidden,
        logits=out.logits.data,
    )


def bc_loss(batch: BCBatch, params: PolicyParams) -> Tensor:
    """가중치 합으로 정규화한 BC loss (스칼라 Tensor)"""
    nll = weighted_nll(batch, params)
    return F.mul(nll.numerator, 1.0 / nll.weight_sum)


def demo_batches(
    demos: Sequence[Demonstration],
    registry: WorldRegistry,
    config: PolicyConfig,
    sigma: float = 1.0,
) -> List[BCBatch]:
    """평가용 데모별 배치 (빈 데모는 제외)"""
    return [BCBatch.from_demo(d, registry, config, sigma) for d in demos if d.length > 0]


def dataset_loss(params: PolicyParams, batches: Sequence[BCBatch]) -> float:
    """배치 전체의 가중 평균 NLL"""
    numerator, weights = _accumulate(params, batches)[:2]
    return numerator / weights


def action_agreement(params: PolicyParams, batches: Sequence[BCBatch]) -> float:
    """teacher forcing 상태에서 argmax 행동이 데모 행동과 같은 step 비율"""
    return _accumulate(params, batches)[2]


def _accumulate(
    params: PolicyParams, batches: Sequence[BCBatch]
) -> Tuple[float, float, float]:
    if not batches:
        raise TrainingError("평가할 BC 배치가 없습니다")
    numerator = 0.0
    weights = 0.0
    matches = 0
    steps = 0
    for batch in batches:
        nll = weighted_nll(batch, params)
        numerator += nll.numerator.item()
        weights += nll.weight_sum
        matches += int(np.sum(nll.logits.argmax(axis=1) == batch.actions.reshape(-1)))
        steps += batch.num_steps
    return numerator, weights, matches / steps
