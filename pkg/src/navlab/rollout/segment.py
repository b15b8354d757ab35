"""
수집된 경험 segment 모델
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from common.models import ACTION_CODES, Action
from navlab.policy import HiddenState, ObsBatch


class RolloutError(Exception):
    """경험 수집 에러"""

    pass


class RolloutMode(str, Enum):
    """행동 선택 방식"""

    SAMPLE = "sample"
    ARGMAX = "argmax"
    REPLAY = "replay"

    @property
    def uses_policy(self) -> bool:
        return self is not RolloutMode.REPLAY


@dataclass(frozen=True)
class EpisodeOutcome:
    """segment 안에서 끝난 에피소드"""

    episode_id: str
    success: bool
    episode_return: float
    steps: int


@dataclass
class CollectedSegment:
    """
    worker 하나가 한 번의 수집에서 만든 경험

    배열은 (T, N) 이며 T 는 실제 진행한 step 수 (선점되면 rollout_len 보다 작음),
    N 은 worker 의 env 수입니다. episode_starts[t, i] 는 step t 직전에 에피소드가
    시작되었음을 뜻하며 hidden 은 그 step 전에 0 으로 초기화됩니다.
    """

    worker_id: int
    observations: List[ObsBatch]
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    episode_starts: np.ndarray
    inflections: np.ndarray
    bootstrap_value: np.ndarray
    valid: np.ndarray
    hidden0: Optional[HiddenState] = None
    truncated_at: Optional[int] = None
    finished: List[EpisodeOutcome] = field(default_factory=list)

    @property
    def length(self) -> int:
        return int(self.actions.shape[0])

    @property
    def num_envs(self) -> int:
        return int(self.valid.shape[0])

    @property
    def truncated(self) -> bool:
        return self.truncated_at is not None

    @property
    def env_steps(self) -> int:
        """학습에 쓰이는 env step 수 (무효 env 제외)"""
        return self.length * int(np.count_nonzero(self.valid))

    def valid_columns(self) -> np.ndarray:
        return np.flatnonzero(self.valid)

    def take(self, columns: np.ndarray) -> "CollectedSegment":
        """선택한 env 열만 남긴 segment (에피소드 결과 목록은 비움)"""
        columns = np.asarray(columns, dtype=np.int64)
        return CollectedSegment(
            worker_id=self.worker_id,
            observations=[batch.take(columns) for batch in self.observations],
            actions=self.actions[:, columns],
            log_probs=self.log_probs[:, columns],
            values=self.values[:, columns],
            rewards=self.rewards[:, columns],
            dones=self.dones[:, columns],
            episode_starts=self.episode_starts[:, columns],
            inflections=self.inflections[:, columns],
            bootstrap_value=self.bootstrap_value[columns],
            valid=self.valid[columns],
            hidden0=None if self.hidden0 is None else self.hidden0.take(columns),
            truncated_at=self.truncated_at,
        )

    def to_dump(self) -> "SegmentDump":
        codes = [
            "".join(ACTION_CODES[Action(int(a))] for a in self.actions[:, i])
            for i in range(self.num_envs)
        ]
        return SegmentDump(
            worker_id=self.worker_id,
            length=self.length,
            truncated_at=self.truncated_at,
            valid=[bool(v) for v in self.valid],
            actions=codes,
            rewards=self.rewards.T.tolist(),
            dones=self.dones.T.tolist(),
            episode_starts=self.episode_starts.T.tolist(),
            bootstrap_value=self.bootstrap_value.tolist(),
        )


class SegmentDump(BaseModel):
    """디버그 덤프용 segment 요약 (env 별 행)"""

    worker_id: int
    length: int
    truncated_at: Optional[int] = None
    valid: List[bool]
    actions: List[str] = Field(..., description="env 별 F/L/R/S 행동 문자열")
    rewards: List[List[float]]
    dones: List[List[bool]]
    episode_starts: List[List[bool]]
    bootstrap_value: List[float]


@dataclass
class CollectResult:
    """collect 한 번의 결과"""

    segments: List[CollectedSegment]
    mode: RolloutMode
    round_index: int

    @property
    def env_steps(self) -> int:
        return sum(s.env_steps for s in self.segments)

    @property
    def truncated_workers(self) -> List[int]:
        return [s.worker_id for s in self.segments if s.truncated]

    @property
    def finished(self) -> List[EpisodeOutcome]:
        return [o for s in self.segments for o in s.finished]

    def mean_return(self) -> float:
        """끝난 에피소드의 평균 return (없으면 nan)"""
        outcomes = self.finished
        if not outcomes:
            return float("nan")
        return float(np.mean([o.episode_return for o in outcomes]))

    def success_rate(self) -> float:
        outcomes = self.finished
        if not outcomes:
            return float("nan")
        return float(np.mean([o.success for o in outcomes]))


EnvGroup = Tuple[CollectedSegment, np.ndarray]


def partition_envs(
    segments: Sequence[CollectedSegment], num_minibatches: int, rng: np.random.Generator
) -> List[List[EnvGroup]]:
    """
    유효한 env 열(전체 시퀀스 단위)을 minibatch 로 나눔

    각 minibatch 는 (원본 segment, 열 index) 목록이며 열 index 는 오름차순입니다.
    env 수가 minibatch 수보다 적으면 빈 minibatch 는 생략됩니다.

    Args:
        segments: 수집된 segment
        num_minibatches: minibatch 수
        rng: env 순서를 섞는 난수 생성기

    Returns:
        minibatch 별 EnvGroup 목록
    """
    if num_minibatches < 1:
        raise RolloutError(f"minibatch 수는 1 이상이어야 합니다 ({num_minibatches})")
    pairs = [
        (index, int(column))
        for index, segment in enumerate(segments)
        if segment.length > 0
        for column in segment.valid_columns()
    ]
    if not pairs:
        return []
    order = rng.permutation(len(pairs))
    minibatches: List[List[EnvGroup]] = []
    for chunk in np.array_split(order, num_minibatches):
        if len(chunk) == 0:
            continue
        by_segment: Dict[int, List[int]] = {}
        for k in chunk:
            index, column = pairs[int(k)]
            by_segment.setdefault(index, []).append(column)
        minibatches.append(
            [
                (segments[i], np.array(sorted(cols), dtype=np.int64))
                for i, cols in sorted(by_segment.items())
            ]
        )
    return minibatches
