"""
평가 결과 모델
"""

from enum import Enum
from typing import Dict

from pydantic import BaseModel, Field


class FailureTag(str, Enum):
    """실패 원인 분류"""

    NONE = "NONE"
    LAST_MILE = "LAST_MILE"
    RECOGNITION = "RECOGNITION"
    LOOPING = "LOOPING"
    EXPLORATION = "EXPLORATION"
    # 아래는 grid world 에서 발생하지 않음 (태깅되지 않는 분류)
    MISSING_ANNOTATION = "MISSING_ANNOTATION"
    INTER_FLOOR = "INTER_FLOOR"
    NAVMESH_FAILURE = "NAVMESH_FAILURE"
    SEMANTIC_CONFUSION = "SEMANTIC_CONFUSION"


TAGGABLE_FAILURES = (
    FailureTag.LAST_MILE,
    FailureTag.RECOGNITION,
    FailureTag.LOOPING,
    FailureTag.EXPLORATION,
)


class EvalRecord(BaseModel):
    """
    에피소드 하나의 평가 결과

    성공 판정은 목표 물체까지 Chebyshev 반경 안에 멈추는 것이고 geodesic_len 은 물체 셀까지의
    최단 거리이므로, 성공 에피소드에서 path_len 이 geodesic_len 보다 작을 수 있습니다.
    SPL 은 l / max(p, l) 로 계산해 1 을 넘지 않습니다.
    """

    episode_id: str
    success: bool
    path_len: int = Field(..., ge=0, description="FORWARD 로 이동한 셀 수")
    geodesic_len: int = Field(..., ge=1)
    steps: int = Field(..., ge=0)
    goal_ever_in_view: bool
    final_distance_to_goal: int = Field(..., ge=0, description="종료 시 가장 가까운 목표까지 Chebyshev 거리")
    visit_histogram: Dict[str, int] = Field(default_factory=dict, description="'row,col' → 방문 횟수")
    failure_tag: FailureTag = FailureTag.NONE

    @property
    def max_revisits(self) -> int:
        return max(self.visit_histogram.values(), default=0)


class EvalSummary(BaseModel):
    """평가 집계"""

    success: float = Field(..., ge=0.0, le=1.0)
    spl: float = Field(..., ge=0.0, le=1.0)
    n: int = Field(..., ge=1)
    mode: str = "argmax"
    failure_histogram: Dict[str, int] = Field(default_factory=dict)
