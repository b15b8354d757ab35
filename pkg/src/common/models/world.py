"""
GridNav 도메인 모델

행동, 방향, 에피소드 등 world 와 에피소드를 표현하는 타입
"""

from enum import Enum, IntEnum
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

Cell = Tuple[int, int]  # (row, col)


class Action(IntEnum):
    """에이전트 행동 (4개)"""

    FORWARD = 0
    TURN_LEFT = 1
    TURN_RIGHT = 2
    STOP = 3

    @property
    def code(self) -> str:
        return ACTION_CODES[self]

    @classmethod
    def from_code(cls, code: str) -> "Action":
        try:
            return _CODE_TO_ACTION[code]
        except KeyError:
            raise ValueError(f"알 수 없는 행동 코드: {code!r}") from None


ACTION_CODES = {Action.FORWARD: "F", Action.TURN_LEFT: "L", Action.TURN_RIGHT: "R", Action.STOP: "S"}
_CODE_TO_ACTION = {v: k for k, v in ACTION_CODES.items()}
NUM_ACTIONS = len(Action)


class Heading(IntEnum):
    """방향 (시계 방향 순서)"""

    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def delta(self) -> Cell:
        """한 칸 전진 시 (drow, dcol)"""
        return _HEADING_DELTAS[self]

    def turned(self, action: Action) -> "Heading":
        if action == Action.TURN_LEFT:
            return Heading((self - 1) % 4)
        if action == Action.TURN_RIGHT:
            return Heading((self + 1) % 4)
        return self


_HEADING_DELTAS = {Heading.N: (-1, 0), Heading.E: (0, 1), Heading.S: (1, 0), Heading.W: (0, -1)}


class Split(str, Enum):
    """데이터 분할"""

    TRAIN = "train"
    VAL = "val"


class Episode(BaseModel):
    """
    내비게이션 과제 인스턴스

    world 는 seed 로부터 재생성되므로 저장하지 않습니다.
    """

    model_config = ConfigDict(frozen=True)

    episode_id: str = Field(..., description="'{seed}-{split}-{index}' 형식 ID")
    world_seed: int = Field(..., ge=0)
    start_cell: Cell = Field(..., description="시작 셀 (row, col)")
    start_heading: Heading = Field(..., description="시작 방향")
    goal_category: str = Field(..., description="목표 물체 category")
    geodesic_len: int = Field(..., ge=1, description="가장 가까운 목표까지 BFS 거리 (셀)")
    split: Split

    @field_validator("start_heading", mode="before")
    @classmethod
    def _parse_heading(cls, value):
        if isinstance(value, str):
            return Heading[value]
        return value
