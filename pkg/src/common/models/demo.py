"""
데모 데이터 모델
"""

from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator

from common.config import DemoSource, EnvParams

from .world import ACTION_CODES, Action, Episode

DEMO_FORMAT_VERSION = 1

_VALID_CODES = set(ACTION_CODES.values())


class Demonstration(BaseModel):
    """
    에피소드 하나에 대한 재생 가능한 행동 시퀀스

    관측은 저장하지 않고 재생 시 env 로부터 다시 만들어집니다.
    """

    model_config = ConfigDict(frozen=True)

    episode: Episode = Field(..., description="데모가 속한 에피소드")
    source: DemoSource = Field(..., description="생성 방식")
    actions: str = Field(..., description="F/L/R/S 로 인코딩된 행동 문자열")
    success: bool = Field(..., description="재생 시 성공 여부")

    @field_validator("actions")
    @classmethod
    def _check_codes(cls, value: str) -> str:
        unknown = set(value) - _VALID_CODES
        if unknown:
            raise ValueError(f"알 수 없는 행동 코드: {sorted(unknown)}")
        return value

    @property
    def episode_id(self) -> str:
        return self.episode.episode_id

    @property
    def length(self) -> int:
        return len(self.actions)

    def action_list(self) -> List[Action]:
        return [Action.from_code(c) for c in self.actions]

    @staticmethod
    def encode(actions: List[Action]) -> str:
        return "".join(ACTION_CODES[Action(a)] for a in actions)


class DatasetHeader(BaseModel):
    """데모 데이터셋 header (JSON-lines 첫 줄)"""

    model_config = ConfigDict(extra="forbid")

    format_version: int = DEMO_FORMAT_VERSION
    source: DemoSource
    env_params: EnvParams
    count: int = Field(..., ge=0)
    total_steps: int = Field(..., ge=0)


class DemoDataset(BaseModel):
    """header + 데모 목록"""

    header: DatasetHeader
    demonstrations: List[Demonstration] = Field(default_factory=list)

    @classmethod
    def build(
        cls, source: DemoSource, env_params: EnvParams, demos: List[Demonstration]
    ) -> "DemoDataset":
        header = DatasetHeader(
            source=source,
            env_params=env_params,
            count=len(demos),
            total_steps=sum(d.length for d in demos),
        )
        return cls(header=header, demonstrations=list(demos))

    @property
    def total_steps(self) -> int:
        return self.header.total_steps

    def __len__(self) -> int:
        return len(self.demonstrations)
