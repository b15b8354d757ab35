"""
실험 recipe / 스케일링 곡선 모델
"""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class StageKind(str, Enum):
    """스테이지 종류"""

    WORLD_GEN = "world-gen"
    DEMO_GEN = "demo-gen"
    BC = "bc"
    RL_FT = "rl-ft"
    EVAL = "eval"


class StageSpec(BaseModel):
    """recipe 를 구성하는 스테이지 하나"""

    name: str = Field(..., description="recipe 안에서 고유한 스테이지 이름")
    kind: StageKind
    depends_on: List[str] = Field(default_factory=list)
    overrides: Dict[str, Any] = Field(default_factory=dict, description="'section.field' → 값")
    outputs: List[str] = Field(..., min_length=1, description="스테이지 디렉토리 기준 산출물 경로")


class ExperimentRecipe(BaseModel):
    """
    실험 recipe

    스테이지 DAG 와 seed 목록. 모든 산출물 경로는 실행 전에 선언됩니다.
    """

    name: str
    description: str = ""
    stages: List[StageSpec]
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])

    @model_validator(mode="after")
    def _check_dag(self) -> "ExperimentRecipe":
        names = [s.name for s in self.stages]
        if len(set(names)) != len(names):
            raise ValueError(f"중복된 스테이지 이름: {names}")
        known = set(names)
        for stage in self.stages:
            missing = [d for d in stage.depends_on if d not in known]
            if missing:
                raise ValueError(f"{stage.name}: 알 수 없는 의존 스테이지 {missing}")
        self.topological_order()
        return self

    def topological_order(self) -> List[StageSpec]:
        """의존 순서대로 정렬 (선언 순서 유지, 순환이면 ValueError)"""
        by_name = {s.name: s for s in self.stages}
        ordered: List[StageSpec] = []
        state: Dict[str, int] = {}

        def visit(name: str, trail: List[str]) -> None:
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                raise ValueError(f"스테이지 순환: {' -> '.join(trail + [name])}")
            state[name] = 1
            for dep in by_name[name].depends_on:
                visit(dep, trail + [name])
            state[name] = 2
            ordered.append(by_name[name])

        for stage in self.stages:
            visit(stage.name, [])
        return ordered

    def stage(self, name: str) -> StageSpec:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)


class ScalingPoint(BaseModel):
    """데이터셋 크기 하나의 결과"""

    size: int = Field(..., ge=1, description="데모 데이터셋 총 step 수")
    bc_success: float
    rlft_success: Optional[float] = None

    @property
    def delta(self) -> Optional[float]:
        if self.rlft_success is None:
            return None
        return self.rlft_success - self.bc_success


class ScalingCurve(BaseModel):
    """데이터셋 크기 → 성공률 곡선과 포화 모델 적합 결과"""

    source: str
    target: str = Field("bc_success", description="적합 대상 (bc_success 또는 rlft_success)")
    points: List[ScalingPoint]
    form: str = "a - b*exp(-c*n)"
    params: Dict[str, float] = Field(default_factory=dict)
    residuals: List[float] = Field(default_factory=list)

    @field_validator("points")
    @classmethod
    def _sizes_increasing(cls, value: List[ScalingPoint]) -> List[ScalingPoint]:
        sizes = [p.size for p in value]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"데이터셋 크기는 엄격히 증가해야 합니다: {sizes}")
        return value
