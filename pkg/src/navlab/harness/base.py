"""
Base Stage

recipe 를 구성하는 모든 스테이지의 기본 추상 클래스
"""

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from pydantic import ValidationError

from common.config import LabConfig, format_validation_error
from common.models import StageKind, StageSpec


class HarnessError(Exception):
    """실험 하네스 실행 에러"""

    pass


# seed 별 run 에서 바뀌는 설정 필드
SEEDED_FIELDS = ("bc.seed", "ppo.seed", "demo.seed", "eval.seed")


def apply_overrides(config: LabConfig, overrides: Mapping[str, Any]) -> LabConfig:
    """
    'section.field' 형식 override 적용

    Args:
        config: 기본 설정
        overrides: 점으로 구분한 필드 경로 → 값

    Returns:
        다시 검증된 LabConfig

    Raises:
        HarnessError: 알 수 없는 경로이거나 검증에 실패했을 때
    """
    raw = config.model_dump(mode="json")
    for key, value in overrides.items():
        parts = key.split(".")
        node = raw
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise HarnessError(f"override 경로를 찾을 수 없습니다: {key}")
            node = node[part]
        if parts[-1] not in node:
            raise HarnessError(f"override 경로를 찾을 수 없습니다: {key}")
        node[parts[-1]] = value
    try:
        return LabConfig.model_validate(raw)
    except ValidationError as e:
        raise HarnessError(format_validation_error(e)) from e


@dataclass
class RunContext:
    """
    seed 하나의 recipe 실행 컨텍스트

    run_dir = <out>/<recipe>/<seed>. 모든 스테이지는 run_dir/<stage> 아래에만 씁니다.
    """

    config: LabConfig
    recipe: str
    seed: int
    run_dir: Path
    show_progress: bool = False
    artifacts: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def stage_dir(self, name: str) -> Path:
        return self.run_dir / name

    def seeded_config(self) -> LabConfig:
        return apply_overrides(self.config, {name: self.seed for name in SEEDED_FIELDS})

    def artifact(self, stage: str, key: str) -> Any:
        """이전 스테이지 산출물 조회"""
        try:
            return self.artifacts[stage][key]
        except KeyError as e:
            raise HarnessError(f"{stage} 스테이지의 산출물 '{key}' 가 없습니다") from e


class Stage(ABC):
    """
    Stage 기본 클래스

    StageSpec 이 선언 부분(이름, 의존, override, 산출물)을 맡고
    하위 클래스가 실제 계산을 구현합니다.
    """

    kind: StageKind
    default_outputs: List[str] = []

    def __init__(
        self,
        name: str,
        depends_on: Optional[List[str]] = None,
        overrides: Optional[Dict[str, Any]] = None,
        **params: Any,
    ):
        """
        Args:
            name: recipe 안에서 고유한 스테이지 이름
            depends_on: 먼저 끝나야 하는 스테이지
            overrides: 이 스테이지에만 적용할 설정 override
            **params: 스테이지 고유 파라미터 (source, mode, size 등, manifest hash 에 포함)
        """
        self.name = name
        self.params = dict(params)
        self.spec = StageSpec(
            name=name,
            kind=self.kind,
            depends_on=list(depends_on or []),
            overrides=dict(overrides or {}),
            outputs=list(self.default_outputs),
        )

    @property
    def depends_on(self) -> List[str]:
        return self.spec.depends_on

    def stage_config(self, ctx: RunContext) -> LabConfig:
        """seed 와 스테이지 override 를 적용한 설정"""
        return apply_overrides(ctx.seeded_config(), self.spec.overrides)

    def fingerprint(self, ctx: RunContext) -> Dict[str, Any]:
        """manifest hash 의 입력 (설정, 파라미터, 의존 스테이지)"""
        return {
            "kind": self.kind.value,
            "config": self.stage_config(ctx).model_dump(mode="json"),
            "params": json.loads(json.dumps(self.params, sort_keys=True, default=str)),
            "depends_on": list(self.depends_on),
        }

    def output_paths(self, ctx: RunContext) -> List[Path]:
        out = ctx.stage_dir(self.name)
        return [out / rel for rel in self.spec.outputs]

    @abstractmethod
    def execute(self, ctx: RunContext) -> Dict[str, Any]:
        """
        스테이지 실행

        Args:
            ctx: run 컨텍스트 (의존 스테이지 산출물 포함)

        Returns:
            산출물 딕셔너리 (경로는 str, 다음 스테이지가 ctx.artifact 로 조회)

        Raises:
            HarnessError: 실행 중 에러 발생 시
        """
        pass

    def describe(self) -> Dict[str, Any]:
        """run.json 에 기록되는 스테이지 정보"""
        return {
            "name": self.name,
            "kind": self.kind.value,
            "depends_on": list(self.depends_on),
            "overrides": dict(self.spec.overrides),
            "params": dict(self.params),
        }

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} {self.name}>"
