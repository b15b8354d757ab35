"""
Base Demo Generator

데모 생성기의 공통 인터페이스와 env 구동 루프
"""

from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

import numpy as np

from common.config import DemoSource
from common.models import Action, Cell, Demonstration, Episode, Heading
from navlab.gridnav import EnvError, GridNavEnv, Observation, WorldRegistry, WorldSpec


class DemoError(Exception):
    """데모 생성/재생 에러"""

    pass


_DELTA_TO_HEADING = {heading.delta: heading for heading in Heading}


def heading_between(a: Cell, b: Cell) -> Heading:
    """인접한 두 셀 a → b 의 방향"""
    delta = (b[0] - a[0], b[1] - a[1])
    try:
        return _DELTA_TO_HEADING[delta]
    except KeyError:
        raise DemoError(f"인접하지 않은 셀: {a} → {b}") from None


def turn_toward(heading: Heading, desired: Heading) -> Optional[Action]:
    """desired 를 향하기 위한 첫 회전 (이미 향하고 있으면 None, 180° 는 오른쪽)"""
    diff = (int(desired) - int(heading)) % 4
    if diff == 0:
        return None
    return Action.TURN_LEFT if diff == 3 else Action.TURN_RIGHT


def step_toward(cell: Cell, heading: Heading, next_cell: Cell) -> Action:
    """다음 셀로 가기 위한 한 행동 (회전 먼저, 그다음 전진)"""
    turn = turn_toward(heading, heading_between(cell, next_cell))
    return Action.FORWARD if turn is None else turn


def realize_path(path: Sequence[Cell], heading: Heading) -> List[Action]:
    """셀 경로를 turn-then-forward 행동 목록으로 변환 (STOP 제외)"""
    actions: List[Action] = []
    for current, nxt in zip(path, path[1:]):
        desired = heading_between(current, nxt)
        turn = turn_toward(heading, desired)
        while turn is not None:
            actions.append(turn)
            heading = heading.turned(turn)
            turn = turn_toward(heading, desired)
        actions.append(Action.FORWARD)
    return actions


class DemoPlanner(ABC):
    """에피소드 하나 동안 상태를 가지는 행동 결정기"""

    @abstractmethod
    def act(self, env: GridNavEnv, obs: Observation) -> Action:
        """
        현재 관측에서 다음 행동 결정

        Args:
            env: 진행 중인 환경 (pose 조회용)
            obs: 현재 관측

        Returns:
            다음 행동
        """
        pass


class BaseDemoGenerator(ABC):
    """
    데모 생성기 기본 클래스

    생성기는 (episode, rng) 의 순수 함수입니다. 에피소드별 상태는 planner 가 가집니다.
    """

    source: DemoSource

    def __init__(self, registry: WorldRegistry):
        """
        Args:
            registry: world seed → WorldSpec
        """
        self.registry = registry

    @abstractmethod
    def planner(self, world: WorldSpec, episode: Episode, rng: np.random.Generator) -> DemoPlanner:
        """에피소드 전용 planner 생성"""
        pass

    def generate(self, episode: Episode, rng: Optional[np.random.Generator] = None) -> Demonstration:
        """
        에피소드 하나를 env 에서 끝까지 실행해 데모 생성

        Args:
            episode: 대상 에피소드
            rng: 난수 생성기 (기본값: seed 0)

        Returns:
            Demonstration (success 는 env 의 STOP 판정)

        Raises:
            DemoError: 에피소드가 world 와 맞지 않을 때
        """
        rng = rng if rng is not None else np.random.default_rng(0)
        env = GridNavEnv(self.registry)
        try:
            obs = env.reset(episode)
        except EnvError as e:
            raise DemoError(f"{episode.episode_id}: {e}") from e

        planner = self.planner(env.world, episode, rng)
        actions: List[Action] = []
        while not env.done:
            action = planner.act(env, obs)
            actions.append(action)
            obs = env.step(action).obs

        return Demonstration(
            episode=episode,
            source=self.source,
            actions=Demonstration.encode(actions),
            success=env.last_success,
        )

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} source={self.source.value}>"
