"""
GridNav 환경

부분 관측 ObjectNav: 전방 patch + GPS/Compass + 목표 one-hot.
환경 인스턴스 하나는 단일 스레드에서만 사용합니다.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from common.models import Action, Cell, Episode, Heading

from .generator import CODE_UNKNOWN, WorldRegistry, WorldSpec
from .geometry import EnvError, chebyshev, in_bounds, line_of_sight


@dataclass(frozen=True, eq=False)
class Observation:
    """
    에이전트 관측

    patch: (D, 2K+1) 셀 코드, 행 d 는 전방 d 칸 (d=0 은 에이전트 행), 열은 왼쪽→오른쪽
    gps: 시작 pose 기준 (전방, 오른쪽) 변위 (셀)
    compass: 시작 방향 대비 시계 방향 회전 (라디안, [0, 2π))
    goal: 목표 category one-hot
    """

    patch: np.ndarray
    gps: np.ndarray
    compass: float
    goal: np.ndarray

    def equals(self, other: "Observation") -> bool:
        return (
            np.array_equal(self.patch, other.patch)
            and np.array_equal(self.gps, other.gps)
            and self.compass == other.compass
            and np.array_equal(self.goal, other.goal)
        )


@dataclass(frozen=True)
class StepInfo:
    success: bool
    collided: bool
    steps_elapsed: int
    goal_in_view: bool

    def as_dict(self) -> Dict[str, Any]:
        return {
            "success": self.success,
            "collided": self.collided,
            "steps_elapsed": self.steps_elapsed,
            "goal_in_view": self.goal_in_view,
        }


@dataclass(frozen=True, eq=False)
class StepResult:
    obs: Observation
    reward: float
    done: bool
    info: StepInfo


def patch_cells(cell: Cell, heading: Heading, depth: int, half_width: int) -> List[List[Cell]]:
    """patch 의 각 위치에 대응하는 world 셀"""
    fr, fc = heading.delta
    rr, rc = heading.turned(Action.TURN_RIGHT).delta
    return [
        [
            (cell[0] + d * fr + j * rr, cell[1] + d * fc + j * rc)
            for j in range(-half_width, half_width + 1)
        ]
        for d in range(depth)
    ]


def render_patch(world: WorldSpec, cell: Cell, heading: Heading, depth: int, half_width: int) -> np.ndarray:
    """
    전방 patch 렌더링

    범위 밖이거나 가시선이 막힌 셀은 unknown(0)
    """
    codes = world.codes
    walls = world.walls
    patch = np.full((depth, 2 * half_width + 1), CODE_UNKNOWN, dtype=np.int64)
    for d, row in enumerate(patch_cells(cell, heading, depth, half_width)):
        for j, target in enumerate(row):
            if in_bounds(walls.shape, target) and line_of_sight(walls, cell, target):
                patch[d, j] = codes[target]
    return patch


def success_check(world: WorldSpec, cell: Cell, category: str, radius: int) -> bool:
    """성공 반경 안에 가시선이 닿는 목표 인스턴스가 있는지"""
    for goal in world.instances(category):
        if chebyshev(cell, goal) <= radius and line_of_sight(world.walls, cell, goal):
            return True
    return False


class GridNavEnv:
    """
    ObjectNav grid 환경

    Example:
        env = GridNavEnv(registry)
        obs = env.reset(episode)
        result = env.step(Action.FORWARD)
    """

    def __init__(self, registry: WorldRegistry):
        self.registry = registry
        self.params = registry.params
        self.world: Optional[WorldSpec] = None
        self.episode: Optional[Episode] = None
        self.cell: Cell = (0, 0)
        self.heading: Heading = Heading.N
        self.steps = 0
        self.path_len = 0
        self.done = True
        self.last_success = False
        self.goal_ever_in_view = False
        self.visits: Dict[Cell, int] = {}
        self._goal_code = -1
        self._goal_onehot = np.zeros(len(self.params.categories))

    def reset(self, episode: Episode) -> Observation:
        """
        에피소드 시작

        Raises:
            EnvError: world seed 를 모르거나 에피소드가 world 와 맞지 않을 때
        """
        world = self.registry.get(episode.world_seed)
        if not world.is_floor(episode.start_cell):
            raise EnvError(f"{episode.episode_id}: 시작 셀 {episode.start_cell} 이 floor 가 아닙니다")
        if episode.goal_category not in self.params.categories:
            raise EnvError(f"{episode.episode_id}: 알 수 없는 category {episode.goal_category}")

        self.world = world
        self.episode = episode
        self.cell = tuple(episode.start_cell)  # type: ignore[assignment]
        self.heading = Heading(episode.start_heading)
        self.steps = 0
        self.path_len = 0
        self.done = False
        self.last_success = False
        self.visits = {self.cell: 1}
        self._goal_code = world.category_code(episode.goal_category)
        self._goal_onehot = np.zeros(len(self.params.categories))
        self._goal_onehot[self.params.categories.index(episode.goal_category)] = 1.0

        obs = self.observe()
        self.goal_ever_in_view = bool(np.any(obs.patch == self._goal_code))
        return obs

    def observe(self) -> Observation:
        if self.world is None or self.episode is None:
            raise EnvError("reset 전에 관측할 수 없습니다")
        start = self.episode.start_cell
        start_heading = Heading(self.episode.start_heading)
        fr, fc = start_heading.delta
        rr, rc = start_heading.turned(Action.TURN_RIGHT).delta
        dr, dc = self.cell[0] - start[0], self.cell[1] - start[1]
        gps = np.array([dr * fr + dc * fc, dr * rr + dc * rc], dtype=np.float64)
        quarters = (int(self.heading) - int(start_heading)) % 4
        patch = render_patch(
            self.world, self.cell, self.heading, self.params.patch_depth, self.params.patch_half_width
        )
        return Observation(
            patch=patch, gps=gps, compass=quarters * math.pi / 2.0, goal=self._goal_onehot.copy()
        )

    def step(self, action: Action) -> StepResult:
        """
        행동 하나 실행

        Raises:
            EnvError: reset 전이거나 에피소드가 이미 끝났을 때
        """
        if self.world is None or self.done:
            raise EnvError("종료된 에피소드에서 step 을 호출했습니다")
        action = Action(action)

        collided = False
        reward = 0.0
        success = False

        if action == Action.FORWARD:
            dr, dc = self.heading.delta
            target = (self.cell[0] + dr, self.cell[1] + dc)
            if self.world.is_floor(target):
                self.cell = target
                self.path_len += 1
                self.visits[target] = self.visits.get(target, 0) + 1
            else:
                collided = True
        elif action in (Action.TURN_LEFT, Action.TURN_RIGHT):
            self.heading = self.heading.turned(action)

        self.steps += 1

        if action == Action.STOP:
            self.done = True
            success = self.success_check()
            reward = self.params.success_reward if success else 0.0
        elif self.steps >= self.params.max_steps:
            self.done = True
        self.last_success = success

        obs = self.observe()
        in_view = bool(np.any(obs.patch == self._goal_code))
        self.goal_ever_in_view = self.goal_ever_in_view or in_view
        info = StepInfo(
            success=success, collided=collided, steps_elapsed=self.steps, goal_in_view=in_view
        )
        return StepResult(obs=obs, reward=reward, done=self.done, info=info)

    def success_check(self) -> bool:
        if self.world is None or self.episode is None:
            raise EnvError("reset 전에는 성공 판정을 할 수 없습니다")
        return success_check(
            self.world, self.cell, self.episode.goal_category, self.params.success_radius
        )

    @property
    def final_distance(self) -> int:
        """가장 가까운 목표 인스턴스까지 Chebyshev 거리"""
        if self.world is None or self.episode is None:
            raise EnvError("reset 전입니다")
        return min(chebyshev(self.cell, g) for g in self.world.instances(self.episode.goal_category))
