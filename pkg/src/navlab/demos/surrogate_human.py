"""
Surrogate-human (HD) 데모

사람의 과제 특화 탐색을 흉내 냅니다:
목표 category 의 room prior 가 높은 방부터 방문하고, 방 중심에 도착하면 한 바퀴 둘러본 뒤
다음 방으로 이동합니다. 목표를 보면 바로 목표로 갑니다.
우회 확률만큼 무작위 행동(FORWARD/TURN_LEFT/TURN_RIGHT)을 섞습니다.
"""

from typing import Dict, List

import numpy as np

from common.config import DemoSource
from common.models import Action, Cell, Episode
from navlab.gridnav import GridNavEnv, Observation, Room, WorldRegistry, WorldSpec, bfs_distances

from .base import BaseDemoGenerator, DemoError, DemoPlanner
from .mapping import AgentMap

SCAN_TURNS = 4


def room_anchor(room: Room) -> Cell:
    """방 중심에 가장 가까운 셀 (동률은 가장 작은 (row, col))"""
    cr, cc = room.centroid
    return min(room.cells, key=lambda cell: ((cell[0] - cr) ** 2 + (cell[1] - cc) ** 2, cell))


def room_visit_order(world: WorldSpec, episode: Episode) -> List[Room]:
    """목표 prior 내림차순, 동률은 시작점에서의 거리, 그다음 room_id"""
    dist = bfs_distances(world.passable, [episode.start_cell])

    def key(room: Room):
        d = int(dist[room_anchor(room)])
        prior = world.params.prior(episode.goal_category, room.room_type)
        return (-prior, d if d >= 0 else 10**9, room.room_id)

    return sorted(world.rooms, key=key)


class SurrogateHumanPlanner(DemoPlanner):
    def __init__(
        self,
        world: WorldSpec,
        episode: Episode,
        detour_prob: float,
        rng: np.random.Generator,
    ):
        params = world.params
        self.map = AgentMap(
            world.shape,
            goal_code=world.category_code(episode.goal_category),
            depth=params.patch_depth,
            half_width=params.patch_half_width,
        )
        self.rooms = room_visit_order(world, episode)
        self.anchors: Dict[int, Cell] = {room.room_id: room_anchor(room) for room in self.rooms}
        self.detour_prob = detour_prob
        self.rng = rng
        self.scan_left = 0

    def _search_action(self, env: GridNavEnv) -> Action:
        if self.scan_left > 0:
            self.scan_left -= 1
            return Action.TURN_RIGHT

        while self.rooms:
            anchor = self.anchors[self.rooms[0].room_id]
            if env.cell == anchor:
                self.rooms.pop(0)
                self.scan_left = SCAN_TURNS - 1
                return Action.TURN_RIGHT
            action = self.map.travel_action(env.cell, env.heading, [anchor])
            if action is not None:
                return action
            self.rooms.pop(0)

        # 모든 방을 둘러봤으면 frontier 탐색으로 전환
        return self.map.frontier_action(env.cell, env.heading)

    def act(self, env: GridNavEnv, obs: Observation) -> Action:
        self.map.integrate(obs.patch, env.cell, env.heading)
        if self.map.goal_cells:
            action = self.map.goal_action(env.cell, env.heading)
        else:
            action = self._search_action(env)

        if action != Action.STOP and self.detour_prob > 0 and self.rng.random() < self.detour_prob:
            action = Action(int(self.rng.integers(3)))
        return action


class SurrogateHumanDemoGenerator(BaseDemoGenerator):
    """HD surrogate 데모 생성기"""

    source = DemoSource.HD_SURROGATE

    def __init__(self, registry: WorldRegistry, detour_prob: float = 0.1):
        """
        Args:
            registry: world seed → WorldSpec
            detour_prob: step 마다 무작위 행동을 택할 확률 (0 이면 rng 를 쓰지 않음)
        """
        super().__init__(registry)
        if not 0.0 <= detour_prob <= 1.0:
            raise DemoError(f"detour_prob 는 [0, 1] 이어야 합니다: {detour_prob}")
        self.detour_prob = detour_prob

    def planner(self, world: WorldSpec, episode: Episode, rng: np.random.Generator) -> DemoPlanner:
        return SurrogateHumanPlanner(world, episode, self.detour_prob, rng)

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} detour_prob={self.detour_prob}>"
