"""
Frontier-exploration (FE) 데모

목표를 보기 전까지는 과제와 무관하게 가장 가까운 frontier 로 이동하며 지도를 넓히고,
목표 category 가 patch 에 처음 들어오면 지도 위 최단 경로로 목표까지 가서 STOP 합니다.
목표를 끝내 보지 못하면 max_steps 에서 실패로 끝납니다.
"""

import numpy as np

from common.config import DemoSource
from common.models import Action, Episode
from navlab.gridnav import GridNavEnv, Observation, WorldSpec

from .base import BaseDemoGenerator, DemoPlanner
from .mapping import AgentMap


class FrontierPlanner(DemoPlanner):
    def __init__(self, world: WorldSpec, episode: Episode):
        params = world.params
        self.map = AgentMap(
            world.shape,
            goal_code=world.category_code(episode.goal_category),
            depth=params.patch_depth,
            half_width=params.patch_half_width,
        )

    def act(self, env: GridNavEnv, obs: Observation) -> Action:
        self.map.integrate(obs.patch, env.cell, env.heading)
        if self.map.goal_cells:
            return self.map.goal_action(env.cell, env.heading)
        return self.map.frontier_action(env.cell, env.heading)


class FrontierDemoGenerator(BaseDemoGenerator):
    """FE 데모 생성기 (결정적, rng 미사용)"""

    source = DemoSource.FE

    def planner(self, world: WorldSpec, episode: Episode, rng: np.random.Generator) -> DemoPlanner:
        return FrontierPlanner(world, episode)
