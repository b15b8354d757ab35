"""
Shortest-path (SP) 데모

가장 가까운 목표 인스턴스까지의 BFS 최단 경로를 turn-then-forward 로 따라간 뒤 STOP.
"""

from collections import deque
from typing import Deque

import numpy as np

from common.config import DemoSource
from common.models import Action, Episode, Heading
from navlab.gridnav import GridNavEnv, Observation, WorldSpec, shortest_path

from .base import BaseDemoGenerator, DemoError, DemoPlanner, realize_path


class _ScriptedPlanner(DemoPlanner):
    def __init__(self, actions: Deque[Action]):
        self.actions = actions

    def act(self, env: GridNavEnv, obs: Observation) -> Action:
        return self.actions.popleft() if self.actions else Action.STOP


class ShortestPathDemoGenerator(BaseDemoGenerator):
    """SP 데모 생성기 (rng 를 사용하지 않음)"""

    source = DemoSource.SP

    def planner(self, world: WorldSpec, episode: Episode, rng: np.random.Generator) -> DemoPlanner:
        path = shortest_path(world.passable, episode.start_cell, world.instances(episode.goal_category))
        if path is None:
            raise DemoError(f"{episode.episode_id}: 목표에 도달할 수 없습니다")
        actions = realize_path(path, Heading(episode.start_heading))
        actions.append(Action.STOP)
        return _ScriptedPlanner(deque(actions))
