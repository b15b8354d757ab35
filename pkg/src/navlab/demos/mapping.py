"""
부분 관측 지도

patch 관측을 누적해 known-free / wall / unknown 점유 지도를 유지합니다.
FE 와 HD surrogate planner 가 공유합니다.
"""

from typing import List, Optional, Set, Tuple

import numpy as np

from common.models import Action, Cell, Heading
from navlab.gridnav import CODE_UNKNOWN, CODE_WALL, bfs_distances, patch_cells, shortest_path
from navlab.gridnav.geometry import NEIGHBOR_OFFSETS, in_bounds

from .base import step_toward, turn_toward

UNKNOWN = 0
FREE = 1
WALL = 2


class AgentMap:
    """
    에이전트가 관측한 점유 지도

    Example:
        amap = AgentMap((15, 15), goal_code=11, depth=5, half_width=2)
        amap.integrate(obs.patch, env.cell, env.heading)
        action = amap.frontier_action(env.cell, env.heading)
    """

    def __init__(self, shape: Tuple[int, int], goal_code: int, depth: int, half_width: int):
        self.state = np.full(shape, UNKNOWN, dtype=np.int8)
        self.goal_code = goal_code
        self.depth = depth
        self.half_width = half_width
        self.goal_cells: Set[Cell] = set()

    def integrate(self, patch: np.ndarray, cell: Cell, heading: Heading) -> int:
        """
        patch 한 장 반영

        Returns:
            새로 알게 된 셀 수
        """
        added = 0
        for d, row in enumerate(patch_cells(cell, heading, self.depth, self.half_width)):
            for j, target in enumerate(row):
                code = int(patch[d, j])
                if code == CODE_UNKNOWN:
                    continue
                if self.state[target] == UNKNOWN:
                    added += 1
                self.state[target] = WALL if code == CODE_WALL else FREE
                if code == self.goal_code:
                    self.goal_cells.add(target)
        return added

    @property
    def free(self) -> np.ndarray:
        return self.state == FREE

    @property
    def optimistic(self) -> np.ndarray:
        """unknown 을 통과 가능으로 보는 mask"""
        return self.state != WALL

    @property
    def known_free_count(self) -> int:
        return int(np.count_nonzero(self.state == FREE))

    def frontiers(self) -> List[Cell]:
        """unknown 이웃을 가진 known-free 셀 ((row, col) 정렬)"""
        unknown = self.state == UNKNOWN
        near_unknown = np.zeros_like(unknown)
        near_unknown[1:, :] |= unknown[:-1, :]
        near_unknown[:-1, :] |= unknown[1:, :]
        near_unknown[:, 1:] |= unknown[:, :-1]
        near_unknown[:, :-1] |= unknown[:, 1:]
        rows, cols = np.nonzero(self.free & near_unknown)
        return [(int(r), int(c)) for r, c in zip(rows, cols)]

    def nearest_frontier(self, cell: Cell) -> Optional[Tuple[Cell, int]]:
        """known-free BFS 로 가장 가까운 frontier (동률은 가장 작은 (row, col))"""
        frontiers = self.frontiers()
        if not frontiers:
            return None
        dist = bfs_distances(self.free, [cell])
        reachable = [(int(dist[f]), f) for f in frontiers if dist[f] >= 0]
        if not reachable:
            return None
        d, target = min(reachable)
        return target, d

    def frontier_action(self, cell: Cell, heading: Heading) -> Action:
        """
        가장 가까운 frontier 로 한 걸음

        frontier 위에 있으면 unknown 이웃 쪽으로 회전합니다. frontier 가 없으면 제자리 회전.
        """
        found = self.nearest_frontier(cell)
        if found is None:
            return Action.TURN_RIGHT
        target, distance = found
        if distance == 0:
            for dr, dc in NEIGHBOR_OFFSETS:
                neighbor = (cell[0] + dr, cell[1] + dc)
                if in_bounds(self.state.shape, neighbor) and self.state[neighbor] == UNKNOWN:
                    desired = next(h for h in Heading if h.delta == (dr, dc))
                    return turn_toward(heading, desired) or Action.TURN_RIGHT
            return Action.TURN_RIGHT
        path = shortest_path(self.free, cell, [target])
        return step_toward(cell, heading, path[1])

    def travel_action(
        self, cell: Cell, heading: Heading, targets: List[Cell], known_only: bool = False
    ) -> Optional[Action]:
        """
        targets 까지 최단 경로의 첫 행동 (도달 불가면 None)

        Args:
            known_only: True 면 known-free 셀만, False 면 unknown 도 통과 가능으로 보고 계획
        """
        passable = self.free if known_only else self.optimistic
        path = shortest_path(passable, cell, sorted(targets))
        if path is None or len(path) < 2:
            return None
        return step_toward(cell, heading, path[1])

    def goal_action(self, cell: Cell, heading: Heading) -> Action:
        """
        관측된 목표 셀로 known 지도 위 최단 경로 이동, 도착하면 STOP

        known-free 셀만으로 목표에 닿을 수 없으면 frontier 탐색을 계속합니다.
        """
        if cell in self.goal_cells:
            return Action.STOP
        action = self.travel_action(cell, heading, list(self.goal_cells), known_only=True)
        if action is None:
            return self.frontier_action(cell, heading)
        return action
