"""
Grid 기하 연산

BFS 거리, 최단 경로, 가시선(line of sight) 판정
"""

from collections import deque
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from common.models import Cell

# N, E, S, W 순서 (tie-break 고정)
NEIGHBOR_OFFSETS: Tuple[Cell, ...] = ((-1, 0), (0, 1), (1, 0), (0, -1))

UNREACHABLE = -1


class EnvError(Exception):
    """환경 상태/입력 에러"""

    pass


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def in_bounds(shape: Tuple[int, int], cell: Cell) -> bool:
    return 0 <= cell[0] < shape[0] and 0 <= cell[1] < shape[1]


def bfs_distances(passable: np.ndarray, sources: Iterable[Cell]) -> np.ndarray:
    """
    다중 출발점 BFS (4-연결)

    Args:
        passable: (H, W) bool 배열
        sources: 출발 셀들

    Returns:
        (H, W) int 배열, 도달 불가는 -1
    """
    dist = np.full(passable.shape, UNREACHABLE, dtype=np.int64)
    queue: deque = deque()
    for cell in sources:
        if in_bounds(passable.shape, cell) and passable[cell] and dist[cell] == UNREACHABLE:
            dist[cell] = 0
            queue.append(cell)

    while queue:
        r, c = queue.popleft()
        next_dist = dist[r, c] + 1
        for dr, dc in NEIGHBOR_OFFSETS:
            nr, nc = r + dr, c + dc
            if (
                0 <= nr < passable.shape[0]
                and 0 <= nc < passable.shape[1]
                and passable[nr, nc]
                and dist[nr, nc] == UNREACHABLE
            ):
                dist[nr, nc] = next_dist
                queue.append((nr, nc))
    return dist


def shortest_path(passable: np.ndarray, start: Cell, targets: Sequence[Cell]) -> Optional[List[Cell]]:
    """
    start 에서 가장 가까운 target 까지의 최단 경로 (start 포함)

    이웃 선택은 N, E, S, W 순서로 고정되어 결정적입니다.

    Returns:
        셀 목록, 도달 불가면 None
    """
    if not passable[start]:
        return None
    dist = bfs_distances(passable, targets)
    if dist[start] == UNREACHABLE:
        return None

    path = [start]
    current = start
    while dist[current] > 0:
        for dr, dc in NEIGHBOR_OFFSETS:
            nxt = (current[0] + dr, current[1] + dc)
            if in_bounds(passable.shape, nxt) and dist[nxt] == dist[current] - 1:
                current = nxt
                break
        path.append(current)
    return path


def geodesic_distance(passable: np.ndarray, start: Cell, targets: Sequence[Cell]) -> int:
    """
    start 에서 target 집합까지 BFS 최단 거리

    Raises:
        EnvError: start 가 floor 가 아니거나 target 에 도달할 수 없을 때
    """
    if not in_bounds(passable.shape, start) or not passable[start]:
        raise EnvError(f"geodesic_distance: 시작 셀 {start} 이 floor 가 아닙니다")
    dist = bfs_distances(passable, targets)
    value = int(dist[start])
    if value == UNREACHABLE:
        raise EnvError(f"geodesic_distance: {start} 에서 목표 {list(targets)} 에 도달할 수 없습니다")
    return value


def _open_interval(lo: Fraction, hi: Fraction, offset: int, delta: int):
    """segment t·delta 가 (offset−½, offset+½) 안에 있는 t 구간"""
    half = Fraction(1, 2)
    if delta == 0:
        return (lo, hi) if abs(offset) < half else None
    a = (offset - half) / delta
    b = (offset + half) / delta
    if a > b:
        a, b = b, a
    lo, hi = max(lo, a), min(hi, b)
    return (lo, hi) if lo < hi else None


@lru_cache(maxsize=None)
def los_requirements(dr: int, dc: int) -> Tuple[Tuple[Cell, ...], Tuple[Tuple[Cell, Cell], ...]]:
    """
    원점 셀 중심에서 (dr, dc) 셀 중심으로 가는 선분의 차단 조건

    Returns:
        (blockers, corner_pairs)
        - blockers: 선분이 내부를 지나는 중간 셀 (하나라도 벽이면 차단)
        - corner_pairs: 선분이 정확히 꼭짓점을 지나는 곳의 대각 반대편 두 셀 (둘 다 벽이면 차단)
    """
    blockers = []
    for r in range(min(0, dr), max(0, dr) + 1):
        for c in range(min(0, dc), max(0, dc) + 1):
            if (r, c) in ((0, 0), (dr, dc)):
                continue
            span = _open_interval(Fraction(0), Fraction(1), r, dr)
            if span is not None:
                span = _open_interval(span[0], span[1], c, dc)
            if span is not None:
                blockers.append((r, c))

    pairs = []
    if dr != 0 and dc != 0:
        half = Fraction(1, 2)
        for k in range(min(0, dr), max(0, dr)):
            t = (k + half) / dr
            y = t * dc
            if 0 < t < 1 and (y - half).denominator == 1:
                m = int(y - half)
                if dr * dc > 0:
                    pairs.append(((k + 1, m), (k, m + 1)))
                else:
                    pairs.append(((k, m), (k + 1, m + 1)))
    return tuple(blockers), tuple(pairs)


def line_of_sight(walls: np.ndarray, origin: Cell, target: Cell) -> bool:
    """
    셀 중심 간 정수 ray cast

    Args:
        walls: (H, W) bool, 벽이면 True
        origin: 출발 셀
        target: 도착 셀 (벽이어도 됨; 벽 자체는 보임)

    Returns:
        가시 여부
    """
    if not in_bounds(walls.shape, target):
        return False
    blockers, pairs = los_requirements(target[0] - origin[0], target[1] - origin[1])
    r0, c0 = origin
    for r, c in blockers:
        if walls[r0 + r, c0 + c]:
            return False
    for (ar, ac), (br, bc) in pairs:
        if walls[r0 + ar, c0 + ac] and walls[r0 + br, c0 + bc]:
            return False
    return True
