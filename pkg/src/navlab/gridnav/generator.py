"""
World 생성기

BSP 로 방을 나누고 문을 뚫은 뒤, room prior 표에 따라 물체를 배치합니다.
world 는 저장하지 않고 seed 로부터 언제든 다시 만듭니다.
"""

import hashlib
import json
import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from common.config import EnvParams
from common.models import Cell

from .geometry import UNREACHABLE, EnvError, bfs_distances

WALL = -1

# 셀 코드
CODE_UNKNOWN = 0
CODE_WALL = 1
FLOOR_CODE_BASE = 2


class WorldGenerationError(Exception):
    """world 생성 실패 (재시도 소진)"""

    pass


@dataclass(frozen=True)
class Room:
    """직사각형 방 (경계 포함 좌표)"""

    room_id: int
    room_type: str
    top: int
    left: int
    bottom: int
    right: int

    @property
    def cells(self) -> List[Cell]:
        return [
            (r, c) for r in range(self.top, self.bottom + 1) for c in range(self.left, self.right + 1)
        ]

    @property
    def centroid(self) -> Tuple[float, float]:
        return ((self.top + self.bottom) / 2.0, (self.left + self.right) / 2.0)

    def contains(self, cell: Cell) -> bool:
        return self.top <= cell[0] <= self.bottom and self.left <= cell[1] <= self.right


@dataclass(frozen=True)
class PlacedObject:
    category: str
    cell: Cell


@dataclass(frozen=True, eq=False)
class WorldSpec:
    """
    절차적으로 생성된 grid 집

    grid 값: -1 = 벽, 0 이상 = floor (room_id)
    """

    seed: int
    grid: np.ndarray
    rooms: Tuple[Room, ...]
    objects: Tuple[PlacedObject, ...]
    params: EnvParams

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.grid.shape[0]), int(self.grid.shape[1]))

    @property
    def room_priors(self) -> Dict[str, Dict[str, float]]:
        return self.params.room_priors

    @cached_property
    def passable(self) -> np.ndarray:
        mask = self.grid >= 0
        mask.setflags(write=False)
        return mask

    @cached_property
    def walls(self) -> np.ndarray:
        mask = self.grid < 0
        mask.setflags(write=False)
        return mask

    @cached_property
    def codes(self) -> np.ndarray:
        """셀 코드 배열 (관측 patch 의 원천)"""
        type_index = {name: i for i, name in enumerate(self.params.room_types)}
        cat_index = {name: i for i, name in enumerate(self.params.categories)}
        codes = np.full(self.grid.shape, CODE_WALL, dtype=np.int64)
        for room in self.rooms:
            room_code = FLOOR_CODE_BASE + type_index[room.room_type]
            codes[self.grid == room.room_id] = room_code
        object_base = FLOOR_CODE_BASE + len(self.params.room_types)
        for obj in self.objects:
            codes[obj.cell] = object_base + cat_index[obj.category]
        codes.setflags(write=False)
        return codes

    def is_floor(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.grid.shape[0] and 0 <= c < self.grid.shape[1] and self.grid[r, c] >= 0

    def instances(self, category: str) -> List[Cell]:
        return [obj.cell for obj in self.objects if obj.category == category]

    def room_at(self, cell: Cell) -> Optional[Room]:
        if not self.is_floor(cell):
            return None
        room_id = int(self.grid[cell])
        return self.rooms[room_id]

    def category_code(self, category: str) -> int:
        base = FLOOR_CODE_BASE + len(self.params.room_types)
        return base + self.params.categories.index(category)

    def fingerprint(self) -> str:
        """grid/방/물체 전체의 SHA-256"""
        digest = hashlib.sha256(self.grid.astype("<i2").tobytes())
        meta = {
            "seed": self.seed,
            "rooms": [r.__dict__ for r in self.rooms],
            "objects": [[o.category, list(o.cell)] for o in self.objects],
        }
        digest.update(json.dumps(meta, sort_keys=True).encode("utf-8"))
        return digest.hexdigest()


Rect = Tuple[int, int, int, int]  # top, left, bottom, right


@dataclass
class _Split:
    vertical: bool  # True 면 열 방향 벽
    line: int
    rect: Rect


def _split_rect(rect: Rect, min_size: int, rng: np.random.Generator) -> Optional[_Split]:
    top, left, bottom, right = rect
    height, width = bottom - top + 1, right - left + 1
    options = []
    if width >= 2 * min_size + 1:
        options.append(True)
    if height >= 2 * min_size + 1:
        options.append(False)
    if not options:
        return None

    if len(options) == 2:
        vertical = width > height if width != height else bool(rng.integers(2))
    else:
        vertical = options[0]

    if vertical:
        line = int(rng.integers(left + min_size, right - min_size + 1))
    else:
        line = int(rng.integers(top + min_size, bottom - min_size + 1))
    return _Split(vertical=vertical, line=line, rect=rect)


def _carve_rooms(params: EnvParams, rng: np.random.Generator) -> Tuple[List[Rect], List[_Split]]:
    lo, hi = params.room_count
    target = int(rng.integers(lo, hi + 1))
    leaves: List[Rect] = [(1, 1, params.height - 2, params.width - 2)]
    splits: List[_Split] = []

    while len(leaves) < target:
        # 면적이 큰 leaf 부터 시도
        order = sorted(
            range(len(leaves)),
            key=lambda i: (-(leaves[i][2] - leaves[i][0] + 1) * (leaves[i][3] - leaves[i][1] + 1), i),
        )
        split = None
        for idx in order:
            split = _split_rect(leaves[idx], params.min_room_size, rng)
            if split is not None:
                break
        if split is None:
            break

        top, left, bottom, right = split.rect
        leaves.pop(idx)
        if split.vertical:
            leaves.extend([(top, left, bottom, split.line - 1), (top, split.line + 1, bottom, right)])
        else:
            leaves.extend([(top, left, split.line - 1, right), (split.line + 1, left, bottom, right)])
        splits.append(split)

    return leaves, splits


def _door_candidates(grid: np.ndarray, split: _Split) -> List[Cell]:
    top, left, bottom, right = split.rect
    candidates = []
    if split.vertical:
        c = split.line
        for r in range(top, bottom + 1):
            if grid[r, c - 1] >= 0 and grid[r, c + 1] >= 0:
                candidates.append((r, c))
    else:
        r = split.line
        for c in range(left, right + 1):
            if grid[r - 1, c] >= 0 and grid[r + 1, c] >= 0:
                candidates.append((r, c))
    return candidates


def _place_objects(
    params: EnvParams,
    rooms: List[Room],
    rng: np.random.Generator,
) -> Optional[List[PlacedObject]]:
    occupied: Set[Cell] = set()
    objects: List[PlacedObject] = []
    lo, hi = params.instances_per_category

    for category in params.categories:
        count = int(rng.integers(lo, hi + 1))
        weights = np.array([params.prior(category, room.room_type) for room in rooms])
        if weights.sum() <= 0:
            weights = np.ones(len(rooms))
        weights = weights / weights.sum()

        for _ in range(count):
            room = rooms[int(rng.choice(len(rooms), p=weights))]
            free = [cell for cell in room.cells if cell not in occupied]
            if not free:
                free = [cell for r in rooms for cell in r.cells if cell not in occupied]
            if not free:
                return None
            cell = free[int(rng.integers(len(free)))]
            occupied.add(cell)
            objects.append(PlacedObject(category=category, cell=cell))
    return objects


def _attempt(seed: int, attempt: int, params: EnvParams) -> Optional[WorldSpec]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(attempt,)))
    grid = np.full((params.height, params.width), WALL, dtype=np.int64)

    leaves, splits = _carve_rooms(params, rng)
    rooms: List[Room] = []
    for room_id, (top, left, bottom, right) in enumerate(leaves):
        room_type = params.room_types[int(rng.integers(len(params.room_types)))]
        rooms.append(Room(room_id, room_type, top, left, bottom, right))
        grid[top : bottom + 1, left : right + 1] = room_id

    # 분할마다 문 하나 (모든 방을 칠한 뒤에 후보를 찾아야 하위 벽 교차점을 피함)
    for split in splits:
        candidates = _door_candidates(grid, split)
        if not candidates:
            return None
        door = candidates[int(rng.integers(len(candidates)))]
        neighbor = (door[0], door[1] - 1) if split.vertical else (door[0] - 1, door[1])
        grid[door] = grid[neighbor]

    passable = grid >= 0
    floor_cells = list(zip(*np.nonzero(passable)))
    dist = bfs_distances(passable, [tuple(int(v) for v in floor_cells[0])])
    if np.any(dist[passable] == UNREACHABLE):
        return None

    objects = _place_objects(params, rooms, rng)
    if objects is None:
        return None

    grid.setflags(write=False)
    return WorldSpec(seed=seed, grid=grid, rooms=tuple(rooms), objects=tuple(objects), params=params)


def generate_world(seed: int, params: EnvParams) -> WorldSpec:
    """
    seed 로부터 world 생성

    Args:
        seed: world seed (0 이상)
        params: 생성 파라미터

    Returns:
        WorldSpec (같은 seed 면 항상 동일)

    Raises:
        WorldGenerationError: 재시도 횟수 안에 연결된 world 를 만들지 못했을 때
    """
    if seed < 0:
        raise WorldGenerationError(f"seed 는 0 이상이어야 합니다: {seed}")
    for attempt in range(params.max_generation_retries):
        world = _attempt(seed, attempt, params)
        if world is not None:
            return world
    raise WorldGenerationError(
        f"seed {seed}: {params.max_generation_retries}회 재시도 후에도 world 생성 실패"
    )


class WorldRegistry:
    """
    seed → WorldSpec 캐시

    known_seeds 가 주어지면 그 밖의 seed 요청은 에러입니다. 스레드 안전합니다.
    """

    def __init__(self, params: EnvParams, known_seeds: Optional[Iterable[int]] = None):
        self.params = params
        self.known_seeds = None if known_seeds is None else set(int(s) for s in known_seeds)
        self._worlds: Dict[int, WorldSpec] = {}
        self._lock = threading.Lock()

    def get(self, seed: int) -> WorldSpec:
        if self.known_seeds is not None and seed not in self.known_seeds and seed not in self._worlds:
            raise EnvError(f"알 수 없는 world seed: {seed}")
        with self._lock:
            world = self._worlds.get(seed)
            if world is None:
                world = generate_world(seed, self.params)
                self._worlds[seed] = world
            return world

    def add(self, world: WorldSpec) -> None:
        with self._lock:
            self._worlds[world.seed] = world
            if self.known_seeds is not None:
                self.known_seeds.add(world.seed)

    def __contains__(self, seed: int) -> bool:
        return seed in self._worlds or (self.known_seeds is not None and seed in self.known_seeds)

    def __len__(self) -> int:
        return len(self._worlds)
