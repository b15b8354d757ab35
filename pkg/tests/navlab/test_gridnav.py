"""
gridnav 테스트

world 생성, 에피소드, 관측 렌더링, step/성공 판정, geodesic 거리
"""

import heapq
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

# src 경로 추가
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root / "src"))

from common.config import EnvParams  # noqa: E402
from common.models import Action, Episode, Heading, Split  # noqa: E402
from navlab.gridnav import (  # noqa: E402
    EnvError,
    EpisodeError,
    GridNavEnv,
    PlacedObject,
    Room,
    WorldRegistry,
    WorldSpec,
    bfs_distances,
    generate_episodes,
    generate_world,
    geodesic_distance,
    line_of_sight,
    load_episodes,
    patch_cells,
    split_for_seed,
    write_episodes,
)

SMALL = EnvParams(
    width=7,
    height=7,
    room_count=(1, 1),
    categories=["chair"],
    room_types=["living_room"],
    instances_per_category=(1, 1),
)


def make_world(layout, objects, params=SMALL, seed=7):
    """문자열 layout 으로 단일 방 world 생성 ('#' 벽, '.' floor)"""
    grid = np.array([[-1 if ch == "#" else 0 for ch in row] for row in layout], dtype=np.int64)
    rows, cols = np.nonzero(grid >= 0)
    room = Room(0, params.room_types[0], int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))
    placed = tuple(PlacedObject(category, cell) for category, cell in objects)
    grid.setflags(write=False)
    return WorldSpec(seed=seed, grid=grid, rooms=(room,), objects=placed, params=params)


def make_episode(world, start, heading, category="chair"):
    return Episode(
        episode_id=f"{world.seed}-test-0",
        world_seed=world.seed,
        start_cell=start,
        start_heading=heading,
        goal_category=category,
        geodesic_len=max(1, geodesic_distance(world.passable, start, world.instances(category))),
        split=split_for_seed(world.seed, world.params.val_percent),
    )


def env_for(world):
    registry = WorldRegistry(world.params, known_seeds=[])
    registry.add(world)
    return GridNavEnv(registry)


OPEN_ROOM = [
    "#######",
    "#.....#",
    "#.....#",
    "#.....#",
    "#.....#",
    "#.....#",
    "#######",
]


# 독립 오라클


def dijkstra_oracle(passable, start, targets):
    """unit weight Dijkstra (BFS 와 독립 구현)"""
    best = {start: 0}
    heap = [(0, start)]
    goals = set(targets)
    while heap:
        d, (r, c) = heapq.heappop(heap)
        if (r, c) in goals:
            return d
        if d > best[(r, c)]:
            continue
        for nr, nc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if 0 <= nr < passable.shape[0] and 0 <= nc < passable.shape[1] and passable[nr, nc]:
                if d + 1 < best.get((nr, nc), math.inf):
                    best[(nr, nc)] = d + 1
                    heapq.heappush(heap, (d + 1, (nr, nc)))
    return None


def _segment_hits_square(origin, target, cell):
    """열린 선분이 셀의 열린 정사각형 내부를 지나는지 (Fraction)"""
    lo, hi = Fraction(0), Fraction(1)
    for axis in (0, 1):
        delta = target[axis] - origin[axis]
        rel = cell[axis] - origin[axis]
        if delta == 0:
            if abs(rel) >= Fraction(1, 2):
                return False
            continue
        a = (rel - Fraction(1, 2)) / delta
        b = (rel + Fraction(1, 2)) / delta
        lo, hi = max(lo, min(a, b)), min(hi, max(a, b))
    return lo < hi


def visible_oracle(world, origin, target):
    """world 전체 셀을 훑는 가시선 오라클"""
    walls = world.grid < 0
    height, width = walls.shape
    if not (0 <= target[0] < height and 0 <= target[1] < width):
        return False
    for r in range(height):
        for c in range(width):
            if (r, c) in (origin, target) or not walls[r, c]:
                continue
            if _segment_hits_square(origin, target, (r, c)):
                return False
    dr, dc = target[0] - origin[0], target[1] - origin[1]
    steps = 2 * max(abs(dr), abs(dc))
    for k in range(1, steps * 2):
        t = Fraction(k, steps * 2)
        x = origin[0] + t * dr
        y = origin[1] + t * dc
        if (x - Fraction(1, 2)).denominator == 1 and (y - Fraction(1, 2)).denominator == 1:
            corner = [
                (int(x - Fraction(1, 2)) + a, int(y - Fraction(1, 2)) + b) for a in (0, 1) for b in (0, 1)
            ]
            untouched = [cell for cell in corner if not _segment_hits_square(origin, target, cell)]
            if len(untouched) == 2 and all(walls[cell] for cell in untouched):
                return False
    return True


# world 생성


def test_generate_world_is_deterministic():
    """같은 seed → 동일 WorldSpec"""
    print("테스트 1: world 결정성")

    params = EnvParams()
    first = generate_world(42, params)
    second = generate_world(42, params)
    assert first.fingerprint() == second.fingerprint()
    assert first.grid.tobytes() == second.grid.tobytes()
    assert generate_world(43, params).fingerprint() != first.fingerprint()
    print(f"  ✓ fingerprint: {first.fingerprint()[:16]}")


def test_single_room_object_reachable():
    """방 1개, 물체 1개 → 모든 floor 셀에서 도달 가능"""
    world = generate_world(3, SMALL)
    assert len(world.rooms) == 1 and len(world.objects) == 1
    goal = world.objects[0].cell
    for r, c in zip(*np.nonzero(world.passable)):
        assert dijkstra_oracle(world.passable, (int(r), int(c)), [goal]) is not None


def test_world_invariants_over_many_seeds():
    """1000개 seed: 모든 category 존재, 물체는 floor 위, floor 는 단일 연결"""
    print("\n테스트 2: world 불변식 (1000 seeds)")

    params = EnvParams()
    for seed in range(1000):
        world = generate_world(seed, params)
        present = {obj.category for obj in world.objects}
        assert present == set(params.categories), f"seed {seed}: 누락 category {set(params.categories) - present}"
        for obj in world.objects:
            assert world.is_floor(obj.cell)

        floor = list(zip(*np.nonzero(world.passable)))
        dist = bfs_distances(world.passable, [tuple(int(v) for v in floor[0])])
        assert np.all(dist[world.passable] >= 0), f"seed {seed}: 연결되지 않은 floor"
    print("  ✓ 1000개 world 모두 불변식 만족")


def test_registry_rejects_unknown_seed():
    registry = WorldRegistry(EnvParams(), known_seeds=[1, 2])
    assert registry.get(1).seed == 1
    with pytest.raises(EnvError, match="99"):
        registry.get(99)


# 에피소드


def test_generate_episodes_geodesic_matches_oracle():
    """geodesic_len == 독립 Dijkstra 오라클, 시작 셀은 성공 반경 밖"""
    print("\n테스트 3: 에피소드 생성")

    params = EnvParams()
    count = 0
    for seed in range(20):
        world = generate_world(seed, params)
        split = split_for_seed(seed, params.val_percent)
        episodes = generate_episodes(world, 10, np.random.default_rng(seed), split)
        for ep in episodes:
            goals = world.instances(ep.goal_category)
            assert ep.geodesic_len == dijkstra_oracle(world.passable, ep.start_cell, goals)
            assert all(max(abs(ep.start_cell[0] - g[0]), abs(ep.start_cell[1] - g[1])) > 1 for g in goals)
            assert ep.episode_id.startswith(f"{seed}-{split.value}-")
            count += 1
    print(f"  ✓ {count}개 에피소드 geodesic 일치")


def test_episode_without_eligible_start_is_rejected():
    """목표 옆 셀만 있는 world → 에러"""
    layout = [
        "#######",
        "#..####",
        "#######",
        "#######",
        "#######",
        "#######",
        "#######",
    ]
    world = make_world(layout, [("chair", (1, 2))])
    split = split_for_seed(world.seed, world.params.val_percent)
    with pytest.raises(EpisodeError):
        generate_episodes(world, 1, np.random.default_rng(0), split)


def test_split_is_pure_function_of_seed():
    """split 은 seed 의 순수 함수 → 잘못된 split 요청 거부"""
    params = EnvParams()
    splits = {seed: split_for_seed(seed, params.val_percent) for seed in range(200)}
    assert splits == {seed: split_for_seed(seed, params.val_percent) for seed in range(200)}
    assert Split.VAL in splits.values() and Split.TRAIN in splits.values()

    seed = next(s for s, sp in splits.items() if sp == Split.TRAIN)
    with pytest.raises(EpisodeError):
        generate_episodes(generate_world(seed, params), 1, np.random.default_rng(0), Split.VAL)


def test_episode_file_roundtrip(tmp_path):
    params = EnvParams()
    world = generate_world(5, params)
    episodes = generate_episodes(world, 4, np.random.default_rng(1), split_for_seed(5))
    path = write_episodes(episodes, params, tmp_path / "episodes.jsonl")

    loaded_params, loaded = load_episodes(path)
    assert loaded_params == params
    assert loaded == episodes


# 관측


def test_reset_is_repeatable_and_matches_oracle():
    """reset 두 번 동일, goal one-hot, patch == 가시선 오라클"""
    print("\n테스트 4: reset / patch 렌더링")

    params = EnvParams()
    registry = WorldRegistry(params)
    env = GridNavEnv(registry)
    checked = 0
    for seed in range(15):
        world = registry.get(seed)
        episodes = generate_episodes(world, 3, np.random.default_rng(seed), split_for_seed(seed))
        for ep in episodes:
            first = env.reset(ep)
            second = env.reset(ep)
            assert first.equals(second)
            assert first.goal.sum() == 1.0 and set(np.unique(first.goal)) <= {0.0, 1.0}
            assert first.gps.tolist() == [0.0, 0.0] and first.compass == 0.0

            cells = patch_cells(ep.start_cell, Heading(ep.start_heading), params.patch_depth, params.patch_half_width)
            for d, row in enumerate(cells):
                for j, target in enumerate(row):
                    expected = world.codes[target] if visible_oracle(world, ep.start_cell, target) else 0
                    assert first.patch[d, j] == expected, f"{ep.episode_id} patch[{d},{j}] 불일치"
            checked += 1
    print(f"  ✓ {checked}개 시작 patch 오라클 일치")


def test_corner_rule_blocks_diagonal_gap():
    """대각선 양쪽이 모두 벽이면 보이지 않음"""
    layout = [
        "#######",
        "#..#..#",
        "#.#...#",
        "#.....#",
        "#.....#",
        "#.....#",
        "#######",
    ]
    world = make_world(layout, [("chair", (1, 4))])
    # (2,3) 에서 (1,2): 모서리 (1,3)=벽, (2,2)=벽
    assert not line_of_sight(world.walls, (2, 3), (1, 2))
    assert not visible_oracle(world, (2, 3), (1, 2))
    assert line_of_sight(world.walls, (2, 3), (1, 4))


# step / 성공 판정


def test_turn_left_four_times_restores_pose():
    world = make_world(OPEN_ROOM, [("chair", (1, 1))])
    env = env_for(world)
    env.reset(make_episode(world, (4, 4), Heading.N))
    for _ in range(4):
        result = env.step(Action.TURN_LEFT)
    assert env.cell == (4, 4) and env.heading == Heading.N
    assert result.obs.gps.tolist() == [0.0, 0.0] and result.obs.compass == 0.0


def test_stop_success_and_failure():
    """성공 반경 안 STOP → reward 1, 반경 밖 → 0"""
    print("\n테스트 5: STOP 성공 판정")

    world = make_world(OPEN_ROOM, [("chair", (1, 3))])
    env = env_for(world)

    env.reset(make_episode(world, (3, 3), Heading.N))
    env.step(Action.FORWARD)
    result = env.step(Action.STOP)
    assert result.done and result.reward == 1.0 and result.info.success
    print("  ✓ 인접 셀 STOP → reward 1.0")

    env.reset(make_episode(world, (3, 3), Heading.N))
    result = env.step(Action.STOP)
    assert result.done and result.reward == 0.0 and not result.info.success
    print("  ✓ 반경 밖 STOP → reward 0")

    with pytest.raises(EnvError):
        env.step(Action.FORWARD)


def test_wall_between_blocks_success():
    """반경 안이지만 벽 너머 → 실패"""
    layout = [
        "#######",
        "#.#...#",
        "#..#..#",
        "#.....#",
        "#.....#",
        "#.....#",
        "#######",
    ]
    world = make_world(layout, [("chair", (1, 3))])
    env = env_for(world)
    env.reset(make_episode(world, (2, 2), Heading.E))
    assert env.final_distance == 1
    assert not env.success_check()


def test_collision_and_max_steps():
    params = SMALL.model_copy(update={"max_steps": 5})
    world = make_world(OPEN_ROOM, [("chair", (5, 5))], params=params)
    env = env_for(world)
    env.reset(make_episode(world, (1, 1), Heading.N))

    result = env.step(Action.FORWARD)
    assert result.info.collided and env.cell == (1, 1)

    rewards = [result.reward]
    while not result.done:
        result = env.step(Action.TURN_RIGHT)
        rewards.append(result.reward)
    assert result.info.steps_elapsed == 5 and not result.info.success
    assert sum(rewards) == 0.0


def test_odometry_matches_forward_displacements():
    """gps = 시작 frame 에서 FORWARD 변위 합, compass = 순 회전"""
    print("\n테스트 6: odometry")

    params = EnvParams()
    registry = WorldRegistry(params)
    env = GridNavEnv(registry)
    rng = np.random.default_rng(11)
    world = registry.get(8)
    episode = generate_episodes(world, 1, rng, split_for_seed(8))[0]
    env.reset(episode)

    start_heading = Heading(episode.start_heading)
    forward = np.array(start_heading.delta)
    right = np.array(start_heading.turned(Action.TURN_RIGHT).delta)
    displacement = np.zeros(2)
    net_quarters = 0
    for _ in range(100):
        action = Action(int(rng.integers(3)))
        before = env.cell
        result = env.step(action)
        moved = np.array(env.cell) - np.array(before)
        assert np.abs(moved).sum() <= 1 and world.is_floor(env.cell)
        displacement += moved
        net_quarters += {Action.TURN_LEFT: -1, Action.TURN_RIGHT: 1}.get(action, 0)
        assert result.obs.gps.tolist() == [displacement @ forward, displacement @ right]
        assert result.obs.compass == pytest.approx((net_quarters % 4) * math.pi / 2)
        if result.done:
            break
    print("  ✓ 100 step odometry 일치")


# geodesic


def test_geodesic_distance_examples():
    world = make_world(OPEN_ROOM, [("chair", (1, 1))])
    assert geodesic_distance(world.passable, (1, 1), [(1, 2)]) == 1
    assert geodesic_distance(world.passable, (1, 1), [(3, 3)]) == 4

    blocked = make_world(
        ["#######", "#.#...#", "###...#", "#.....#", "#.....#", "#.....#", "#######"],
        [("chair", (3, 3))],
    )
    with pytest.raises(EnvError):
        geodesic_distance(blocked.passable, (1, 1), [(3, 3)])


def test_geodesic_distance_matches_dijkstra_on_random_worlds():
    params = EnvParams()
    rng = np.random.default_rng(0)
    for seed in range(30):
        world = generate_world(seed, params)
        floor = list(zip(*np.nonzero(world.passable)))
        for _ in range(5):
            start = tuple(int(v) for v in floor[int(rng.integers(len(floor)))])
            target = tuple(int(v) for v in floor[int(rng.integers(len(floor)))])
            assert geodesic_distance(world.passable, start, [target]) == dijkstra_oracle(
                world.passable, start, [target]
            )


if __name__ == "__main__":
    test_generate_world_is_deterministic()
    test_world_invariants_over_many_seeds()
    test_generate_episodes_geodesic_matches_oracle()
    test_reset_is_repeatable_and_matches_oracle()
    test_stop_success_and_failure()
    test_odometry_matches_forward_displacements()
