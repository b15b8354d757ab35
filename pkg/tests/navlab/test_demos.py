"""
demos 테스트

SP / FE / HD surrogate 생성기, 데이터셋 입출력, 재생, 예산/부분집합
"""

import statistics
import sys
from pathlib import Path

import numpy as np
import pytest

# src 경로 추가
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root / "src"))

from common.config import DemoSource, EnvParams  # noqa: E402
from common.models import Action, DemoDataset, Demonstration, Episode, Heading, Split  # noqa: E402
from navlab.demos import (  # noqa: E402
    AgentMap,
    DatasetCorruptionError,
    DemoError,
    FrontierDemoGenerator,
    FrontierPlanner,
    ShortestPathDemoGenerator,
    SurrogateHumanDemoGenerator,
    build_budgeted_dataset,
    create_generator,
    merge_datasets,
    read_dataset,
    realize_path,
    replay,
    room_visit_order,
    subsample_nested,
    verify_dataset,
    write_dataset,
)
from navlab.gridnav import (  # noqa: E402
    GridNavEnv,
    PlacedObject,
    Room,
    WorldRegistry,
    WorldSpec,
    generate_suite,
    seeds_for_split,
    split_for_seed,
)

SINGLE_ROOM = EnvParams(
    width=7,
    height=7,
    room_count=(1, 1),
    categories=["chair"],
    room_types=["living_room"],
    instances_per_category=(1, 1),
)

OPEN_ROOM = [
    "#######",
    "#.....#",
    "#.....#",
    "#.....#",
    "#.....#",
    "#.....#",
    "#######",
]


def open_room_world(goal, seed=7):
    grid = np.array([[-1 if ch == "#" else 0 for ch in row] for row in OPEN_ROOM], dtype=np.int64)
    grid.setflags(write=False)
    room = Room(0, "living_room", 1, 1, 5, 5)
    return WorldSpec(
        seed=seed,
        grid=grid,
        rooms=(room,),
        objects=(PlacedObject("chair", goal),),
        params=SINGLE_ROOM,
    )


def registry_with(world):
    registry = WorldRegistry(world.params, known_seeds=[])
    registry.add(world)
    return registry


def episode_in(world, start, heading, geodesic):
    return Episode(
        episode_id=f"{world.seed}-manual-0",
        world_seed=world.seed,
        start_cell=start,
        start_heading=heading,
        goal_category="chair",
        geodesic_len=geodesic,
        split=split_for_seed(world.seed),
    )


def train_suite(params, worlds, per_world, seed=0):
    registry = WorldRegistry(params)
    seeds = seeds_for_split(Split.TRAIN, worlds, params.val_percent)
    return registry, generate_suite(registry, seeds, per_world, seed)


# Shortest-path


def test_sp_goal_one_cell_ahead():
    """목표가 바로 앞 → [FORWARD, STOP]"""
    print("테스트 1: SP 최소 예제")

    world = open_room_world((2, 3))
    registry = registry_with(world)
    demo = ShortestPathDemoGenerator(registry).generate(episode_in(world, (3, 3), Heading.N, 1))
    assert demo.actions == "FS"
    assert demo.success and demo.source == DemoSource.SP
    print(f"  ✓ actions={demo.actions}")


def test_realize_path_turns_then_forward():
    codes = Demonstration.encode(realize_path([(3, 3), (3, 4), (4, 4)], Heading.N))
    assert codes == "RFRF"
    assert Demonstration.encode(realize_path([(3, 3), (3, 2)], Heading.N)) == "LF"
    assert Demonstration.encode(realize_path([(3, 3), (4, 3)], Heading.N)) == "RRF"


def test_sp_demos_are_minimal():
    """SP 전진 횟수 == geodesic_len, 항상 성공, STOP 으로 끝남"""
    print("\n테스트 2: SP 최소성")

    registry, episodes = train_suite(EnvParams(), worlds=20, per_world=5)
    generator = ShortestPathDemoGenerator(registry)
    for episode in episodes:
        demo = generator.generate(episode)
        assert demo.actions.count("F") == episode.geodesic_len
        assert demo.success and demo.actions.endswith("S")
        assert demo.length <= registry.params.max_steps
    print(f"  ✓ {len(episodes)}개 에피소드 최소 경로")


@pytest.mark.slow
def test_sp_replay_reproduces_success():
    """1000개 에피소드: 재생 결과 success == 기록된 success"""
    print("\n테스트 3: SP 재생 (1000 episodes)")

    registry, episodes = train_suite(EnvParams(), worlds=100, per_world=10, seed=3)
    generator = ShortestPathDemoGenerator(registry)
    demos = [generator.generate(e) for e in episodes]
    assert len(demos) == 1000
    assert verify_dataset(demos, registry) == []
    print("  ✓ 1000/1000 재생 일치")


# Frontier exploration


def test_fe_degenerates_to_shortest_path_when_goal_visible():
    """시작부터 목표가 보이면 FE == SP"""
    world = open_room_world((2, 3))
    registry = registry_with(world)
    episode = episode_in(world, (5, 3), Heading.N, 3)

    sp = ShortestPathDemoGenerator(registry).generate(episode)
    fe = FrontierDemoGenerator(registry).generate(episode)
    assert fe.actions == sp.actions == "FFFS"
    assert fe.success


def test_fe_coverage_is_monotone():
    """목표를 보기 전까지 known-free 셀 수는 줄지 않음"""
    print("\n테스트 4: FE coverage 단조성")

    registry, episodes = train_suite(EnvParams(), worlds=10, per_world=2, seed=5)
    for episode in episodes:
        env = GridNavEnv(registry)
        obs = env.reset(episode)
        planner = FrontierPlanner(env.world, episode)
        counts = []
        while not env.done and not planner.map.goal_cells:
            action = planner.act(env, obs)
            counts.append(planner.map.known_free_count)
            obs = env.step(action).obs
        assert all(a <= b for a, b in zip(counts, counts[1:]))
    print(f"  ✓ {len(episodes)}개 에피소드")


@pytest.mark.slow
def test_fe_and_hd_success_on_world_suite():
    """50개 world: 넉넉한 max_steps 에서 FE 100% 성공, HD ≥ FE"""
    print("\n테스트 5: FE / HD 성공률")

    params = EnvParams(max_steps=1000)
    registry, episodes = train_suite(params, worlds=50, per_world=1, seed=9)
    fe = FrontierDemoGenerator(registry)
    hd = SurrogateHumanDemoGenerator(registry, detour_prob=0.1)

    fe_success = [fe.generate(e).success for e in episodes]
    hd_success = [hd.generate(e, np.random.default_rng(i)).success for i, e in enumerate(episodes)]
    assert all(fe_success), "FE 가 탐색 가능한 world 에서 실패했습니다"
    assert sum(hd_success) >= sum(fe_success)
    print(f"  ✓ FE {sum(fe_success)}/50, HD {sum(hd_success)}/50")


# HD surrogate


def test_hd_single_room_zero_noise_ignores_rng():
    """노이즈 0 + 방 1개 → rng seed 와 무관하게 동일한 행동"""
    registry, episodes = train_suite(SINGLE_ROOM, worlds=5, per_world=2)
    generator = SurrogateHumanDemoGenerator(registry, detour_prob=0.0)
    for episode in episodes:
        runs = {generator.generate(episode, np.random.default_rng(s)).actions for s in range(4)}
        assert len(runs) == 1


def test_hd_visits_rooms_by_prior():
    registry, episodes = train_suite(EnvParams(), worlds=5, per_world=2)
    for episode in episodes:
        world = registry.get(episode.world_seed)
        order = room_visit_order(world, episode)
        priors = [world.params.prior(episode.goal_category, r.room_type) for r in order]
        assert priors == sorted(priors, reverse=True)


@pytest.mark.slow
def test_hd_is_shorter_than_fe_when_goal_in_top_room():
    """노이즈 0, 목표가 최고 prior 방에 있을 때 HD 경로 중앙값 ≤ FE"""
    print("\n테스트 6: HD vs FE 경로 길이")

    registry, episodes = train_suite(EnvParams(max_steps=1000), worlds=100, per_world=3, seed=13)
    fe = FrontierDemoGenerator(registry)
    hd = SurrogateHumanDemoGenerator(registry, detour_prob=0.0)

    hd_lengths, fe_lengths = [], []
    for episode in episodes:
        world = registry.get(episode.world_seed)
        top = room_visit_order(world, episode)[0]
        if not any(top.contains(cell) for cell in world.instances(episode.goal_category)):
            continue
        hd_lengths.append(hd.generate(episode).actions.count("F"))
        fe_lengths.append(fe.generate(episode).actions.count("F"))
        if len(hd_lengths) == 100:
            break

    assert len(hd_lengths) >= 50
    assert statistics.median(hd_lengths) <= statistics.median(fe_lengths)
    print(f"  ✓ median HD={statistics.median(hd_lengths)}, FE={statistics.median(fe_lengths)}")


def test_hd_rejects_bad_detour_prob():
    with pytest.raises(DemoError):
        SurrogateHumanDemoGenerator(WorldRegistry(EnvParams()), detour_prob=1.5)


# Dataset


def _small_dataset(source=DemoSource.SP, worlds=4, per_world=3):
    registry, episodes = train_suite(EnvParams(), worlds=worlds, per_world=per_world)
    generator = create_generator(source, registry)
    demos = [generator.generate(e) for e in episodes]
    return registry, DemoDataset.build(source, registry.params, demos)


def test_dataset_roundtrip(tmp_path):
    """write → read 는 deep-equal"""
    print("\n테스트 7: 데이터셋 저장/로드")

    _, dataset = _small_dataset()
    path = write_dataset(dataset, tmp_path / "sp.jsonl")
    loaded = read_dataset(path)
    assert loaded == dataset
    assert loaded.header.count == len(dataset.demonstrations)
    assert loaded.total_steps == sum(d.length for d in dataset.demonstrations)
    print(f"  ✓ {loaded.header.count}개 데모, {loaded.total_steps} step")


def test_empty_dataset_roundtrip(tmp_path):
    dataset = DemoDataset.build(DemoSource.FE, EnvParams(), [])
    loaded = read_dataset(write_dataset(dataset, tmp_path / "empty.jsonl"))
    assert loaded.header.count == 0 and loaded.demonstrations == []


def test_truncated_dataset_is_corrupt(tmp_path):
    """잘린 파일 → 부분 데이터셋이 아니라 에러"""
    _, dataset = _small_dataset()
    path = write_dataset(dataset, tmp_path / "sp.jsonl")
    raw = path.read_bytes()

    cut = tmp_path / "cut.jsonl"
    cut.write_bytes(raw[: len(raw) - 40])
    with pytest.raises(DatasetCorruptionError):
        read_dataset(cut)

    dropped = tmp_path / "dropped.jsonl"
    lines = raw.decode("utf-8").splitlines(keepends=True)
    dropped.write_text("".join(lines[:-1]), encoding="utf-8")
    with pytest.raises(DatasetCorruptionError, match="count"):
        read_dataset(dropped)

    with pytest.raises(DatasetCorruptionError):
        read_dataset(tmp_path / "missing.jsonl")


def test_merge_datasets_recomputes_header():
    _, first = _small_dataset(worlds=2)
    _, second = _small_dataset(worlds=3)
    merged = merge_datasets([first, second])
    assert merged.header.count == len(first) + len(second)
    assert merged.total_steps == first.total_steps + second.total_steps

    _, fe = _small_dataset(DemoSource.FE, worlds=2)
    with pytest.raises(DemoError):
        merge_datasets([first, fe])


# Replay


def test_replay_pairs_and_determinism():
    """쌍의 수 == 행동 수, 두 번 재생 → 동일 관측"""
    registry, dataset = _small_dataset(DemoSource.FE, worlds=3, per_world=2)
    for demo in dataset.demonstrations:
        first = replay(demo, registry)
        second = replay(demo, registry)
        assert len(first) == demo.length
        assert first.success == demo.success
        assert [a for _, a in first] == demo.action_list()
        assert all(o1.equals(o2) for (o1, _), (o2, _) in zip(first, second))


def test_replay_rejects_action_after_end():
    world = open_room_world((2, 3))
    registry = registry_with(world)
    demo = Demonstration(
        episode=episode_in(world, (3, 3), Heading.N, 1),
        source=DemoSource.SP,
        actions="FSF",
        success=True,
    )
    with pytest.raises(DemoError, match="index 2"):
        replay(demo, registry)


# 예산 / 부분집합


def test_budgeted_dataset_reaches_target():
    """total_steps ≥ 목표, 초과분은 데모 하나 미만, workers 수와 무관"""
    print("\n테스트 8: step 예산 데이터셋")

    registry, episodes = train_suite(EnvParams(), worlds=60, per_world=5)
    target = 1500
    sizes = {}
    for source in DemoSource:
        generator = create_generator(source, registry)
        dataset = build_budgeted_dataset(generator, episodes, target, seed=1, show_progress=False)
        assert dataset.total_steps >= target
        longest = max(d.length for d in dataset.demonstrations)
        assert dataset.total_steps - target < longest
        assert all(d.success for d in dataset.demonstrations)
        sizes[source] = dataset
        print(f"  ✓ {source.value}: {dataset.header.count}개 데모, {dataset.total_steps} step")

    # SP 데모가 가장 짧으므로 같은 예산에 더 많은 데모가 필요
    assert sizes[DemoSource.SP].header.count >= sizes[DemoSource.FE].header.count

    generator = create_generator(DemoSource.HD_SURROGATE, registry)
    serial = build_budgeted_dataset(generator, episodes, target, seed=1, show_progress=False)
    parallel = build_budgeted_dataset(generator, episodes, target, seed=1, workers=3, show_progress=False)
    assert serial == parallel


def test_subsample_nested():
    _, dataset = _small_dataset(worlds=8, per_world=4)
    sizes = [dataset.total_steps // 4, dataset.total_steps // 2, dataset.total_steps]
    subsets = subsample_nested(dataset, sizes, seed=0)

    assert [s.total_steps >= size for s, size in zip(subsets, sizes)] == [True, True, True]
    for small, large in zip(subsets, subsets[1:]):
        ids = {d.episode_id for d in large.demonstrations}
        assert {d.episode_id for d in small.demonstrations} <= ids

    with pytest.raises(DemoError):
        subsample_nested(dataset, [10, 5], seed=0)
    with pytest.raises(DemoError):
        subsample_nested(dataset, [dataset.total_steps + 1], seed=0)


_GOAL_MAP_ROWS = [
    "FFFFF",
    "FWWWF",
    "F???F",
]
_GOAL_MAP_CODES = {"F": 1, "W": 2, "?": 0}


def _goal_map(rows):
    amap = AgentMap((len(rows), len(rows[0])), goal_code=11, depth=5, half_width=2)
    amap.state[:] = [[_GOAL_MAP_CODES[ch] for ch in row] for row in rows]
    return amap


def test_goal_action_follows_known_free_cells():
    """목표를 본 뒤에는 unknown 을 가로지르지 않고 known-free 경로로 접근"""
    print("\n테스트: 목표 접근은 known 지도 위 최단 경로")
    amap = _goal_map(_GOAL_MAP_ROWS)
    amap.goal_cells.add((2, 4))

    # (2,1..3) 을 통과하면 오른쪽 회전이 먼저지만 known 경로는 북쪽으로 돌아감
    assert amap.goal_action((2, 0), Heading.N) == Action.FORWARD
    assert amap.travel_action((2, 0), Heading.N, [(2, 4)]) == Action.TURN_RIGHT
    assert amap.goal_action((2, 4), Heading.W) == Action.STOP
    print("  ✓ 우회 경로의 첫 행동 FORWARD")


def test_goal_action_falls_back_to_frontier_when_unreachable():
    """known-free 셀로 목표에 닿을 수 없으면 frontier 탐색을 이어감"""
    amap = _goal_map(["F??", "???", "??F"])
    amap.goal_cells.add((2, 2))

    assert amap.goal_action((0, 0), Heading.N) == amap.frontier_action((0, 0), Heading.N)


if __name__ == "__main__":
    test_goal_action_follows_known_free_cells()
    test_sp_goal_one_cell_ahead()
    test_sp_demos_are_minimal()
    test_fe_coverage_is_monotone()
    test_budgeted_dataset_reaches_target()
