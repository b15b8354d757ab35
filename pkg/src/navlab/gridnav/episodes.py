"""
에피소드 생성 / 저장

split 은 world seed 의 해시로 결정되는 순수 함수이므로 train/val world 가 겹치지 않습니다.
"""

import hashlib
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from common.config import EnvParams
from common.models import Episode, Heading, Split
from common.utils import JsonlError, read_jsonl, write_jsonl

from .generator import WorldRegistry, WorldSpec
from .geometry import bfs_distances, chebyshev

EPISODE_FORMAT_VERSION = 1


class EpisodeError(Exception):
    """에피소드 생성/로드 에러"""

    pass


def split_for_seed(seed: int, val_percent: int = 20) -> Split:
    """world seed → train/val (blake2b 해시 mod 100)"""
    digest = hashlib.blake2b(int(seed).to_bytes(8, "little", signed=False), digest_size=8)
    bucket = int.from_bytes(digest.digest(), "little") % 100
    return Split.VAL if bucket < val_percent else Split.TRAIN


def seeds_for_split(split: Split, count: int, val_percent: int = 20, start: int = 0) -> List[int]:
    """split 에 속하는 world seed 를 start 부터 count 개 수집"""
    if (val_percent == 0 and split == Split.VAL) or (val_percent == 100 and split == Split.TRAIN):
        raise EpisodeError(f"val_percent={val_percent} 에서는 {split.value} world 가 없습니다")
    seeds = []
    seed = start
    while len(seeds) < count:
        if split_for_seed(seed, val_percent) == split:
            seeds.append(seed)
        seed += 1
    return seeds


def eligible_starts(world: WorldSpec, category: str, success_radius: int) -> List[Tuple[int, int]]:
    """목표의 모든 인스턴스로부터 Chebyshev 거리 > 성공 반경인 floor 셀"""
    goals = world.instances(category)
    rows, cols = np.nonzero(world.passable)
    return [
        (int(r), int(c))
        for r, c in zip(rows, cols)
        if all(chebyshev((int(r), int(c)), g) > success_radius for g in goals)
    ]


def generate_episodes(
    world: WorldSpec,
    n: int,
    rng: np.random.Generator,
    split: Split,
    start_index: int = 0,
) -> List[Episode]:
    """
    world 하나에서 에피소드 n 개 생성

    Args:
        world: 대상 world
        n: 에피소드 수 (1 이상)
        rng: 난수 생성기
        split: world seed 의 split 과 일치해야 함
        start_index: episode_id 번호 시작값

    Returns:
        Episode 목록

    Raises:
        EpisodeError: n < 1, split 불일치, 또는 가능한 시작 셀이 없을 때
    """
    params = world.params
    if n < 1:
        raise EpisodeError(f"n 은 1 이상이어야 합니다: {n}")
    expected = split_for_seed(world.seed, params.val_percent)
    if split != expected:
        raise EpisodeError(f"world {world.seed} 는 {expected.value} split 입니다 (요청: {split.value})")

    starts_by_category = {
        category: eligible_starts(world, category, params.success_radius)
        for category in params.categories
    }
    usable = [c for c in params.categories if starts_by_category[c]]
    if not usable:
        raise EpisodeError(f"world {world.seed}: 성공 반경 밖의 시작 셀이 없습니다")

    distance_fields = {c: bfs_distances(world.passable, world.instances(c)) for c in usable}

    episodes = []
    for i in range(start_index, start_index + n):
        category = usable[int(rng.integers(len(usable)))]
        candidates = starts_by_category[category]
        start = candidates[int(rng.integers(len(candidates)))]
        heading = Heading(int(rng.integers(4)))
        geodesic = int(distance_fields[category][start])
        if geodesic < 1:
            raise EpisodeError(f"world {world.seed}: {start} 에서 {category} 에 도달할 수 없습니다")
        episodes.append(
            Episode(
                episode_id=f"{world.seed}-{split.value}-{i}",
                world_seed=world.seed,
                start_cell=start,
                start_heading=heading,
                goal_category=category,
                geodesic_len=geodesic,
                split=split,
            )
        )
    return episodes


def generate_suite(
    registry: WorldRegistry,
    seeds: Sequence[int],
    per_world: int,
    seed: int,
) -> List[Episode]:
    """seed 목록의 각 world 에서 per_world 개씩 생성 (split 은 seed 로 결정)"""
    episodes: List[Episode] = []
    children = np.random.SeedSequence(seed).spawn(len(seeds))
    for world_seed, child in zip(seeds, children):
        world = registry.get(world_seed)
        split = split_for_seed(world_seed, registry.params.val_percent)
        episodes.extend(generate_episodes(world, per_world, np.random.default_rng(child), split))
    return episodes


def write_episodes(episodes: Iterable[Episode], env_params: EnvParams, path: Union[str, Path]) -> Path:
    """에피소드 JSON-lines 저장 (header: format_version, env_params)"""
    header = {
        "format_version": EPISODE_FORMAT_VERSION,
        "env_params": env_params.model_dump(mode="json"),
    }
    return write_jsonl(path, header, episodes)


def load_episodes(path: Union[str, Path]) -> Tuple[EnvParams, List[Episode]]:
    """
    에피소드 JSON-lines 로드

    Raises:
        EpisodeError: 파일 형식/버전 오류
    """
    try:
        header, episodes = read_jsonl(path, Episode)
    except JsonlError as e:
        raise EpisodeError(str(e)) from e
    if header.get("format_version") != EPISODE_FORMAT_VERSION:
        raise EpisodeError(f"지원하지 않는 에피소드 형식 버전: {header.get('format_version')}")
    try:
        env_params = EnvParams.model_validate(header["env_params"])
    except (KeyError, ValidationError) as e:
        raise EpisodeError(f"env_params header 가 올바르지 않습니다: {e}") from e
    return env_params, episodes
