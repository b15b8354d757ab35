"""
Demo Forge

source 별 생성기 선택과 step 예산 단위의 데이터셋 구축
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, Iterator, List, Optional, Type

import numpy as np

from common.config import DemoConfig, DemoSource
from common.models import DemoDataset, Demonstration, Episode
from common.utils import get_logger, progress_bar
from navlab.gridnav import WorldRegistry

from .base import BaseDemoGenerator, DemoError
from .frontier import FrontierDemoGenerator
from .shortest_path import ShortestPathDemoGenerator
from .surrogate_human import SurrogateHumanDemoGenerator

logger = get_logger("demos")

GENERATORS: Dict[DemoSource, Type[BaseDemoGenerator]] = {
    DemoSource.SP: ShortestPathDemoGenerator,
    DemoSource.FE: FrontierDemoGenerator,
    DemoSource.HD_SURROGATE: SurrogateHumanDemoGenerator,
}


def create_generator(
    source: DemoSource,
    registry: WorldRegistry,
    config: Optional[DemoConfig] = None,
) -> BaseDemoGenerator:
    """
    source 에 맞는 생성기 생성

    Args:
        source: 데모 source
        registry: world registry
        config: 데모 설정 (HD 의 detour_prob 에 사용)

    Returns:
        생성기 인스턴스
    """
    config = config or DemoConfig(source=source)
    if source == DemoSource.HD_SURROGATE:
        return SurrogateHumanDemoGenerator(registry, detour_prob=config.detour_prob)
    return GENERATORS[source](registry)


def episode_rng(seed: int, episode: Episode) -> np.random.Generator:
    """(seed, episode_id) 로만 결정되는 에피소드 전용 rng"""
    digest = hashlib.blake2b(episode.episode_id.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng([seed, int.from_bytes(digest, "little")])


def _chunks(items: Iterable[Episode], size: int) -> Iterator[List[Episode]]:
    chunk: List[Episode] = []
    for item in items:
        chunk.append(item)
        if len(chunk) == size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def build_budgeted_dataset(
    generator: BaseDemoGenerator,
    episodes: Iterable[Episode],
    target_steps: int,
    seed: int = 0,
    success_only: bool = True,
    workers: int = 1,
    show_progress: bool = True,
) -> DemoDataset:
    """
    총 step 수가 target_steps 에 도달할 때까지 데모 수집

    source 마다 데모 길이가 달라도 데이터셋 크기를 step 예산으로 맞춥니다.
    각 데모는 (seed, episode) 만으로 결정되므로 workers 수와 무관하게 결과가 같습니다.

    Args:
        generator: 데모 생성기
        episodes: 에피소드 공급원 (필요한 만큼만 소비)
        target_steps: step 예산
        seed: 에피소드 rng 의 기본 seed
        success_only: 실패한 데모를 버릴지 여부
        workers: 동시 생성 스레드 수
        show_progress: tqdm 진행 막대 표시

    Returns:
        DemoDataset (total_steps ≥ target_steps, 에피소드가 부족하면 그 이하)
    """
    if workers < 1:
        raise DemoError(f"workers 는 1 이상이어야 합니다: {workers}")

    def generate(episode: Episode) -> Demonstration:
        return generator.generate(episode, episode_rng(seed, episode))

    demos: List[Demonstration] = []
    total = 0
    attempted = 0
    bar = progress_bar(target_steps, desc=f"demos[{generator.source.value}]", enabled=show_progress)
    with bar, ThreadPoolExecutor(max_workers=workers) as executor:
        for chunk in _chunks(episodes, workers * 4):
            for demo in executor.map(generate, chunk):
                if total >= target_steps:
                    break
                attempted += 1
                if success_only and not demo.success:
                    continue
                demos.append(demo)
                total += demo.length
                bar.update(demo.length)
            if total >= target_steps:
                break

    if total < target_steps:
        logger.warning(
            "%s: 에피소드가 부족해 예산 %d 중 %d step 만 수집했습니다",
            generator.source.value,
            target_steps,
            total,
        )
    logger.info(
        "%s: %d/%d 데모, %d step", generator.source.value, len(demos), attempted, total
    )
    return DemoDataset.build(generator.source, generator.registry.params, demos)
