"""
데모 재생

관측은 디스크에 저장하지 않고 env 에서 다시 만듭니다.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

from common.models import Action, Demonstration
from navlab.gridnav import EnvError, GridNavEnv, Observation, StepInfo, WorldRegistry

from .base import DemoError

Pair = Tuple[Observation, Action]


@dataclass
class ReplayResult:
    """(관측, 행동) 쌍과 마지막 step 정보"""

    pairs: List[Pair] = field(default_factory=list)
    final_info: Optional[StepInfo] = None

    @property
    def success(self) -> bool:
        return bool(self.final_info and self.final_info.success)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.pairs)


def replay(demo: Demonstration, registry: WorldRegistry) -> ReplayResult:
    """
    데모의 행동을 에피소드 시작부터 다시 실행

    Args:
        demo: 재생할 데모
        registry: 에피소드 world 를 찾을 registry

    Returns:
        ReplayResult (쌍의 수 == 행동 수)

    Raises:
        DemoError: world 를 찾을 수 없거나 에피소드 종료 후 행동이 남아 있을 때
    """
    env = GridNavEnv(registry)
    try:
        obs = env.reset(demo.episode)
    except EnvError as e:
        raise DemoError(f"{demo.episode_id}: {e}") from e

    result = ReplayResult()
    for index, action in enumerate(demo.action_list()):
        if env.done:
            raise DemoError(f"{demo.episode_id}: 에피소드 종료 후 행동이 있습니다 (index {index})")
        result.pairs.append((obs, action))
        step = env.step(action)
        obs = step.obs
        result.final_info = step.info
    return result


def verify_dataset(demos: List[Demonstration], registry: WorldRegistry) -> List[str]:
    """재생 결과가 기록된 success 와 다른 데모의 episode_id 목록"""
    mismatched = []
    for demo in demos:
        try:
            if replay(demo, registry).success != demo.success:
                mismatched.append(demo.episode_id)
        except DemoError:
            mismatched.append(demo.episode_id)
    return mismatched
