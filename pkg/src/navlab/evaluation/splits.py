"""
정책 쌍을 비교하는 adversarial split
"""

from typing import Iterable, List, Sequence, Set

from common.models import EvalRecord, Episode

from .metrics import EvaluationError


def build_adversarial_split(
    records_a: Sequence[EvalRecord], records_b: Sequence[EvalRecord]
) -> Set[str]:
    """
    B 에 불리한 에피소드 집합

    {A 성공 ∧ B 실패} ∪ {둘 다 실패}. 따라서 이 split 에서 B 의 성공률은 항상 0 입니다.

    Args:
        records_a: 유리한 쪽 정책의 평가 레코드
        records_b: 불리한 쪽 정책의 평가 레코드

    Returns:
        episode_id 집합

    Raises:
        EvaluationError: 두 레코드의 에피소드 집합이 다를 때
    """
    by_a = {r.episode_id: r for r in records_a}
    by_b = {r.episode_id: r for r in records_b}
    if set(by_a) != set(by_b):
        missing = sorted(set(by_a) ^ set(by_b))
        raise EvaluationError(f"두 평가의 에피소드가 다릅니다: {missing[:5]}")

    split = set()
    for episode_id, b in by_b.items():
        a = by_a[episode_id]
        if a.success and not b.success:
            split.add(episode_id)
        elif not a.success and not b.success:
            split.add(episode_id)
    return split


def select_episodes(episodes: Iterable[Episode], episode_ids: Set[str]) -> List[Episode]:
    """원래 순서를 유지하며 split 에 속한 에피소드만 선택"""
    return [ep for ep in episodes if ep.episode_id in episode_ids]
