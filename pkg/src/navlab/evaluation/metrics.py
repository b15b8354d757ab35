"""
평가 지표와 실패 유형 태깅
"""

from typing import Dict, Iterable, Sequence

import numpy as np

from common.models import TAGGABLE_FAILURES, EvalRecord, EvalSummary, FailureTag


class EvaluationError(Exception):
    """평가 에러"""

    pass


def spl(success: bool, geodesic_len: int, path_len: int) -> float:
    """
    Success weighted by Path Length

    Args:
        success: 성공 여부
        geodesic_len: 최단 경로 길이 l (1 이상)
        path_len: 실제 이동 셀 수 p (0 이상)

    Returns:
        성공이면 l / max(p, l), 실패면 0
    """
    if geodesic_len < 1 or path_len < 0:
        raise EvaluationError(f"spl: 잘못된 길이 l={geodesic_len}, p={path_len}")
    if not success:
        return 0.0
    return geodesic_len / max(path_len, geodesic_len)


def tag_failure(record: EvalRecord, success_radius: int = 1, loop_threshold: int = 4) -> FailureTag:
    """
    실패 에피소드의 원인 분류

    우선순위: LAST_MILE (종료 거리 ≤ 2·R) → RECOGNITION (목표를 본 적 있음)
    → LOOPING (한 셀 방문 ≥ loop_threshold) → EXPLORATION

    Args:
        record: 평가 레코드
        success_radius: 성공 반경 R
        loop_threshold: LOOPING 판정 방문 횟수

    Returns:
        FailureTag (성공이면 NONE)
    """
    if record.success:
        return FailureTag.NONE
    if record.final_distance_to_goal <= 2 * success_radius:
        return FailureTag.LAST_MILE
    if record.goal_ever_in_view:
        return FailureTag.RECOGNITION
    if record.max_revisits >= loop_threshold:
        return FailureTag.LOOPING
    return FailureTag.EXPLORATION


def failure_histogram(
    records: Iterable[EvalRecord], tags: Sequence[FailureTag] = TAGGABLE_FAILURES
) -> Dict[str, int]:
    """실패 태그별 개수 (tags 에 있는 태그는 0 이어도 포함)"""
    histogram = {tag.value: 0 for tag in tags}
    for record in records:
        if record.success:
            continue
        key = record.failure_tag.value
        histogram[key] = histogram.get(key, 0) + 1
    return histogram


def summarize(records: Sequence[EvalRecord], mode: str = "argmax") -> EvalSummary:
    """
    레코드 집계 (에피소드 평균)

    Raises:
        EvaluationError: 레코드가 비어 있을 때
    """
    if not records:
        raise EvaluationError("평가할 에피소드가 없습니다")
    successes = np.array([r.success for r in records], dtype=np.float64)
    spls = np.array([spl(r.success, r.geodesic_len, r.path_len) for r in records])
    return EvalSummary(
        success=float(successes.mean()),
        spl=float(spls.mean()),
        n=len(records),
        mode=mode,
        failure_histogram=failure_histogram(records),
    )
