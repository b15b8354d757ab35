"""
Inflection weighting

행동이 바뀌는 step (첫 step 포함) 을 sigma 배로 가중합니다.
sigma 는 데이터셋 전체에서 total_steps / total_inflections 로 정합니다.
"""

from typing import Iterable, Sequence, Union

import numpy as np

from common.models import Action, Demonstration


class TrainingError(Exception):
    """학습 설정/데이터 에러"""

    pass


ActionSeq = Union[Sequence[int], Sequence[Action], np.ndarray]


def inflection_mask(actions: ActionSeq) -> np.ndarray:
    """
    inflection 위치

    Args:
        actions: 행동 시퀀스 (1차원)

    Returns:
        bool 배열, t == 0 이거나 a_t != a_{t-1} 이면 True
    """
    codes = np.asarray([int(a) for a in actions], dtype=np.int64)
    mask = np.ones(len(codes), dtype=bool)
    if len(codes) > 1:
        mask[1:] = codes[1:] != codes[:-1]
    return mask


def inflection_weights(actions: ActionSeq, sigma: float) -> np.ndarray:
    """
    step 별 가중치

    Raises:
        TrainingError: 빈 시퀀스이거나 sigma <= 0
    """
    if len(actions) == 0:
        raise TrainingError("inflection_weights: 빈 행동 시퀀스")
    if sigma <= 0:
        raise TrainingError(f"inflection_weights: sigma 는 양수여야 합니다 ({sigma})")
    return np.where(inflection_mask(actions), float(sigma), 1.0)


def dataset_inflection_sigma(demos: Iterable[Demonstration]) -> float:
    """
    데이터셋 inflection 계수 total_steps / total_inflections

    Raises:
        TrainingError: 행동이 하나도 없을 때
    """
    steps = 0
    inflections = 0
    for demo in demos:
        if demo.length == 0:
            continue
        steps += demo.length
        inflections += int(inflection_mask(demo.action_list()).sum())
    if inflections == 0:
        raise TrainingError("데이터셋에 행동이 없어 inflection 계수를 정할 수 없습니다")
    return steps / inflections
