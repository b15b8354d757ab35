"""
행동 선택

sample 은 softmax(logits) 분포를 따르고, argmax 동률은 가장 작은 행동 index 를 고릅니다.
"""

from typing import Union

import numpy as np

from .model import PolicyError

ActionIndex = Union[int, np.ndarray]


def log_probs(logits: np.ndarray) -> np.ndarray:
    """안정적인 log-softmax (마지막 축)"""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise PolicyError("logits 에 유한하지 않은 값이 있습니다")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def probs(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_probs(logits))


def sample_action(logits: np.ndarray, rng: np.random.Generator) -> ActionIndex:
    """
    softmax(logits) 에서 행동 샘플링

    Args:
        logits: (4,) 또는 (N, 4)
        rng: 난수 생성기

    Returns:
        1차원 입력이면 int, 2차원이면 (N,) int 배열
    """
    p = probs(logits)
    single = p.ndim == 1
    p2 = p[None, :] if single else p
    cdf = np.cumsum(p2, axis=1)
    u = rng.random(p2.shape[0])[:, None]
    actions = np.minimum((cdf <= u).sum(axis=1), p2.shape[1] - 1)
    return int(actions[0]) if single else actions.astype(np.int64)


def argmax_action(logits: np.ndarray) -> ActionIndex:
    """최댓값 행동 (동률이면 가장 작은 index)"""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise PolicyError("logits 에 유한하지 않은 값이 있습니다")
    actions = np.argmax(logits, axis=-1)
    return int(actions) if logits.ndim == 1 else actions.astype(np.int64)
