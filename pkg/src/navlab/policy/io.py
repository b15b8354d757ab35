"""
정책 체크포인트 저장/로드
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from common.config import PolicyConfig
from navlab.autodiff import CheckpointError, CheckpointMeta, load_checkpoint, save_checkpoint

from .model import PolicyError, PolicyParams, init_policy


def save_policy(
    path: Union[str, Path],
    params: PolicyParams,
    step: int,
    config_hash: str,
    phase: str,
    rng_state: Optional[Dict[str, Any]] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """정책 파라미터를 'group/name' 키로 저장"""
    meta = CheckpointMeta(
        step=step,
        rng_state=rng_state or {},
        config_hash=config_hash,
        phase=phase,
        extra={"policy": params.config.model_dump(mode="json"), **(extra or {})},
    )
    return save_checkpoint(path, params.arrays(), meta)


def load_policy(
    path: Union[str, Path], config: Optional[PolicyConfig] = None
) -> Tuple[PolicyParams, CheckpointMeta]:
    """
    체크포인트에서 정책 로드

    Args:
        path: 체크포인트 경로
        config: 기대하는 구조 (None 이면 체크포인트에 기록된 구조)

    Returns:
        (PolicyParams, CheckpointMeta)

    Raises:
        PolicyError: 체크포인트를 읽을 수 없거나 구조가 config 와 다를 때
    """
    try:
        meta, arrays = load_checkpoint(path)
    except CheckpointError as e:
        raise PolicyError(str(e)) from e

    if config is None:
        stored = meta.extra.get("policy")
        if stored is None:
            raise PolicyError(f"{path}: 체크포인트에 정책 구조 정보가 없습니다")
        config = PolicyConfig.model_validate(stored)

    params = init_policy(config, np.random.default_rng(0))
    expected = params.signature()
    actual = {name: tuple(a.shape) for name, a in arrays.items()}
    if expected != actual:
        diff = sorted(set(expected.items()) ^ set(actual.items()))
        raise PolicyError(f"{path}: 정책 구조 불일치 {diff[:6]}")
    params.load_arrays(arrays)
    return params, meta
