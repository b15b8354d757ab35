"""
BC 정책에 대한 KL 패널티 (VPT 방식 finetuning)
"""

from typing import Any

import numpy as np

from navlab.autodiff import Tensor
from navlab.autodiff import functional as F

from .gae import FinetuneError


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def kl_divergence(p_logits: np.ndarray, q_logits: np.ndarray) -> np.ndarray:
    """행별 KL(softmax(p) ‖ softmax(q))"""
    p_logits = np.atleast_2d(np.asarray(p_logits, dtype=np.float64))
    q_logits = np.atleast_2d(np.asarray(q_logits, dtype=np.float64))
    if p_logits.shape != q_logits.shape:
        raise FinetuneError(f"kl_divergence: shape {p_logits.shape} != {q_logits.shape}")
    log_p = _log_softmax(p_logits)
    log_q = _log_softmax(q_logits)
    return np.sum(np.exp(log_p) * (log_p - log_q), axis=-1)


def kl_penalty(bc_logits: np.ndarray, current_logits: Any, rho: float) -> Tensor:
    """
    ρ · mean KL(π_BC ‖ π_θ)

    bc_logits 는 상수이고 gradient 는 current_logits 로만 흐릅니다.

    Args:
        bc_logits: (N, 4) 기준 BC 정책 logit
        current_logits: (N, 4) 현재 정책 logit (Tensor 또는 배열)
        rho: 패널티 계수 (≥ 0)

    Returns:
        스칼라 Tensor
    """
    if rho < 0:
        raise FinetuneError(f"kl_penalty: rho 는 0 이상이어야 합니다 ({rho})")
    if isinstance(current_logits, Tensor):
        current = current_logits
    else:
        current = Tensor(np.atleast_2d(np.asarray(current_logits, dtype=np.float64)))
    bc_logits = np.atleast_2d(np.asarray(bc_logits, dtype=np.float64))
    if bc_logits.shape != current.shape:
        raise FinetuneError(f"kl_penalty: shape {bc_logits.shape} != {current.shape}")

    log_p = _log_softmax(bc_logits)
    p = np.exp(log_p)
    cross = F.sum(F.mul(F.log_softmax(current, axis=1), p), axis=1)
    kl = F.sub(np.sum(p * log_p, axis=1), cross)
    return F.mul(F.mean(kl), float(rho))


def rho_step(rho: float, decay: float = 0.995) -> float:
    """policy update 한 번 후의 ρ"""
    if not 0.0 < decay <= 1.0:
        raise FinetuneError(f"rho_step: decay 는 (0, 1] 범위여야 합니다 ({decay})")
    return rho * decay
