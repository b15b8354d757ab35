"""
파라미터 그룹 / Adam / gradient clipping
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import AutodiffError, Tensor


@dataclass
class ParamGroup:
    """
    이름 있는 파라미터 묶음

    frozen 그룹의 파라미터는 optimizer step 을 몇 번 거쳐도 바이트 단위로 동일합니다.
    """

    name: str
    tensors: Dict[str, Tensor]
    frozen: bool = False
    lr: float = 0.0

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise AutodiffError(f"{self.name}: lr 은 0 이상이어야 합니다 ({self.lr})")

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self.tensors.items())

    def qualified(self) -> Dict[str, Tensor]:
        """'group/name' → Tensor"""
        return {f"{self.name}/{k}": t for k, t in self.tensors.items()}

    def set_frozen(self, frozen: bool) -> None:
        """frozen 상태와 requires_grad 를 함께 변경"""
        self.frozen = frozen
        for tensor in self.tensors.values():
            tensor.requires_grad = not frozen

    def num_params(self) -> int:
        return int(np.sum([t.size for t in self.tensors.values()]))

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.tensors.items()}


@dataclass
class AdamState:
    """Adam 1차/2차 moment 와 step 카운터"""

    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5
    weight_decay: float = 0.0

    @classmethod
    def for_group(
        cls,
        group: ParamGroup,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-5,
        weight_decay: float = 0.0,
    ) -> "AdamState":
        return cls(
            m={k: np.zeros_like(t.data) for k, t in group.tensors.items()},
            v={k: np.zeros_like(t.data) for k, t in group.tensors.items()},
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            weight_decay=weight_decay,
        )


@dataclass
class AdamStepResult:
    """adam_step 결과 (frozen 이면 applied=False)"""

    group: str
    applied: bool
    step: int
    lr: float
    reason: str = ""


def adam_step(
    group: ParamGroup,
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: Optional[float] = None,
) -> AdamStepResult:
    """
    bias-corrected Adam 업데이트

    Args:
        group: 업데이트할 파라미터 그룹
        grads: 파라미터 이름 → gradient
        state: 그룹의 Adam 상태 (in-place 갱신)
        lr: 적용할 lr (None 이면 group.lr)

    Returns:
        AdamStepResult (frozen 그룹은 applied=False, 파라미터/상태 모두 변경 없음)

    Raises:
        AutodiffError: lr 이 음수이거나 gradient shape 가 맞지 않을 때
    """
    lr = group.lr if lr is None else float(lr)
    if lr < 0:
        raise AutodiffError(f"{group.name}: lr 은 0 이상이어야 합니다 ({lr})")

    if group.frozen:
        return AdamStepResult(group=group.name, applied=False, step=state.t, lr=lr, reason="frozen")

    for name, tensor in group.tensors.items():
        grad = grads.get(name)
        if grad is not None and grad.shape != tensor.shape:
            raise AutodiffError(
                f"{group.name}/{name}: gradient shape {grad.shape} != 파라미터 shape {tensor.shape}"
            )

    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**state.t
    bias2 = 1.0 - b2**state.t

    for name, tensor in group.tensors.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(tensor.data)
        if state.weight_decay:
            grad = grad + state.weight_decay * tensor.data

        state.m[name] = b1 * state.m[name] + (1.0 - b1) * grad
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * grad * grad

        if lr == 0.0:
            continue
        m_hat = state.m[name] / bias1
        v_hat = state.v[name] / bias2
        # 새 배열로 교체 (이전 snapshot 이 참조하는 배열은 그대로 유지)
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)

    return AdamStepResult(group=group.name, applied=True, step=state.t, lr=lr)


def global_norm(grads: Union[Mapping[str, np.ndarray], Sequence[np.ndarray]]) -> float:
    arrays = list(grads.values()) if isinstance(grads, Mapping) else list(grads)
    return float(np.sqrt(np.sum([np.sum(np.square(g)) for g in arrays])))


def clip_grad_norm(
    grads: Union[Dict[str, np.ndarray], List[np.ndarray]], max_norm: float
) -> Tuple[Union[Dict[str, np.ndarray], List[np.ndarray]], float]:
    """
    전역 L2 norm 기준 gradient clipping

    Args:
        grads: gradient 딕셔너리 또는 리스트
        max_norm: 최대 norm (> 0)

    Returns:
        (clipping 된 gradient, clipping 전 norm)
    """
    if max_norm <= 0:
        raise AutodiffError(f"clip_grad_norm: max_norm 은 양수여야 합니다 ({max_norm})")

    norm = global_norm(grads)
    if norm <= max_norm + 1e-12:
        return grads, norm

    scale = max_norm / norm
    if isinstance(grads, dict):
        return {k: g * scale for k, g in grads.items()}, norm
    return [g * scale for g in grads], norm


@dataclass
class Optimizer:
    """여러 ParamGroup 의 Adam 상태 묶음"""

    groups: Dict[str, ParamGroup]
    states: Dict[str, AdamState] = field(default_factory=dict)

    @classmethod
    def adam(
        cls,
        groups: Sequence[ParamGroup],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-5,
        weight_decay: float = 0.0,
    ) -> "Optimizer":
        return cls(
            groups={g.name: g for g in groups},
            states={
                g.name: AdamState.for_group(g, beta1, beta2, eps, weight_decay) for g in groups
            },
        )

    def step(
        self,
        grads: Mapping[str, Mapping[str, np.ndarray]],
        lrs: Optional[Mapping[str, float]] = None,
    ) -> List[AdamStepResult]:
        """그룹별 adam_step (lrs 에 없는 그룹은 group.lr 사용)"""
        results = []
        for name, group in self.groups.items():
            lr = None if lrs is None else lrs.get(name)
            results.append(adam_step(group, grads.get(name, {}), self.states[name], lr))
        return results
