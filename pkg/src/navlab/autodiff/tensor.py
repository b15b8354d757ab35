"""
Tensor / Tape

float64 numpy 배열을 감싸는 Tensor 와, 연산 기록을 보관하고 역전파를 수행하는 Tape
"""

import threading
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np


class AutodiffError(Exception):
    """자동미분 에러"""

    pass


class ShapeError(AutodiffError):
    """primitive 입력 shape 불일치"""

    pass


VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    float64 dense 배열

    연산자 오버로딩은 navlab.autodiff.functional 의 primitive 로 위임됩니다.
    """

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: 원소가 {self.data.size}개인 Tensor")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} requires_grad={self.requires_grad}>"

    # 연산자 -> primitive

    def __add__(self, other: Any) -> "Tensor":
        from . import functional as F

        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Tensor":
        from . import functional as F

        return F.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from . import functional as F

        return F.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        from . import functional as F

        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> "Tensor":
        from . import functional as F

        if isinstance(other, Tensor):
            raise AutodiffError("div: Tensor 로 나누기는 지원하지 않습니다")
        return F.mul(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        from . import functional as F

        return F.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from . import functional as F

        return F.matmul(self, other)


def as_tensor(value: Any) -> Tensor:
    """상수를 requires_grad=False Tensor 로 변환"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


@dataclass
class _Node:
    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    vjp: VJP


_active = threading.local()


def _stack() -> List["Tape"]:
    if not hasattr(_active, "tapes"):
        _active.tapes = []
    return _active.tapes


def current_tape() -> Optional["Tape"]:
    """현재 스레드에서 활성화된 Tape (없으면 None)"""
    stack = _stack()
    return stack[-1] if stack else None


class Tape:
    """
    연산 기록

    with 블록 안에서 requires_grad 입력을 가진 primitive 만 기록됩니다.
    Tape 는 스레드마다 독립적입니다.

    Example:
        w = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            loss = F.sum(w * w)
        (grad,) = tape.backward(loss, [w])
    """

    def __init__(self) -> None:
        self.nodes: List[_Node] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc: Any) -> None:
        stack = _stack()
        if not stack or stack[-1] is not self:
            raise AutodiffError("Tape 중첩 순서가 올바르지 않습니다")
        stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, output: Tensor, inputs: Tuple[Tensor, ...], vjp: VJP) -> None:
        self.nodes.append(_Node(op=op, output=output, inputs=inputs, vjp=vjp))

    def backward(self, loss: Tensor, leaves: Sequence[Tensor]) -> List[np.ndarray]:
        """
        역전파

        Args:
            loss: 스칼라 loss
            leaves: gradient 를 받을 leaf Tensor 들

        Returns:
            leaves 순서의 gradient 배열 (사용되지 않은 leaf 는 0)

        Raises:
            AutodiffError: loss 가 스칼라가 아니거나 tape 에서 도달할 수 없을 때
        """
        if loss.size != 1:
            raise AutodiffError(f"backward: loss 는 스칼라여야 합니다 (shape={loss.shape})")

        on_tape = any(node.output is loss for node in self.nodes)
        if not on_tape and not any(leaf is loss for leaf in leaves):
            raise AutodiffError("backward: loss 가 tape 에 기록되지 않았습니다")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}

        # 기록 순서의 역순 = 역 위상 순서
        for node in reversed(self.nodes):
            upstream = grads.get(id(node.output))
            if upstream is None:
                continue
            input_grads = node.vjp(upstream)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if grad.shape != tensor.shape:
                    raise ShapeError(
                        f"{node.op}: gradient shape {grad.shape} != 입력 shape {tensor.shape}"
                    )
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + grad
                else:
                    grads[key] = grad

        return [
            np.array(grads[id(leaf)], dtype=np.float64)
            if id(leaf) in grads
            else np.zeros_like(leaf.data)
            for leaf in leaves
        ]


def record_op(op: str, data: np.ndarray, inputs: Tuple[Tensor, ...], vjp: VJP) -> Tensor:
    """
    primitive 결과 생성 및 기록

    활성 tape 가 있고 입력 중 하나라도 requires_grad 이면 기록합니다.
    """
    tape = current_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad and tape is not None:
        tape.record(op, out, inputs, vjp)
    return out


def backward(tape: Tape, loss: Tensor, leaves: Sequence[Tensor]) -> List[np.ndarray]:
    """Tape.backward 의 함수형 별칭"""
    return tape.backward(loss, leaves)
