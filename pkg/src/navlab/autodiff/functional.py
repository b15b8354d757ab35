"""
미분 가능한 primitive 연산

모든 primitive 는 입력 shape 를 검사하고, 실패 시 primitive 이름이 담긴 ShapeError 를 던집니다.
"""

from typing import Any, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, record_op

Axis = Optional[Union[int, Tuple[int, ...]]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """broadcast 된 gradient 를 원래 shape 로 합산"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError:
        raise ShapeError(f"{op}: broadcast 불가 shape {a.shape} 와 {b.shape}") from None


# 선형 / 산술


def matmul(a: Any, b: Any) -> Tensor:
    """(n, k) @ (k, m)"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape {a.shape} @ {b.shape} 불일치")
    a_data, b_data = a.data, b.data

    def vjp(g: np.ndarray):
        return g @ b_data.T, a_data.T @ g

    return record_op("matmul", a_data @ b_data, (a, b), vjp)


def add(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    sa, sb = a.shape, b.shape

    def vjp(g: np.ndarray):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return record_op("add", a.data + b.data, (a, b), vjp)


def sub(a: Any, b: Any) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.shape, b.shape

    def vjp(g: np.ndarray):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return record_op("sub", a.data - b.data, (a, b), vjp)


def mul(a: Any, b: Any) -> Tensor:
    """원소별 곱 (broadcast 지원)"""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    a_data, b_data = a.data, b.data

    def vjp(g: np.ndarray):
        return _unbroadcast(g * b_data, a_data.shape), _unbroadcast(g * a_data, b_data.shape)

    return record_op("mul", a_data * b_data, (a, b), vjp)


def neg(a: Any) -> Tensor:
    a = as_tensor(a)
    return record_op("neg", -a.data, (a,), lambda g: (-g,))


def square(a: Any) -> Tensor:
    a = as_tensor(a)
    a_data = a.data
    return record_op("square", a_data * a_data, (a,), lambda g: (2.0 * a_data * g,))


def concat(tensors: Sequence[Any], axis: int = -1) -> Tensor:
    items = [as_tensor(t) for t in tensors]
    if not items:
        raise ShapeError("concat: 입력이 비어 있습니다")
    ndim = items[0].ndim
    ax = axis % ndim if ndim else 0
    for t in items:
        other = [s for i, s in enumerate(t.shape) if i != ax]
        first = [s for i, s in enumerate(items[0].shape) if i != ax]
        if t.ndim != ndim or other != first:
            raise ShapeError(f"concat: shape {items[0].shape} 와 {t.shape} 를 axis={axis} 로 이을 수 없음")
    sizes = [t.shape[ax] for t in items]
    bounds = np.cumsum([0] + sizes)

    def vjp(g: np.ndarray):
        return [
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(items))
        ]

    data = np.concatenate([t.data for t in items], axis=ax)
    return record_op("concat", data, tuple(items), vjp)


def slice_last(a: Any, start: int, stop: int) -> Tensor:
    """마지막 축 [start:stop] 구간"""
    a = as_tensor(a)
    width = a.shape[-1] if a.ndim else 0
    if not 0 <= start <= stop <= width:
        raise ShapeError(f"slice: 구간 [{start}:{stop}] 이 폭 {width} 를 벗어남")
    shape = a.shape

    def vjp(g: np.ndarray):
        full = np.zeros(shape)
        full[..., start:stop] = g
        return (full,)

    return record_op("slice", a.data[..., start:stop], (a,), vjp)


def reshape(a: Any, shape: Tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    original = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: {original} → {shape} 불가") from None
    return record_op("reshape", data, (a,), lambda g: (g.reshape(original),))


# 조회


def embedding(table: Any, indices: np.ndarray) -> Tensor:
    """
    embedding 조회

    Args:
        table: (V, d) 임베딩 테이블
        indices: 임의 shape 의 정수 배열

    Returns:
        indices.shape + (d,) Tensor
    """
    table = as_tensor(table)
    idx = np.asarray(indices)
    if table.ndim != 2:
        raise ShapeError(f"embedding: table 은 2차원이어야 합니다 (shape={table.shape})")
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError(f"embedding: 정수 index 가 필요합니다 (dtype={idx.dtype})")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(f"embedding: index 범위 [0, {table.shape[0]}) 를 벗어남")
    shape = table.shape

    def vjp(g: np.ndarray):
        full = np.zeros(shape)
        np.add.at(full, idx.reshape(-1), g.reshape(-1, shape[1]))
        return (full,)

    return record_op("embedding", table.data[idx], (table,), vjp)


def gather(a: Any, indices: np.ndarray) -> Tensor:
    """(N, K) 에서 행마다 indices[i] 열을 선택 → (N,)"""
    a = as_tensor(a)
    idx = np.asarray(indices)
    if a.ndim != 2 or idx.shape != (a.shape[0],):
        raise ShapeError(f"gather: shape {a.shape} 와 index shape {idx.shape} 불일치")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[1]):
        raise ShapeError(f"gather: index 범위 [0, {a.shape[1]}) 를 벗어남")
    rows = np.arange(a.shape[0])
    shape = a.shape

    def vjp(g: np.ndarray):
        full = np.zeros(shape)
        full[rows, idx] = g
        return (full,)

    return record_op("gather", a.data[rows, idx], (a,), vjp)


# 비선형


def sigmoid(a: Any) -> Tensor:
    a = as_tensor(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return record_op("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Any) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return record_op("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a: Any) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return record_op("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def exp(a: Any) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return record_op("exp", out, (a,), lambda g: (g * out,))


def log(a: Any) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ShapeError("log: 양수가 아닌 입력")
    a_data = a.data
    return record_op("log", np.log(a_data), (a,), lambda g: (g / a_data,))


def log_softmax(a: Any, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    if a.ndim == 0:
        raise ShapeError("log_softmax: 스칼라 입력")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    probs = np.exp(out)

    def vjp(g: np.ndarray):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return record_op("log_softmax", out, (a,), vjp)


def clip(a: Any, low: float, high: float) -> Tensor:
    a = as_tensor(a)
    if low > high:
        raise ShapeError(f"clip: low({low}) > high({high})")
    inside = (a.data >= low) & (a.data <= high)
    return record_op("clip", np.clip(a.data, low, high), (a,), lambda g: (g * inside,))


def minimum(a: Any, b: Any) -> Tensor:
    """원소별 최솟값 (동률이면 a 쪽으로 gradient)"""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("minimum", a, b)
    pick_a = a.data <= b.data
    sa, sb = a.shape, b.shape

    def vjp(g: np.ndarray):
        return _unbroadcast(g * pick_a, sa), _unbroadcast(g * ~pick_a, sb)

    return record_op("minimum", np.where(pick_a, a.data, b.data), (a, b), vjp)


# 축약


def sum(a: Any, axis: Axis = None) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    shape = a.shape

    def vjp(g: np.ndarray):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return record_op("sum", np.sum(a.data, axis=axis), (a,), vjp)


def mean(a: Any, axis: Axis = None) -> Tensor:
    a = as_tensor(a)
    if a.size == 0:
        raise ShapeError("mean: 빈 Tensor")
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(sum(a, axis=axis), 1.0 / count)


# 복합 연산


def linear(x: Any, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x @ W (+ b)"""
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


GRU_KEYS = ("w_x", "w_h", "b_x", "b_hn")


def gru_cell(x: Any, h: Any, params: Mapping[str, Tensor]) -> Tensor:
    """
    GRU cell (reset-before-candidate)

    gate 배치는 [r | z | n] 순서입니다.
        r = σ(W_r x + U_r h + b_r)
        z = σ(W_z x + U_z h + b_z)
        n = tanh(W_n x + b_in + r ⊙ (U_n h + b_hn))
        h' = (1 − z) ⊙ n + z ⊙ h

    Args:
        x: (N, in) 또는 (in,) 입력
        h: (N, H) 또는 (H,) 이전 hidden
        params: w_x (in, 3H), w_h (H, 3H), b_x (3H,), b_hn (H,)

    Returns:
        h 와 같은 shape 의 새 hidden

    Raises:
        ShapeError: 차원 불일치 시
    """
    x, h = as_tensor(x), as_tensor(h)
    missing = [k for k in GRU_KEYS if k not in params]
    if missing:
        raise ShapeError(f"gru_cell: 파라미터 누락 {missing}")
    w_x, w_h, b_x, b_hn = (params[k] for k in GRU_KEYS)
    hidden = w_h.shape[0]
    if (
        w_x.ndim != 2
        or w_h.shape != (hidden, 3 * hidden)
        or w_x.shape[1] != 3 * hidden
        or b_x.shape != (3 * hidden,)
        or b_hn.shape != (hidden,)
    ):
        raise ShapeError(
            f"gru_cell: 파라미터 shape 불일치 w_x={w_x.shape} w_h={w_h.shape} "
            f"b_x={b_x.shape} b_hn={b_hn.shape}"
        )
    if x.shape[-1] != w_x.shape[0] or h.shape[-1] != hidden:
        raise ShapeError(
            f"gru_cell: 입력 x={x.shape}, h={h.shape} 가 파라미터 (in={w_x.shape[0]}, H={hidden}) 와 불일치"
        )

    vector_input = h.ndim == 1
    if vector_input:
        x = reshape(x, (1, x.shape[0]))
        h = reshape(h, (1, hidden))
    if x.shape[0] != h.shape[0]:
        raise ShapeError(f"gru_cell: batch 크기 불일치 x={x.shape}, h={h.shape}")

    gx = add(matmul(x, w_x), b_x)
    gh = matmul(h, w_h)
    r = sigmoid(add(slice_last(gx, 0, hidden), slice_last(gh, 0, hidden)))
    z = sigmoid(add(slice_last(gx, hidden, 2 * hidden), slice_last(gh, hidden, 2 * hidden)))
    n = tanh(
        add(
            slice_last(gx, 2 * hidden, 3 * hidden),
            mul(r, add(slice_last(gh, 2 * hidden, 3 * hidden), b_hn)),
        )
    )
    new_h = add(n, mul(z, sub(h, n)))

    if vector_input:
        return reshape(new_h, (hidden,))
    return new_h
