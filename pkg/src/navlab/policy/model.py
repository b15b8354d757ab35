"""
Actor-critic 정책 네트워크

관측 인코더 (patch 임베딩 + dense, gps/compass/goal FC) → 2층 GRU → actor / critic head.
파라미터는 visual_encoder, aux_embed, rnn, actor_head, critic_head 다섯 그룹으로 나뉩니다.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from common.config import PolicyConfig
from common.models import NUM_ACTIONS
from navlab.autodiff import ParamGroup, Tape, Tensor
from navlab.autodiff import functional as F
from navlab.gridnav import Observation

GROUP_NAMES = ("visual_encoder", "aux_embed", "rnn", "actor_head", "critic_head")


class PolicyError(Exception):
    """정책 입력/파라미터 에러"""

    pass


@dataclass(frozen=True)
class ObsBatch:
    """
    관측 N개를 쌓은 배치

    patch (N, D, W) int, gps (N, 2), compass (N,) 라디안, goal (N, C)
    """

    patch: np.ndarray
    gps: np.ndarray
    compass: np.ndarray
    goal: np.ndarray

    @classmethod
    def from_observations(cls, observations: Sequence[Observation]) -> "ObsBatch":
        if not observations:
            raise PolicyError("빈 관측 배치")
        return cls(
            patch=np.stack([o.patch for o in observations]).astype(np.int64),
            gps=np.stack([o.gps for o in observations]).astype(np.float64),
            compass=np.array([o.compass for o in observations], dtype=np.float64),
            goal=np.stack([o.goal for o in observations]).astype(np.float64),
        )

    def __len__(self) -> int:
        return int(self.patch.shape[0])

    def take(self, indices: np.ndarray) -> "ObsBatch":
        """index 에 해당하는 행만 고른 배치"""
        return ObsBatch(
            patch=self.patch[indices],
            gps=self.gps[indices],
            compass=self.compass[indices],
            goal=self.goal[indices],
        )


ObsLike = Union[Observation, ObsBatch]


def as_batch(obs: ObsLike) -> ObsBatch:
    return obs if isinstance(obs, ObsBatch) else ObsBatch.from_observations([obs])


@dataclass(frozen=True)
class HiddenState:
    """층별 GRU hidden, data shape (L, N, H)"""

    data: np.ndarray

    @classmethod
    def zeros(cls, num_layers: int, batch: int, hidden_size: int) -> "HiddenState":
        return cls(np.zeros((num_layers, batch, hidden_size)))

    @property
    def batch(self) -> int:
        return int(self.data.shape[1])

    def reset(self, mask: np.ndarray) -> "HiddenState":
        """mask 가 True 인 env 의 hidden 을 0 으로"""
        keep = (~np.asarray(mask, dtype=bool)).astype(np.float64)
        return HiddenState(self.data * keep[None, :, None])

    def select(self, index: int) -> "HiddenState":
        return HiddenState(self.data[:, index : index + 1].copy())

    def take(self, indices: np.ndarray) -> "HiddenState":
        return HiddenState(self.data[:, indices].copy())


@dataclass(frozen=True)
class PolicyOutput:
    """logits (N, 4), value (N,), 다음 hidden"""

    logits: np.ndarray
    value: np.ndarray
    hidden: HiddenState


@dataclass
class SequenceOutput:
    """
    시퀀스 forward 결과 (tape 위 Tensor)

    logits (T·N, 4), values (T·N,), 행 순서는 time-major (t·N + n)
    """

    logits: Tensor
    values: Tensor
    hidden: HiddenState


class PolicyParams:
    """
    정책 파라미터 그룹 묶음

    Example:
        params = init_policy(PolicyConfig(), np.random.default_rng(0))
        params.group("critic_head").set_frozen(True)
    """

    def __init__(self, config: PolicyConfig, groups: Dict[str, ParamGroup]):
        missing = [name for name in GROUP_NAMES if name not in groups]
        if missing:
            raise PolicyError(f"파라미터 그룹 누락: {missing}")
        self.config = config
        self.groups = groups

    def group(self, name: str) -> ParamGroup:
        try:
            return self.groups[name]
        except KeyError:
            raise PolicyError(f"알 수 없는 파라미터 그룹: {name}") from None

    def __getitem__(self, qualified: str) -> Tensor:
        group, _, name = qualified.partition("/")
        return self.group(group).tensors[name]

    def tensors(self) -> Dict[str, Tensor]:
        """'group/name' → Tensor"""
        out: Dict[str, Tensor] = {}
        for name in GROUP_NAMES:
            out.update(self.groups[name].qualified())
        return out

    def arrays(self) -> Dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.tensors().items()}

    def signature(self) -> Dict[str, Tuple[int, ...]]:
        """파라미터 이름 → shape (구조 호환성 검사용)"""
        return {k: tuple(t.shape) for k, t in self.tensors().items()}

    def num_params(self) -> int:
        return sum(g.num_params() for g in self.groups.values())

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        """
        배열 값을 파라미터에 복사

        Raises:
            PolicyError: 이름 집합이나 shape 가 맞지 않을 때
        """
        current = self.tensors()
        if set(arrays) != set(current):
            raise PolicyError(
                f"파라미터 이름 불일치: 누락 {sorted(set(current) - set(arrays))}, "
                f"추가 {sorted(set(arrays) - set(current))}"
            )
        for name, tensor in current.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise PolicyError(f"{name}: shape {value.shape} != {tensor.shape}")
            tensor.data = value.copy()

    def snapshot(self) -> "PolicyParams":
        """worker 공유용 읽기 전용 복사본 (gradient 없음)"""
        groups = {}
        for name, group in self.groups.items():
            tensors = {}
            for key, tensor in group.tensors.items():
                frozen = Tensor(tensor.data, requires_grad=False, name=f"{name}/{key}")
                frozen.data.setflags(write=False)
                tensors[key] = frozen
            groups[name] = ParamGroup(name=name, tensors=tensors, frozen=True, lr=0.0)
        return PolicyParams(self.config, groups)

    def trainable(self) -> List[Tuple[str, str, Tensor]]:
        """frozen 이 아닌 그룹의 (group, name, Tensor)"""
        return [
            (group.name, key, tensor)
            for group in (self.groups[n] for n in GROUP_NAMES)
            if not group.frozen
            for key, tensor in group.tensors.items()
        ]

    def gradients(self, tape: Tape, loss: Tensor) -> Dict[str, Dict[str, np.ndarray]]:
        """학습 가능한 그룹의 gradient (group → name → 배열, Optimizer.step 입력 형식)"""
        entries = self.trainable()
        grads = tape.backward(loss, [tensor for _, _, tensor in entries])
        out: Dict[str, Dict[str, np.ndarray]] = {}
        for (group, key, _), grad in zip(entries, grads):
            out.setdefault(group, {})[key] = grad
        return out


# 초기화


def _dense(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _orthogonal(rng: np.random.Generator, size: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    return q * np.sign(np.diag(r))


def _gru_layer(rng: np.random.Generator, prefix: str, fan_in: int, hidden: int) -> Dict[str, Tensor]:
    w_h = np.concatenate([_orthogonal(rng, hidden) for _ in range(3)], axis=1)
    return {
        f"{prefix}w_x": Tensor(_dense(rng, fan_in, 3 * hidden), requires_grad=True),
        f"{prefix}w_h": Tensor(w_h, requires_grad=True),
        f"{prefix}b_x": Tensor(np.zeros(3 * hidden), requires_grad=True),
        f"{prefix}b_hn": Tensor(np.zeros(hidden), requires_grad=True),
    }


def embedding_dim(config: PolicyConfig) -> int:
    return config.d_vis + 3 * config.aux_dim


def init_policy(config: PolicyConfig, rng: np.random.Generator) -> PolicyParams:
    """
    정책 파라미터 초기화

    dense 층은 fan-in 균등 분포, GRU 순환 행렬은 gate 별 orthogonal,
    critic 최종층은 ±critic_init_scale 균등 분포 (bias 0) 입니다.

    Args:
        config: 네트워크 구조
        rng: 난수 생성기 (같은 seed → 바이트 동일)

    Returns:
        PolicyParams
    """

    def param(value: np.ndarray) -> Tensor:
        return Tensor(value, requires_grad=True)

    H, A = config.hidden_size, config.aux_dim
    flat = config.patch_depth * config.patch_width * config.cell_embed_dim

    visual = {
        "cell_embed": param(rng.standard_normal((config.num_cell_codes, config.cell_embed_dim))),
        "w": param(_dense(rng, flat, config.d_vis)),
        "b": param(np.zeros(config.d_vis)),
    }
    aux = {
        "w_gps": param(_dense(rng, 2, A)),
        "b_gps": param(np.zeros(A)),
        "w_compass": param(_dense(rng, 2, A)),
        "b_compass": param(np.zeros(A)),
        "w_goal": param(_dense(rng, config.num_categories, A)),
        "b_goal": param(np.zeros(A)),
    }
    rnn: Dict[str, Tensor] = {}
    fan_in = embedding_dim(config)
    for layer in range(config.num_layers):
        rnn.update(_gru_layer(rng, f"l{layer}_", fan_in, H))
        fan_in = H
    actor = {"w": param(_dense(rng, H, NUM_ACTIONS)), "b": param(np.zeros(NUM_ACTIONS))}
    scale = config.critic_init_scale
    critic = {"w": param(rng.uniform(-scale, scale, size=(H, 1))), "b": param(np.zeros(1))}

    groups = {
        "visual_encoder": ParamGroup("visual_encoder", visual),
        "aux_embed": ParamGroup("aux_embed", aux),
        "rnn": ParamGroup("rnn", rnn),
        "actor_head": ParamGroup("actor_head", actor),
        "critic_head": ParamGroup("critic_head", critic),
    }
    return PolicyParams(config, groups)


# forward


def _check_obs(batch: ObsBatch, config: PolicyConfig) -> None:
    n = len(batch)
    expected = (n, config.patch_depth, config.patch_width)
    if batch.patch.shape != expected:
        raise PolicyError(f"patch shape {batch.patch.shape} != {expected}")
    if batch.patch.size and (batch.patch.min() < 0 or batch.patch.max() >= config.num_cell_codes):
        raise PolicyError(
            f"알 수 없는 셀 코드: 범위 [{batch.patch.min()}, {batch.patch.max()}], "
            f"허용 [0, {config.num_cell_codes})"
        )
    if batch.gps.shape != (n, 2) or batch.compass.shape != (n,):
        raise PolicyError(f"gps/compass shape 오류: {batch.gps.shape}, {batch.compass.shape}")
    if batch.goal.shape != (n, config.num_categories):
        raise PolicyError(f"goal shape {batch.goal.shape} != {(n, config.num_categories)}")


def encode_observation(obs: ObsLike, params: PolicyParams) -> Tensor:
    """
    관측 임베딩 concat(i, p, r, g)

    Returns:
        (N, d_vis + 3·aux_dim) Tensor

    Raises:
        PolicyError: 관측 shape 가 다르거나 셀 코드가 범위를 벗어날 때
    """
    config = params.config
    batch = as_batch(obs)
    _check_obs(batch, config)
    n = len(batch)

    visual = params.groups["visual_encoder"].tensors
    cells = F.embedding(visual["cell_embed"], batch.patch)
    flat = F.reshape(cells, (n, config.patch_depth * config.patch_width * config.cell_embed_dim))
    i_t = F.relu(F.linear(flat, visual["w"], visual["b"]))

    aux = params.groups["aux_embed"].tensors
    compass = np.stack([np.cos(batch.compass), np.sin(batch.compass)], axis=1)
    p_t = F.linear(batch.gps * config.gps_scale, aux["w_gps"], aux["b_gps"])
    r_t = F.linear(compass, aux["w_compass"], aux["b_compass"])
    g_t = F.linear(batch.goal, aux["w_goal"], aux["b_goal"])
    return F.concat([i_t, p_t, r_t, g_t], axis=1)


def _layer_params(params: PolicyParams, layer: int) -> Dict[str, Tensor]:
    rnn = params.groups["rnn"].tensors
    return {key: rnn[f"l{layer}_{key}"] for key in F.GRU_KEYS}


def _step(
    embedding: Tensor, layers: List[Tensor], params: PolicyParams
) -> Tuple[Tensor, Tensor, List[Tensor]]:
    x = embedding
    new_layers = []
    for layer, h in enumerate(layers):
        x = F.gru_cell(x, h, _layer_params(params, layer))
        new_layers.append(x)
    actor = params.groups["actor_head"].tensors
    critic = params.groups["critic_head"].tensors
    logits = F.linear(x, actor["w"], actor["b"])
    value = F.linear(x, critic["w"], critic["b"])
    return logits, F.reshape(value, (value.shape[0],)), new_layers


def _check_hidden(hidden: HiddenState, batch: int, config: PolicyConfig) -> None:
    expected = (config.num_layers, batch, config.hidden_size)
    if hidden.data.shape != expected:
        raise PolicyError(f"hidden shape {hidden.data.shape} != {expected}")


def initial_hidden(config: PolicyConfig, batch: int = 1) -> HiddenState:
    return HiddenState.zeros(config.num_layers, batch, config.hidden_size)


def policy_forward(
    obs: ObsLike, hidden: Optional[HiddenState], params: PolicyParams
) -> PolicyOutput:
    """
    한 step forward (numpy 출력)

    Args:
        obs: 관측 또는 관측 배치
        hidden: 이전 hidden (None 이면 0)
        params: 정책 파라미터

    Returns:
        PolicyOutput

    Raises:
        PolicyError: 관측/hidden 차원 불일치
    """
    batch = as_batch(obs)
    config = params.config
    if hidden is None:
        hidden = initial_hidden(config, len(batch))
    _check_hidden(hidden, len(batch), config)

    embedding = encode_observation(batch, params)
    layers = [Tensor(hidden.data[i]) for i in range(config.num_layers)]
    logits, value, new_layers = _step(embedding, layers, params)
    return PolicyOutput(
        logits=logits.data.copy(),
        value=value.data.copy(),
        hidden=HiddenState(np.stack([h.data for h in new_layers])),
    )


def forward_sequence(
    observations: Sequence[ObsBatch],
    hidden: HiddenState,
    episode_starts: np.ndarray,
    params: PolicyParams,
) -> SequenceOutput:
    """
    T step 시퀀스 forward (활성 tape 가 있으면 BPTT 용으로 기록됨)

    Args:
        observations: 길이 T 의 ObsBatch (각 N 개)
        hidden: 시퀀스 시작 hidden (L, N, H)
        episode_starts: (T, N) bool, True 면 그 step 전에 hidden 을 0 으로
        params: 정책 파라미터

    Returns:
        SequenceOutput (time-major 로 펼친 logits/values)
    """
    if not observations:
        raise PolicyError("빈 시퀀스")
    config = params.config
    n = len(observations[0])
    starts = np.asarray(episode_starts, dtype=bool)
    if starts.shape != (len(observations), n):
        raise PolicyError(f"episode_starts shape {starts.shape} != {(len(observations), n)}")
    _check_hidden(hidden, n, config)

    layers: List[Tensor] = [Tensor(hidden.data[i]) for i in range(config.num_layers)]
    all_logits, all_values = [], []
    for t, batch in enumerate(observations):
        if len(batch) != n:
            raise PolicyError(f"step {t}: 배치 크기 {len(batch)} != {n}")
        if starts[t].any():
            keep = (~starts[t]).astype(np.float64)[:, None]
            layers = [F.mul(h, keep) for h in layers]
        logits, value, layers = _step(encode_observation(batch, params), layers, params)
        all_logits.append(logits)
        all_values.append(value)

    return SequenceOutput(
        logits=F.concat(all_logits, axis=0),
        values=F.concat(all_values, axis=0),
        hidden=HiddenState(np.stack([h.data for h in layers])),
    )
