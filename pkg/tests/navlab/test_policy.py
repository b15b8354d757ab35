"""
policy 테스트

관측 인코더 블록 구조, forward 결정성, 시퀀스/step 일치, 행동 선택, 초기화, 체크포인트
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# src 경로 추가
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root / "src"))

from common.config import EnvParams, PolicyConfig  # noqa: E402
from navlab.autodiff import Tape  # noqa: E402
from navlab.autodiff import functional as F  # noqa: E402
from navlab.policy import (  # noqa: E402
    HiddenState,
    ObsBatch,
    PolicyError,
    argmax_action,
    encode_observation,
    forward_sequence,
    init_policy,
    initial_hidden,
    load_policy,
    log_probs,
    policy_forward,
    probs,
    sample_action,
    save_policy,
)

SMALL = PolicyConfig(d_vis=8, aux_dim=4, hidden_size=6, cell_embed_dim=3, critic_init_scale=1e-4)


def random_batch(rng, n, config=PolicyConfig()):
    goal = np.zeros((n, config.num_categories))
    goal[np.arange(n), rng.integers(config.num_categories, size=n)] = 1.0
    return ObsBatch(
        patch=rng.integers(config.num_cell_codes, size=(n, config.patch_depth, config.patch_width)),
        gps=rng.integers(-5, 6, size=(n, 2)).astype(np.float64),
        compass=rng.integers(4, size=n) * math.pi / 2,
        goal=goal,
    )


# 인코더


def test_encoder_block_structure():
    """goal 만 다른 두 관측 → g 블록만 다름, 각 aux 블록 폭 32"""
    print("테스트 1: 관측 임베딩 블록 구조")

    config = PolicyConfig()
    params = init_policy(config, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    batch = random_batch(rng, 1)
    other_goal = np.roll(batch.goal, 1, axis=1)
    other = ObsBatch(batch.patch, batch.gps, batch.compass, other_goal)

    a = encode_observation(batch, params).data[0]
    b = encode_observation(other, params).data[0]
    assert a.shape == (config.d_vis + 96,)

    g_start = config.d_vis + 2 * config.aux_dim
    assert np.array_equal(a[:g_start], b[:g_start])
    assert not np.array_equal(a[g_start:], b[g_start:])
    assert len(a[g_start:]) == 32
    print("  ✓ g 블록만 변경, aux 블록 폭 32")


def test_zero_aux_weights_give_zero_blocks():
    config = PolicyConfig()
    params = init_policy(config, np.random.default_rng(0))
    for key in ("w_gps", "w_compass", "w_goal"):
        params["aux_embed/" + key].data = np.zeros_like(params["aux_embed/" + key].data)
    embedding = encode_observation(random_batch(np.random.default_rng(2), 5), params).data
    assert np.all(embedding[:, config.d_vis :] == 0.0)


def test_unknown_cell_code_rejected():
    config = PolicyConfig()
    params = init_policy(config, np.random.default_rng(0))
    batch = random_batch(np.random.default_rng(3), 2)
    bad = ObsBatch(np.full_like(batch.patch, config.num_cell_codes), batch.gps, batch.compass, batch.goal)
    with pytest.raises(PolicyError, match="셀 코드"):
        encode_observation(bad, params)


# forward


def test_fresh_policy_value_near_zero_and_deterministic():
    print("\n테스트 2: 초기 critic / 결정성")

    params = init_policy(PolicyConfig(), np.random.default_rng(4))
    batch = random_batch(np.random.default_rng(5), 16)
    first = policy_forward(batch, None, params)
    second = policy_forward(batch, None, params)

    assert np.max(np.abs(first.value)) <= 1e-3
    assert np.array_equal(first.logits, second.logits)
    assert np.array_equal(first.value, second.value)
    assert np.array_equal(first.hidden.data, second.hidden.data)
    assert np.allclose(probs(first.logits).sum(axis=1), 1.0, atol=1e-12)
    print(f"  ✓ max |V| = {np.max(np.abs(first.value)):.2e}")


def test_hidden_dim_mismatch_rejected():
    params = init_policy(SMALL, np.random.default_rng(0))
    batch = random_batch(np.random.default_rng(0), 2, SMALL)
    with pytest.raises(PolicyError):
        policy_forward(batch, HiddenState.zeros(SMALL.num_layers, 3, SMALL.hidden_size), params)


def test_sequence_forward_matches_stepwise():
    """시퀀스 forward == hidden 을 이어가는 step forward (episode 시작 reset 포함)"""
    print("\n테스트 3: 시퀀스 / step 일치")

    params = init_policy(PolicyConfig(), np.random.default_rng(6))
    rng = np.random.default_rng(7)
    T, N = 6, 3
    batches = [random_batch(rng, N) for _ in range(T)]
    starts = rng.random((T, N)) < 0.3
    hidden0 = HiddenState(rng.standard_normal((2, N, 128)) * 0.1)

    seq = forward_sequence(batches, hidden0, starts, params)

    hidden = hidden0
    logits, values = [], []
    for t in range(T):
        hidden = hidden.reset(starts[t])
        out = policy_forward(batches[t], hidden, params)
        logits.append(out.logits)
        values.append(out.value)
        hidden = out.hidden

    assert np.max(np.abs(seq.logits.data - np.concatenate(logits))) < 1e-10
    assert np.max(np.abs(seq.values.data - np.concatenate(values))) < 1e-10
    assert np.max(np.abs(seq.hidden.data - hidden.data)) < 1e-10
    print("  ✓ max abs diff < 1e-10")


def test_actor_critic_separation():
    params = init_policy(PolicyConfig(), np.random.default_rng(8))
    batch = random_batch(np.random.default_rng(9), 4)
    base = policy_forward(batch, None, params)

    critic = params["critic_head/w"]
    saved = critic.data
    critic.data = np.zeros_like(saved)
    assert np.array_equal(policy_forward(batch, None, params).logits, base.logits)
    critic.data = saved

    actor = params["actor_head/w"]
    actor.data = np.zeros_like(actor.data)
    assert np.array_equal(policy_forward(batch, None, params).value, base.value)


def test_policy_gradients_match_finite_differences():
    """정책 전체 합성 네트워크: 100개 파라미터 유한차분 상대오차 < 1e-4"""
    print("\n테스트 4: 정책 gradient 유한차분")

    params = init_policy(SMALL, np.random.default_rng(10))
    rng = np.random.default_rng(11)
    T, N = 3, 2
    batches = [random_batch(rng, N, SMALL) for _ in range(T)]
    starts = np.zeros((T, N), dtype=bool)
    starts[0] = True
    starts[2, 1] = True
    actions = rng.integers(4, size=T * N)
    hidden0 = initial_hidden(SMALL, N)

    def loss_fn():
        out = forward_sequence(batches, hidden0, starts, params)
        nll = F.neg(F.mean(F.gather(F.log_softmax(out.logits, axis=1), actions)))
        return F.add(nll, F.mean(F.square(out.values)))

    tensors = params.tensors()
    names = sorted(tensors)
    leaves = [tensors[n] for n in names]
    with Tape() as tape:
        loss = loss_fn()
    grads = dict(zip(names, tape.backward(loss, leaves)))

    picks = []
    for _ in range(100):
        name = names[int(rng.integers(len(names)))]
        index = tuple(int(rng.integers(s)) for s in tensors[name].shape)
        picks.append((name, index))

    h = 1e-5
    worst = 0.0
    for name, index in picks:
        data = tensors[name].data
        original = data[index]
        data[index] = original + h
        plus = loss_fn().item()
        data[index] = original - h
        minus = loss_fn().item()
        data[index] = original
        numeric = (plus - minus) / (2 * h)
        analytic = grads[name][index]
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6))
    assert worst < 1e-4, f"최대 상대오차 {worst:.2e}"
    print(f"  ✓ 최대 상대오차 {worst:.2e}")


# 행동 선택


def test_argmax_and_sampling_examples():
    logits = np.array([10.0, 0.0, 0.0, 0.0])
    assert argmax_action(logits) == 0
    assert probs(logits)[0] > 0.999
    samples = sample_action(np.tile(logits, (10000, 1)), np.random.default_rng(0))
    assert np.count_nonzero(samples == 0) >= 9980

    assert argmax_action(np.array([0.0, 2.0, 2.0, 1.0])) == 1
    assert list(argmax_action(np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 3.0, 3.0]]))) == [0, 2]


def test_uniform_sampling_frequencies():
    """균등 logits 10⁶ 샘플 → 빈도 0.25 ± 0.002"""
    print("\n테스트 5: 균등 샘플링")

    samples = sample_action(np.zeros((10**6, 4)), np.random.default_rng(123))
    freq = np.bincount(samples, minlength=4) / 10**6
    assert np.all(np.abs(freq - 0.25) < 0.002), freq
    print(f"  ✓ 빈도 {np.round(freq, 4).tolist()}")


def test_log_softmax_matches_log_of_softmax():
    logits = np.random.default_rng(0).standard_normal((50, 4)) * 3
    direct = log_probs(logits)
    via_probs = np.log(np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True))
    assert np.max(np.abs(direct - via_probs)) < 1e-12
    assert np.max(np.abs(F.log_softmax(logits, axis=1).data - direct)) < 1e-12


# 초기화 / 체크포인트


def test_init_policy_is_seeded_and_critic_is_tiny():
    print("\n테스트 6: 초기화")

    config = PolicyConfig.for_env(EnvParams())
    a = init_policy(config, np.random.default_rng(42))
    b = init_policy(config, np.random.default_rng(42))
    for name, tensor in a.tensors().items():
        assert tensor.data.tobytes() == b.tensors()[name].data.tobytes()

    assert np.max(np.abs(a["critic_head/w"].data)) <= 1e-4
    assert np.all(a["critic_head/b"].data == 0.0)

    H, E = config.hidden_size, config.d_vis + 3 * config.aux_dim
    expected = (
        config.num_cell_codes * config.cell_embed_dim
        + config.patch_depth * config.patch_width * config.cell_embed_dim * config.d_vis
        + config.d_vis
        + 3 * config.aux_dim * 3
        + (config.num_categories - 2) * config.aux_dim
        + (E * 3 * H + H * 3 * H + 4 * H)
        + (H * 3 * H + H * 3 * H + 4 * H)
        + (H * 4 + 4)
        + (H + 1)
    )
    assert a.num_params() == expected == 261389
    print(f"  ✓ 파라미터 수 {a.num_params()}")


def test_policy_checkpoint_roundtrip(tmp_path):
    params = init_policy(SMALL, np.random.default_rng(3))
    path = save_policy(tmp_path / "bc.ckpt", params, step=10, config_hash="abc", phase="bc")
    loaded, meta = load_policy(path)
    assert meta.step == 10 and meta.phase == "bc"
    assert loaded.config == SMALL
    for name, tensor in params.tensors().items():
        assert np.array_equal(loaded[name].data, tensor.data)

    with pytest.raises(PolicyError, match="구조"):
        load_policy(path, PolicyConfig())


if __name__ == "__main__":
    test_encoder_block_structure()
    test_fresh_policy_value_near_zero_and_deterministic()
    test_sequence_forward_matches_stepwise()
    test_policy_gradients_match_finite_differences()
    test_uniform_sampling_frequencies()
    test_init_policy_is_seeded_and_critic_is_tiny()
