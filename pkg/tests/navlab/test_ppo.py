"""
PPO finetuning 테스트

GAE, clipped surrogate, lr 스케줄, KL 패널티, frozen 그룹 계약, finetuning 실행
"""

import dataclasses
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# src 경로 추가
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root / "src"))

from common.config import (  # noqa: E402
    EnvParams,
    PolicyConfig,
    PPOConfig,
    ScheduleConfig,
    ScheduleMode,
    VPTConfig,
    WorkerPoolConfig,
)
from common.models import Split  # noqa: E402
from common.utils import read_metrics  # noqa: E402
from navlab.autodiff import Optimizer, Tape, Tensor  # noqa: E402
from navlab.autodiff import functional as F  # noqa: E402
from navlab.gridnav import WorldRegistry, generate_suite, seeds_for_split  # noqa: E402
from navlab.policy import GROUP_NAMES, forward_sequence, init_policy, save_policy  # noqa: E402
from navlab.ppo import (  # noqa: E402
    FinetuneError,
    PPOTrainer,
    RolloutBuffer,
    ScheduleState,
    clipped_surrogate,
    compute_gae,
    kl_divergence,
    kl_penalty,
    lr_schedule,
    ppo_loss,
    ppo_update,
    reset_critic,
    rho_step,
    schedule_state,
    train_rl_finetune,
)
from navlab.rollout import RolloutMode, WorkerPool  # noqa: E402

PARAMS = EnvParams(max_steps=64)
POLICY = PolicyConfig.for_env(PARAMS, d_vis=12, aux_dim=4, hidden_size=12, cell_embed_dim=3)


@pytest.fixture(scope="module")
def suite():
    registry = WorldRegistry(PARAMS)
    seeds = seeds_for_split(Split.TRAIN, 6, PARAMS.val_percent)
    return registry, generate_suite(registry, seeds, 4, seed=0)


def ppo_config(**overrides):
    values = dict(
        rollout_len=16,
        envs_per_worker=4,
        workers=1,
        minibatches=2,
        total_steps=768,
        checkpoint_interval=256,
        probe_episodes=2,
    )
    values.update(overrides)
    return PPOConfig(**values)


def collect_result(params, suite, cfg, seed=0):
    registry, episodes = suite
    pool_config = WorkerPoolConfig.from_trainer(cfg)
    with WorkerPool(registry, pool_config, episodes=episodes, seed=seed) as pool:
        return pool.collect(params.snapshot(), RolloutMode.SAMPLE)


def collect_buffer(params, suite, cfg, seed=0):
    result = collect_result(params, suite, cfg, seed)
    return RolloutBuffer.from_result(result, cfg.gamma, cfg.gae_tau)


def gae_oracle(rewards, values, dones, bootstrap, gamma, tau):
    """Σ_l (γτ)^l · Π(1 − done) · δ_{t+l} 를 직접 합산"""
    T = len(rewards)
    next_values = np.append(values[1:], bootstrap)
    deltas = [rewards[t] + gamma * next_values[t] * (1 - dones[t]) - values[t] for t in range(T)]
    advantages = np.zeros(T)
    for t in range(T):
        total, factor = 0.0, 1.0
        for k in range(t, T):
            total += factor * deltas[k]
            if dones[k]:
                break
            factor *= gamma * tau
        advantages[t] = total
    return advantages


# GAE


def test_gae_matches_bruteforce_oracle():
    print("테스트 1: GAE O(T²) 오라클")

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        rewards = rng.normal(size=64)
        values = rng.normal(size=64)
        dones = rng.random(64) < 0.1
        bootstrap = rng.normal()
        gamma, tau = rng.uniform(0.8, 1.0), rng.uniform(0.0, 1.0)
        adv, _ = compute_gae(
            rewards[:, None], values[:, None], dones[:, None], np.array([bootstrap]), gamma, tau
        )
        expected = gae_oracle(rewards, values, dones, bootstrap, gamma, tau)
        worst = max(worst, float(np.max(np.abs(adv[:, 0] - expected))))
    assert worst < 1e-10
    print(f"  ✓ 최대 오차 {worst:.1e}")


def test_gae_examples():
    adv, ret = compute_gae([[1.0]], [[0.5]], [[True]], [7.0], 0.99, 0.95)
    assert adv[0, 0] == 0.5 and ret[0, 0] == 1.0

    rng = np.random.default_rng(1)
    rewards, values = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    dones = rng.random((8, 3)) < 0.3
    bootstrap = rng.normal(size=3)
    adv, _ = compute_gae(rewards, values, dones, bootstrap, 0.9, 0.0)
    next_values = np.vstack([values[1:], bootstrap[None]])
    delta = rewards + 0.9 * next_values * (~dones) - values
    assert np.allclose(adv, delta, atol=1e-15)

    # τ = 1, done 없음 → 할인된 Monte-Carlo return − V
    adv, _ = compute_gae(rewards, values, np.zeros((8, 3), bool), bootstrap, 0.9, 1.0)
    mc = np.zeros((8, 3))
    for t in range(8):
        for i in range(3):
            discounted = sum(0.9**k * rewards[t + k, i] for k in range(8 - t))
            mc[t, i] = discounted + 0.9 ** (8 - t) * bootstrap[i]
    assert np.allclose(adv, mc - values, atol=1e-12)


def test_gae_rejects_misaligned_shapes():
    zeros, dones = np.zeros((4, 2)), np.zeros((4, 2), bool)
    with pytest.raises(FinetuneError):
        compute_gae(zeros, np.zeros((4, 3)), dones, np.zeros(2), 0.9, 0.9)
    with pytest.raises(FinetuneError):
        compute_gae(zeros, zeros, dones, np.zeros(3), 0.9, 0.9)


def test_returns_minus_advantages_equal_values(suite):
    params = init_policy(POLICY, np.random.default_rng(0))
    buffer = collect_buffer(params, suite, ppo_config())
    for segment, adv, ret in zip(buffer.segments, buffer.advantages, buffer.returns):
        assert np.max(np.abs((ret - adv) - segment.values)) < 1e-12


# loss


def test_clip_arithmetic():
    print("\n테스트 2: clip 연산")

    up = clipped_surrogate(Tensor(np.log([1.5])), np.zeros(1), np.ones(1), 0.2)
    assert up.item() == pytest.approx(1.2)
    down = clipped_surrogate(Tensor(np.log([0.5])), np.zeros(1), -np.ones(1), 0.2)
    assert down.item() == pytest.approx(-0.8)
    print("  ✓ min(1.5, 1.2) = 1.2, min(−0.5, −0.8) = −0.8")


def test_ratio_one_gives_mean_advantage(suite):
    params = init_policy(POLICY, np.random.default_rng(1))
    cfg = ppo_config()
    buffer = collect_buffer(params, suite, cfg)
    minibatch = buffer.minibatches(1, np.random.default_rng(0))[0]
    terms = ppo_loss(minibatch, params, cfg)
    expected = float(np.mean(minibatch.flat("advantages")))
    assert terms.policy_term == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_zero_advantages_give_zero_policy_gradient(suite):
    params = init_policy(POLICY, np.random.default_rng(2))
    buffer = collect_buffer(params, suite, ppo_config())
    minibatch = buffer.minibatches(1, np.random.default_rng(0))[0]
    for seq in minibatch.sequences:
        seq.advantages = np.zeros_like(seq.advantages)

    with Tape() as tape:
        chosen = []
        for seq in minibatch.sequences:
            out = forward_sequence(seq.observations, seq.hidden0, seq.episode_starts, params)
            logp = F.log_softmax(out.logits, axis=1)
            chosen.append(F.gather(logp, seq.actions.reshape(-1)))
        logp = F.concat(chosen, axis=0) if len(chosen) > 1 else chosen[0]
        term = clipped_surrogate(
            logp, minibatch.flat("old_log_probs"), minibatch.flat("advantages"), 0.2
        )
    grads = params.gradients(tape, term)
    assert all(np.all(g == 0.0) for group in grads.values() for g in group.values())


def test_ppo_loss_gradient_matches_finite_differences(suite):
    print("\n테스트 3: PPO loss gradient 수치 검증")

    params = init_policy(POLICY, np.random.default_rng(3))
    cfg = ppo_config()
    buffer = collect_buffer(params, suite, cfg)
    minibatch = buffer.minibatches(2, np.random.default_rng(0))[0]

    with Tape() as tape:
        terms = ppo_loss(minibatch, params, cfg)
    grads = params.gradients(tape, terms.total)

    rng = np.random.default_rng(4)
    entries = params.trainable()
    h = 1e-5
    worst = 0.0
    for _ in range(30):
        group, name, tensor = entries[int(rng.integers(len(entries)))]
        index = tuple(int(rng.integers(s)) for s in tensor.shape)
        original = tensor.data[index]
        tensor.data[index] = original + h
        plus = ppo_loss(minibatch, params, cfg).total.item()
        tensor.data[index] = original - h
        minus = ppo_loss(minibatch, params, cfg).total.item()
        tensor.data[index] = original
        numeric = (plus - minus) / (2 * h)
        analytic = grads[group][name][index]
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6))
    assert worst < 1e-4, f"최대 상대오차 {worst:.2e}"
    print(f"  ✓ 최대 상대오차 {worst:.2e}")


def test_zero_lr_update_leaves_params_bit_identical(suite):
    params = init_policy(POLICY, np.random.default_rng(5))
    cfg = ppo_config()
    buffer = collect_buffer(params, suite, cfg)
    before = params.arrays()

    state = ScheduleState(
        step=0,
        phase=2,
        actor_lr=0.0,
        critic_lr=0.0,
        shared_lr=0.0,
        frozen={name: False for name in GROUP_NAMES},
    )
    optimizer = Optimizer.adam([params.group(name) for name in GROUP_NAMES])
    terms = ppo_update(params, optimizer, buffer, cfg, state, np.random.default_rng(0))
    assert len(terms) == cfg.ppo_epochs * cfg.minibatches
    after = params.arrays()
    assert all(before[k].tobytes() == after[k].tobytes() for k in before)


# 스케줄


def test_pirlnav_schedule_examples():
    print("\n테스트 4: lr 스케줄")

    schedule = ScheduleConfig().resolved(3000)
    assert (schedule.phase1_end, schedule.warmup_end) == (80, 120)

    assert lr_schedule(0, schedule) == (0.0, 2.5e-4, 0.0)
    assert lr_schedule(79, schedule) == (0.0, 2.5e-4, 0.0)
    assert lr_schedule(120, schedule) == (1.5e-5, 1.5e-5, 1.5e-5)
    assert lr_schedule(3000, schedule) == (1.5e-5, 1.5e-5, 1.5e-5)

    actor, critic, shared = lr_schedule(100, schedule)
    assert critic == pytest.approx(1.325e-4)
    assert actor == pytest.approx(7.5e-6)
    assert shared == actor
    print(f"  ✓ 중간 지점 actor {actor:.2e}, critic {critic:.2e}")


def test_shared_lr_is_lower_of_two():
    schedule = ScheduleConfig().resolved(3000)
    for step in range(0, 3001, 7):
        actor, critic, shared = lr_schedule(step, schedule)
        assert shared == min(actor, critic)
        assert 0.0 <= actor <= critic + 1e-18


def test_ablation_modes():
    def resolved(mode, **kwargs):
        return ScheduleConfig(mode=mode, **kwargs).resolved(3000)

    naive = resolved(ScheduleMode.NAIVE)
    assert lr_schedule(0, naive) == (2.5e-4, 2.5e-4, 2.5e-4)
    assert schedule_state(0, naive).phase == 2

    jump = resolved(ScheduleMode.CRITIC_ONLY_THEN_JUMP)
    assert lr_schedule(0, jump) == (0.0, 2.5e-4, 0.0)
    assert lr_schedule(80, jump) == (2.5e-4, 2.5e-4, 2.5e-4)

    decay = resolved(ScheduleMode.CRITIC_DECAY_ONLY)
    actor, critic, _ = lr_schedule(100, decay)
    assert actor == 1.5e-5 and critic == pytest.approx(1.325e-4)

    warmup = resolved(ScheduleMode.ACTOR_WARMUP_ONLY)
    assert lr_schedule(0, warmup) == (0.0, 2.5e-4, 0.0)
    actor, critic, _ = lr_schedule(100, warmup)
    assert actor == pytest.approx(7.5e-6) and critic == 1.5e-5

    vpt = resolved(ScheduleMode.VPT)
    assert lr_schedule(0, vpt, VPTConfig(fixed_lr=3e-5)) == (3e-5, 3e-5, 3e-5)


def test_equal_knots_jump_straight_to_lr_lo():
    schedule = ScheduleConfig(phase1_end=50, warmup_end=50).resolved(100)
    assert lr_schedule(49, schedule) == (0.0, 2.5e-4, 0.0)
    assert lr_schedule(50, schedule) == (1.5e-5, 1.5e-5, 1.5e-5)


def test_schedule_state_frozen_mask():
    schedule = ScheduleConfig().resolved(3000)
    early = schedule_state(10, schedule)
    assert early.phase == 1
    assert early.frozen == {
        "visual_encoder": True,
        "aux_embed": True,
        "rnn": True,
        "actor_head": True,
        "critic_head": False,
    }
    late = schedule_state(200, schedule)
    assert late.phase == 2
    assert not late.frozen["rnn"] and not late.frozen["actor_head"]
    assert late.frozen["visual_encoder"] and late.frozen["aux_embed"]
    assert late.group_lrs()["visual_encoder"] == 0.0


def test_schedule_rejects_bad_steps():
    schedule = ScheduleConfig().resolved(3000)
    with pytest.raises(FinetuneError):
        lr_schedule(-1, schedule)
    with pytest.raises(FinetuneError):
        lr_schedule(3001, schedule)
    with pytest.raises(FinetuneError):
        lr_schedule(0, ScheduleConfig())


# VPT


def test_kl_penalty_examples():
    print("\n테스트 5: KL 패널티")

    rng = np.random.default_rng(0)
    logits = rng.normal(size=(5, 4))
    assert kl_penalty(logits, logits, 0.2).item() == 0.0
    assert kl_penalty(logits, rng.normal(size=(5, 4)), 0.0).item() == 0.0

    current = np.array([[math.log(2.0), 0.0, 0.0, 0.0]])
    expected = 0.25 * (math.log(0.25 / 0.4) + 3 * math.log(0.25 / 0.2))
    assert kl_penalty(np.zeros((1, 4)), current, 0.2).item() == pytest.approx(0.2 * expected)
    assert kl_divergence(np.zeros(4), current[0])[0] == pytest.approx(expected)
    print(f"  ✓ KL(uniform ‖ [2,1,1,1]/5) = {expected:.6f}")


def test_kl_penalty_gradient():
    """d(ρ·mean KL)/d logits = ρ/N · (q − p)"""
    rng = np.random.default_rng(1)
    bc = rng.normal(size=(3, 4))
    current = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    with Tape() as tape:
        loss = kl_penalty(bc, current, 0.5)
    (grad,) = tape.backward(loss, [current])

    def softmax(x):
        e = np.exp(x - x.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)

    expected = 0.5 / 3 * (softmax(current.data) - softmax(bc))
    assert np.allclose(grad, expected, atol=1e-12)


def test_rho_step():
    assert rho_step(0.2) == pytest.approx(0.199)
    assert rho_step(rho_step(0.2)) == pytest.approx(0.198005)
    assert rho_step(0.2, decay=1.0) == 0.2
    with pytest.raises(FinetuneError):
        rho_step(0.2, decay=0.0)


# 학습 루프


def test_phase_one_freezes_actor_and_rnn(suite):
    print("\n테스트 6: frozen 그룹 계약")

    registry, episodes = suite
    params = init_policy(POLICY, np.random.default_rng(6))
    initial = params.arrays()
    schedule = ScheduleConfig(phase1_end=256, warmup_end=384)

    with PPOTrainer(params, ppo_config(), schedule, registry, episodes) as trainer:
        while trainer.state().phase == 1:
            stats = trainer.update()
            assert stats.phase == 1 and stats.actor_lr == 0.0
        at_s1 = params.arrays()
        while trainer.steps < trainer.cfg.total_steps:
            trainer.update()
    final = params.arrays()

    def same(a, b, prefix):
        return all(a[k].tobytes() == b[k].tobytes() for k in a if k.startswith(prefix))

    assert same(initial, at_s1, "rnn/") and same(initial, at_s1, "actor_head/")
    assert not same(initial, at_s1, "critic_head/")
    assert same(initial, final, "visual_encoder/") and same(initial, final, "aux_embed/")
    assert not same(initial, final, "actor_head/")
    print("  ✓ phase 1: actor/rnn 불변, 전체: visual/aux 불변")


def test_critic_learns_on_fixed_policy(suite):
    """고정 정책 데이터에서 phase 1 update 만으로 value loss (10 update 이동 평균) 가 감소"""
    print("\n테스트 7: critic 단독 학습")

    params = init_policy(POLICY, np.random.default_rng(7))
    cfg = ppo_config()
    result = collect_result(params, suite, cfg)
    # 고정된 0 이 아닌 보상 (성공 보상만으로는 value 목표가 거의 0)
    result.segments = [
        dataclasses.replace(s, rewards=np.full_like(s.rewards, 0.1)) for s in result.segments
    ]
    rebuilt = RolloutBuffer.from_result(result, cfg.gamma, cfg.gae_tau)
    full = rebuilt.minibatches(1, np.random.default_rng(0))[0]

    state = schedule_state(0, ScheduleConfig(critic_lr_hi=3e-3).resolved(10**6))
    optimizer = Optimizer.adam([params.group(name) for name in GROUP_NAMES])
    rng = np.random.default_rng(0)
    losses = []
    for _ in range(100):
        ppo_update(params, optimizer, rebuilt, cfg, state, rng)
        losses.append(ppo_loss(full, params, cfg, phase=1).value_term)
    smoothed = [float(np.mean(losses[i : i + 10])) for i in range(0, 100, 10)]
    assert all(b <= a for a, b in zip(smoothed, smoothed[1:])), smoothed
    assert smoothed[-1] < smoothed[0]
    print(f"  ✓ value loss {smoothed[0]:.4f} → {smoothed[-1]:.4f}")


def test_vpt_mode_decays_rho_and_stays_close(suite):
    registry, episodes = suite
    params = init_policy(POLICY, np.random.default_rng(8))
    reference = params.snapshot()
    schedule = ScheduleConfig(mode=ScheduleMode.VPT)

    with PPOTrainer(params, ppo_config(), schedule, registry, episodes, VPTConfig()) as trainer:
        assert trainer.state().phase == 2
        for _ in range(4):
            stats = trainer.update()
            assert stats.kl >= 0.0
    assert trainer.rho == pytest.approx(0.2 * 0.995**4)

    buffer = collect_buffer(reference, suite, ppo_config(), seed=11)
    held_out = buffer.minibatches(1, np.random.default_rng(0))[0]
    kls = []
    for seq in held_out.sequences:
        ref = forward_sequence(seq.observations, seq.hidden0, seq.episode_starts, reference)
        cur = forward_sequence(seq.observations, seq.hidden0, seq.episode_starts, params)
        kls.append(kl_divergence(ref.logits.data, cur.logits.data))
    assert float(np.mean(np.concatenate(kls))) < 1e-2


def test_training_is_deterministic(suite):
    registry, episodes = suite
    finals = []
    for _ in range(2):
        params = init_policy(POLICY, np.random.default_rng(9))
        cfg = ppo_config(total_steps=256)
        schedule = ScheduleConfig(phase1_end=64, warmup_end=128)
        with PPOTrainer(params, cfg, schedule, registry, episodes) as trainer:
            while trainer.steps < cfg.total_steps:
                trainer.update()
        finals.append(params.arrays())
    assert all(finals[0][k].tobytes() == finals[1][k].tobytes() for k in finals[0])


def test_train_rl_finetune_writes_run(suite, tmp_path):
    print("\n테스트 8: finetuning 실행")

    registry, episodes = suite
    init = init_policy(POLICY, np.random.default_rng(10))
    checkpoint = save_policy(tmp_path / "bc.ckpt", init, step=0, config_hash="bc", phase="bc")

    schedule = ScheduleConfig(phase1_end=128, warmup_end=256)
    result = train_rl_finetune(
        checkpoint, ppo_config(), schedule, registry, episodes, tmp_path / "rl"
    )

    names = [p.name for p in result.checkpoints]
    assert names[0] == "rl_000000000.ckpt"
    assert names[-1] == f"rl_{result.steps:09d}.ckpt"
    assert result.steps >= 768
    assert (tmp_path / "rl" / "run.json").exists()

    rows = read_metrics(result.metrics_path)
    phases = [row["phase"] for row in rows]
    assert phases[0] == "1" and phases[-1] == "2"
    assert all(float(r["actor_lr"]) == 0.0 for r in rows if r["phase"] == "1")
    assert all(r["rho"] == "" for r in rows)
    assert rows[0]["train_success_probe"] != ""
    print(f"  ✓ 체크포인트 {len(names)}개, 지표 {len(rows)}행")


def test_train_rl_finetune_rejects_mismatched_checkpoint(suite, tmp_path):
    registry, episodes = suite
    other = PolicyConfig.for_env(PARAMS, d_vis=6, aux_dim=4, hidden_size=6, cell_embed_dim=3)
    checkpoint = save_policy(
        tmp_path / "bc.ckpt",
        init_policy(other, np.random.default_rng(0)),
        step=0,
        config_hash="bc",
        phase="bc",
    )
    out_dir = tmp_path / "rl"
    with pytest.raises(FinetuneError):
        train_rl_finetune(
            checkpoint,
            ppo_config(),
            ScheduleConfig(),
            registry,
            episodes,
            out_dir,
            policy_config=POLICY,
        )
    assert not out_dir.exists()

    with pytest.raises(FinetuneError):
        train_rl_finetune(
            tmp_path / "missing.ckpt", ppo_config(), ScheduleConfig(), registry, episodes, out_dir
        )


def test_reset_critic_is_near_zero():
    params = init_policy(POLICY, np.random.default_rng(0))
    head = params.group("critic_head").tensors
    head["w"].data = np.ones_like(head["w"].data)
    head["b"].data = np.ones_like(head["b"].data)
    reset_critic(params, np.random.default_rng(1))
    assert np.all(np.abs(head["w"].data) <= POLICY.critic_init_scale)
    assert np.all(head["b"].data == 0.0)


def test_trainer_rejects_policy_for_other_env(suite):
    registry, episodes = suite
    other = PolicyConfig.for_env(EnvParams(patch_depth=3), d_vis=8, aux_dim=4, hidden_size=8)
    params = init_policy(other, np.random.default_rng(0))
    with pytest.raises(FinetuneError):
        PPOTrainer(params, ppo_config(), ScheduleConfig(), registry, episodes)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
