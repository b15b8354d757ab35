"""
RL finetuning lr 스케줄

phase 1 (step < S₁) 에는 critic 만 학습하고, S₁..S₂ 구간에서 critic lr 을 낮추며 actor lr 을
올린 뒤 둘 다 lr_lo 로 유지합니다. actor 와 critic 이 공유하는 RNN 에는 둘 중 작은 lr 을 씁니다.
ablation 모드는 이 구성 요소 중 일부만 사용합니다.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from common.config import ScheduleConfig, ScheduleMode, VPTConfig

from .gae import FinetuneError

# 전체 run 동안 학습하지 않는 그룹
ALWAYS_FROZEN = ("visual_encoder", "aux_embed")


@dataclass(frozen=True)
class ScheduleState:
    """step 하나에서의 phase, 그룹별 lr, frozen 여부"""

    step: int
    phase: int
    actor_lr: float
    critic_lr: float
    shared_lr: float
    frozen: Dict[str, bool]

    def group_lrs(self) -> Dict[str, float]:
        lrs = {name: 0.0 for name in ALWAYS_FROZEN}
        lrs.update(
            {"rnn": self.shared_lr, "actor_head": self.actor_lr, "critic_head": self.critic_lr}
        )
        return lrs


def _ramp(step: int, start: int, end: int) -> float:
    """start..end 구간에서 0 → 1 (start == end 면 1)"""
    if end <= start:
        return 1.0
    return min(1.0, max(0.0, (step - start) / (end - start)))


def _knots(schedule: ScheduleConfig) -> Tuple[int, int, int]:
    if schedule.total_steps is None or schedule.phase1_end is None or schedule.warmup_end is None:
        raise FinetuneError("스케줄이 확정되지 않았습니다 (ScheduleConfig.resolved 필요)")
    return schedule.phase1_end, schedule.warmup_end, schedule.total_steps


def lr_schedule(
    step: int, schedule: ScheduleConfig, vpt: Optional[VPTConfig] = None
) -> Tuple[float, float, float]:
    """
    step 에서의 (actor_lr, critic_lr, shared_lr)

    Args:
        step: 현재 env step (0 ≤ step ≤ total_steps)
        schedule: resolved 된 스케줄
        vpt: VPT 모드의 고정 lr 설정 (기본값: VPTConfig())

    Returns:
        (actor, critic, shared), shared = min(actor, critic)

    Raises:
        FinetuneError: step 이 범위를 벗어나거나 스케줄이 확정되지 않았을 때
    """
    s1, s2, total = _knots(schedule)
    if step < 0 or step > total:
        raise FinetuneError(f"lr_schedule: step {step} 이 [0, {total}] 범위를 벗어났습니다")

    hi, lo, fixed = schedule.critic_lr_hi, schedule.lr_lo, schedule.fixed_lr
    mode = schedule.mode

    if mode is ScheduleMode.NAIVE:
        actor = critic = fixed
    elif mode is ScheduleMode.VPT:
        actor = critic = (vpt or VPTConfig()).fixed_lr
    elif step < s1:
        actor = 0.0
        critic = fixed if mode is ScheduleMode.CRITIC_ONLY_THEN_JUMP else hi
    elif mode is ScheduleMode.CRITIC_ONLY_THEN_JUMP:
        actor = critic = fixed
    else:
        frac = _ramp(step, s1, s2)
        decay = hi * (1.0 - frac) + lo * frac
        warmup = lo * frac
        if mode is ScheduleMode.PIRLNAV:
            actor, critic = warmup, decay
        elif mode is ScheduleMode.CRITIC_DECAY_ONLY:
            actor, critic = lo, decay
        elif mode is ScheduleMode.ACTOR_WARMUP_ONLY:
            actor, critic = warmup, lo
        else:
            raise FinetuneError(f"알 수 없는 스케줄 모드: {mode}")
    return actor, critic, min(actor, critic)


def schedule_state(
    step: int, schedule: ScheduleConfig, vpt: Optional[VPTConfig] = None
) -> ScheduleState:
    """lr_schedule + phase 번호 + 그룹별 frozen 여부"""
    actor, critic, shared = lr_schedule(step, schedule, vpt)
    s1 = schedule.phase1_end or 0
    phase = 1 if schedule.mode.has_critic_phase and step < s1 else 2
    frozen = {name: True for name in ALWAYS_FROZEN}
    frozen.update({"rnn": phase == 1, "actor_head": phase == 1, "critic_head": False})
    return ScheduleState(
        step=step,
        phase=phase,
        actor_lr=actor,
        critic_lr=critic,
        shared_lr=shared,
        frozen=frozen,
    )
