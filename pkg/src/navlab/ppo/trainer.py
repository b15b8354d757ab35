"""
PPO finetuning 학습 루프

BC 체크포인트에서 시작해 critic 을 0 근처로 다시 초기화하고, 스케줄에 따라
phase 1 (critic 만 학습) 과 phase 2 (actor + RNN + critic) 를 진행합니다.
update 한 번은 sample 모드 수집 → GAE → ppo_epochs × minibatches 번의 Adam step 입니다.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from common.config import (
    PolicyConfig,
    PPOConfig,
    ScheduleConfig,
    ScheduleMode,
    VPTConfig,
    WorkerPoolConfig,
    config_hash,
)
from common.models import Episode
from common.utils import MetricsLog, atomic_write_text, get_logger, progress_bar
from navlab.autodiff import Optimizer, Tape, clip_grad_norm
from navlab.evaluation import success_probe
from navlab.gridnav import WorldRegistry
from navlab.policy import (
    GROUP_NAMES,
    HiddenState,
    PolicyError,
    PolicyParams,
    forward_sequence,
    initial_hidden,
    load_policy,
    save_policy,
)
from navlab.rollout import CollectResult, RolloutMode, WorkerPool

from .buffer import RolloutBuffer
from .gae import FinetuneError
from .loss import PPOLossTerms, ppo_loss
from .schedule import ScheduleState, schedule_state
from .vpt import rho_step

logger = get_logger("ppo")

METRIC_COLUMNS = [
    "step",
    "phase",
    "actor_lr",
    "critic_lr",
    "policy_term",
    "value_term",
    "entropy",
    "kl",
    "mean_return",
    "train_success_probe",
    "rho",
]
MAX_EMPTY_ROUNDS = 3


def reset_critic(params: PolicyParams, rng: np.random.Generator) -> None:
    """critic 최종층을 ±critic_init_scale 균등 분포 (bias 0) 로 다시 초기화"""
    scale = params.config.critic_init_scale
    head = params.group("critic_head").tensors
    head["w"].data = rng.uniform(-scale, scale, size=head["w"].shape)
    head["b"].data = np.zeros(head["b"].shape)


def check_policy_env(config: PolicyConfig, registry: WorldRegistry) -> None:
    """
    정책 입력 구조가 env 관측과 맞는지 확인

    Raises:
        FinetuneError: patch 크기, 셀 코드 수, 물체 종류 수 중 하나라도 다를 때
    """
    expected = PolicyConfig.for_env(registry.params)
    fields = ("patch_depth", "patch_width", "num_cell_codes", "num_categories")
    diff = {
        name: (getattr(config, name), getattr(expected, name))
        for name in fields
        if getattr(config, name) != getattr(expected, name)
    }
    if diff:
        raise FinetuneError(f"정책 구조가 env 관측과 맞지 않습니다 (체크포인트, env): {diff}")


GroupedGrads = Dict[str, Dict[str, np.ndarray]]


def _clip_grouped(grads: GroupedGrads, max_norm: float) -> Tuple[GroupedGrads, float]:
    flat = {f"{group}/{name}": g for group, items in grads.items() for name, g in items.items()}
    if not flat:
        return grads, 0.0
    clipped, norm = clip_grad_norm(flat, max_norm)
    out: GroupedGrads = {}
    for key, g in clipped.items():
        group, _, name = key.partition("/")
        out.setdefault(group, {})[name] = g
    return out, norm


def ppo_update(
    params: PolicyParams,
    optimizer: Optimizer,
    buffer: RolloutBuffer,
    cfg: PPOConfig,
    state: ScheduleState,
    rng: np.random.Generator,
    rho: Optional[float] = None,
) -> List[PPOLossTerms]:
    """
    버퍼 하나로 ppo_epochs × minibatches 번 Adam step

    frozen 마스크는 state.frozen 으로 설정되고, 그룹별 lr 은 state.group_lrs() 를 씁니다.

    Returns:
        minibatch 별 PPOLossTerms (grad_norm 은 clipping 전 값)
    """
    for name, frozen in state.frozen.items():
        params.group(name).set_frozen(frozen)
    lrs = state.group_lrs()
    terms: List[PPOLossTerms] = []
    for _ in range(cfg.ppo_epochs):
        for minibatch in buffer.minibatches(cfg.minibatches, rng):
            with Tape() as tape:
                loss = ppo_loss(minibatch, params, cfg, phase=state.phase, rho=rho)
            grads, loss.grad_norm = _clip_grouped(
                params.gradients(tape, loss.total), cfg.max_grad_norm
            )
            optimizer.step(grads, lrs)
            terms.append(loss)
    return terms


@dataclass
class PPOUpdateStats:
    """update 한 번의 평균 loss 항과 수집 통계"""

    step: int
    phase: int
    actor_lr: float
    critic_lr: float
    policy_term: float
    value_term: float
    entropy: float
    kl: float
    mean_return: float
    rho: float
    env_steps: int
    truncated_workers: List[int] = field(default_factory=list)

    def row(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_COLUMNS if hasattr(self, name)}


class PPOTrainer:
    """
    sample 모드 worker 풀 + 단일 updater

    Example:
        with PPOTrainer(params, cfg, schedule, registry, episodes) as trainer:
            while trainer.steps < cfg.total_steps:
                stats = trainer.update()
    """

    def __init__(
        self,
        params: PolicyParams,
        cfg: PPOConfig,
        schedule: ScheduleConfig,
        registry: WorldRegistry,
        episodes: Sequence[Episode],
        vpt: Optional[VPTConfig] = None,
    ):
        if not episodes:
            raise FinetuneError("finetuning 에피소드가 비어 있습니다")
        if schedule.total_steps is None:
            schedule = schedule.resolved(cfg.total_steps)
        elif schedule.total_steps != cfg.total_steps:
            raise FinetuneError(
                f"스케줄 total_steps({schedule.total_steps}) != ppo.total_steps({cfg.total_steps})"
            )
        check_policy_env(params.config, registry)

        self.params = params
        self.cfg = cfg
        self.schedule = schedule
        self.vpt = vpt or VPTConfig()
        self.is_vpt = schedule.mode is ScheduleMode.VPT
        self.rho = self.vpt.rho if self.is_vpt else 0.0
        self.reference: Optional[PolicyParams] = params.snapshot() if self.is_vpt else None
        self.reference_carry: Dict[int, HiddenState] = {
            w: initial_hidden(params.config, cfg.envs_per_worker) for w in range(cfg.workers)
        }
        self.pool = WorkerPool(
            registry, WorkerPoolConfig.from_trainer(cfg), episodes=episodes, seed=cfg.seed
        )
        self.optimizer = Optimizer.adam(
            [params.group(name) for name in GROUP_NAMES],
            beta1=cfg.optim.beta1,
            beta2=cfg.optim.beta2,
            eps=cfg.optim.eps,
            weight_decay=cfg.optim.weight_decay,
        )
        self.rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
        self.steps = 0
        self.updates = 0
        self._empty_rounds = 0
        self.apply_state(self.state())

    def state(self) -> ScheduleState:
        """현재 step 의 스케줄 상태 (total_steps 를 넘으면 마지막 값)"""
        return schedule_state(min(self.steps, self.cfg.total_steps), self.schedule, self.vpt)

    def apply_state(self, state: ScheduleState) -> None:
        for name, frozen in state.frozen.items():
            self.params.group(name).set_frozen(frozen)

    def _reference_logits(self, result: CollectResult) -> List[np.ndarray]:
        """기준 BC 정책의 segment 별 (T, N, 4) logit (worker 별 hidden 을 이어감)"""
        assert self.reference is not None
        out = []
        for segment in result.segments:
            n = segment.num_envs
            if segment.length == 0:
                out.append(np.zeros((0, n, 4)))
                continue
            carry = self.reference_carry[segment.worker_id]
            seq = forward_sequence(
                segment.observations, carry, segment.episode_starts, self.reference
            )
            self.reference_carry[segment.worker_id] = seq.hidden
            out.append(seq.logits.data.reshape(segment.length, n, -1))
        return out

    def update(self) -> PPOUpdateStats:
        """
        수집 한 번 + PPO epoch

        Raises:
            FinetuneError: 연속으로 유효한 env 가 하나도 없을 때
        """
        state = self.state()
        self.apply_state(state)
        result = self.pool.collect(self.params.snapshot(), RolloutMode.SAMPLE)
        reference = self._reference_logits(result) if self.is_vpt else None
        buffer = RolloutBuffer.from_result(
            result, self.cfg.gamma, self.cfg.gae_tau, self.cfg.normalize_advantage, reference
        )
        rho = self.rho if self.is_vpt else None
        terms = ppo_update(self.params, self.optimizer, buffer, self.cfg, state, self.rng, rho)

        if not terms:
            self._empty_rounds += 1
            if self._empty_rounds >= MAX_EMPTY_ROUNDS:
                raise FinetuneError(f"{MAX_EMPTY_ROUNDS} 번 연속으로 유효한 env 가 없습니다")
            logger.warning("round %d: 학습할 segment 가 없습니다", result.round_index)
        else:
            self._empty_rounds = 0
            if self.is_vpt:
                self.rho = rho_step(self.rho, self.vpt.rho_decay)

        self.steps += result.env_steps
        self.updates += 1

        def avg(name: str) -> float:
            return float(np.mean([getattr(t, name) for t in terms])) if terms else float("nan")

        return PPOUpdateStats(
            step=self.steps,
            phase=state.phase,
            actor_lr=state.actor_lr,
            critic_lr=state.critic_lr,
            policy_term=avg("policy_term"),
            value_term=avg("value_term"),
            entropy=avg("entropy"),
            kl=avg("kl"),
            mean_return=result.mean_return(),
            rho=self.rho,
            env_steps=result.env_steps,
            truncated_workers=result.truncated_workers,
        )

    def close(self) -> None:
        self.pool.close()

    def __enter__(self) -> "PPOTrainer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __repr__(self) -> str:
        return (
            f"PPOTrainer(mode={self.schedule.mode.value}, steps={self.steps}, "
            f"updates={self.updates}, phase={self.state().phase})"
        )


@dataclass
class RLRunResult:
    """train_rl_finetune 결과"""

    params: PolicyParams
    checkpoints: List[Path]
    metrics_path: Path
    steps: int
    rho: float


def train_rl_finetune(
    init_checkpoint: Union[str, Path],
    cfg: PPOConfig,
    schedule: ScheduleConfig,
    registry: WorldRegistry,
    episodes: Sequence[Episode],
    out_dir: Union[str, Path],
    policy_config: Optional[PolicyConfig] = None,
    vpt: Optional[VPTConfig] = None,
    probe_episodes: Optional[Sequence[Episode]] = None,
    show_progress: bool = False,
) -> RLRunResult:
    """
    BC 체크포인트에서 RL finetuning 실행

    out_dir 에 rl_{step:09d}.ckpt, metrics.csv, run.json 을 씁니다.

    Args:
        init_checkpoint: BC 체크포인트 경로
        cfg: PPO 설정
        schedule: lr 스케줄 (S₁/S₂ 가 비어 있으면 total_steps 비율로 채움)
        registry: world registry
        episodes: 학습 에피소드
        out_dir: 출력 디렉토리
        policy_config: 기대하는 네트워크 구조 (None 이면 체크포인트 기록)
        vpt: VPT 모드 설정
        probe_episodes: train-success probe 에피소드 (기본값: 학습 에피소드 앞쪽)
        show_progress: tqdm 진행 막대 표시

    Returns:
        RLRunResult

    Raises:
        FinetuneError: 체크포인트 로드 실패, 구조 불일치 (학습 시작 전)
    """
    try:
        params, meta = load_policy(init_checkpoint, policy_config)
    except PolicyError as e:
        raise FinetuneError(f"초기 체크포인트를 쓸 수 없습니다: {e}") from e
    check_policy_env(params.config, registry)
    if schedule.total_steps is None:
        schedule = schedule.resolved(cfg.total_steps)
    reset_critic(params, np.random.default_rng(np.random.SeedSequence([cfg.seed, 3])))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if probe_episodes is None:
        probe_episodes = list(episodes[: cfg.probe_episodes])
    digest = config_hash(cfg)
    vpt = vpt or VPTConfig()

    metrics = MetricsLog(out_dir / "metrics.csv", METRIC_COLUMNS)
    checkpoints: List[Path] = []
    started = time.monotonic()

    with PPOTrainer(params, cfg, schedule, registry, episodes, vpt) as trainer:
        header = {
            "phase": "rl",
            "config": cfg.model_dump(mode="json"),
            "config_hash": digest,
            "schedule": trainer.schedule.model_dump(mode="json"),
            "vpt": vpt.model_dump(mode="json") if trainer.is_vpt else None,
            "policy": params.config.model_dump(mode="json"),
            "init_checkpoint": str(init_checkpoint),
            "init_step": meta.step,
            "init_phase": meta.phase,
        }
        atomic_write_text(out_dir / "run.json", json.dumps(header, sort_keys=True, indent=2) + "\n")
        logger.info(
            "rl finetune: mode %s, S1 %d, S2 %d, entropy_coef %g",
            trainer.schedule.mode.value,
            trainer.schedule.phase1_end,
            trainer.schedule.warmup_end,
            cfg.entropy_coef,
        )

        def checkpoint(row: Dict[str, float]) -> None:
            probe = success_probe(params, registry, probe_episodes)
            path = save_policy(
                out_dir / f"rl_{trainer.steps:09d}.ckpt",
                params,
                step=trainer.steps,
                config_hash=digest,
                phase="rl",
                rng_state={"seed": cfg.seed, "updates": trainer.updates},
                extra={
                    "train_success_probe": probe,
                    "mode": trainer.schedule.mode.value,
                    "rho": trainer.rho,
                },
            )
            checkpoints.append(path)
            metrics.append({**row, "train_success_probe": probe})
            metrics.flush()
            logger.info("rl step %d: probe %.3f → %s", trainer.steps, probe, path.name)

        state = trainer.state()
        checkpoint(
            {
                "step": 0,
                "phase": state.phase,
                "actor_lr": state.actor_lr,
                "critic_lr": state.critic_lr,
                "rho": trainer.rho if trainer.is_vpt else None,
            }
        )
        next_checkpoint = cfg.checkpoint_interval
        stats: Optional[PPOUpdateStats] = None
        with progress_bar(cfg.total_steps, desc="rl", enabled=show_progress) as bar:
            while trainer.steps < cfg.total_steps:
                stats = trainer.update()
                bar.update(stats.env_steps)
                row = stats.row()
                if not trainer.is_vpt:
                    row["rho"] = None
                if trainer.steps >= cfg.total_steps:
                    break
                if trainer.steps >= next_checkpoint:
                    checkpoint(row)
                    while next_checkpoint <= trainer.steps:
                        next_checkpoint += cfg.checkpoint_interval
                else:
                    metrics.append(row)
        if stats is not None:
            checkpoint(row)
        metrics.flush()
        logger.info("rl finetune 완료: %d step, %.1fs", trainer.steps, time.monotonic() - started)
        return RLRunResult(
            params=params,
            checkpoints=checkpoints,
            metrics_path=metrics.path,
            steps=trainer.steps,
            rho=trainer.rho,
        )
