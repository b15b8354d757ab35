"""
Behavior cloning 학습 루프

worker 들이 데모 행동을 env 에서 재생해 (관측, 행동) segment 를 모으고, 한 번의 update 마다
segment 의 env 열을 minibatch 로 나눠 minibatch 당 Adam step 하나를 적용합니다.
hidden 은 에피소드 안에서 update 를 넘어 이어지고 에피소드 경계에서 0 으로 초기화됩니다.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from common.config import BCConfig, PolicyConfig, WorkerPoolConfig, config_hash
from common.models import DemoDataset, Episode
from common.utils import MetricsLog, atomic_write_text, get_logger, progress_bar
from navlab.autodiff import Optimizer, Tape
from navlab.autodiff import functional as F
from navlab.evaluation import success_probe
from navlab.gridnav import WorldRegistry
from navlab.policy import (
    GROUP_NAMES,
    HiddenState,
    PolicyParams,
    init_policy,
    initial_hidden,
    save_policy,
)
from navlab.rollout import RolloutMode, WorkerPool, partition_envs

from .inflection import TrainingError, dataset_inflection_sigma
from .loss import BCBatch, weighted_nll

logger = get_logger("bc")

METRIC_COLUMNS = ["step", "loss", "lr", "train_success_probe", "wall_time_s"]
MAX_EMPTY_ROUNDS = 3


@dataclass
class BCUpdateStats:
    """update 한 번의 결과"""

    step: int
    loss: float
    lr: float
    env_steps: int
    minibatches: int
    truncated_workers: List[int] = field(default_factory=list)


class BCTrainer:
    """
    replay worker 풀 + 단일 updater

    Example:
        with BCTrainer(dataset, cfg, registry, params) as trainer:
            while trainer.steps < cfg.total_steps:
                stats = trainer.update()
    """

    def __init__(
        self,
        dataset: DemoDataset,
        cfg: BCConfig,
        registry: WorldRegistry,
        params: PolicyParams,
    ):
        demos = [d for d in dataset.demonstrations if d.length > 0]
        if not demos:
            raise TrainingError("BC 데이터셋이 비어 있습니다")
        if dataset.header.env_params != registry.params:
            raise TrainingError("데이터셋 env_params 가 registry 와 다릅니다")
        if len(demos) < cfg.workers:
            raise TrainingError(f"데모 {len(demos)} 개로 worker {cfg.workers} 개를 채울 수 없습니다")

        self.cfg = cfg
        self.params = params
        self.sigma = dataset_inflection_sigma(demos) if cfg.inflection_weighting else 1.0
        self.pool = WorkerPool(
            registry, WorkerPoolConfig.from_trainer(cfg), demos=demos, seed=cfg.seed
        )
        for name in GROUP_NAMES:
            params.group(name).set_frozen(False)
        self.optimizer = Optimizer.adam(
            [params.group(name) for name in GROUP_NAMES],
            beta1=cfg.optim.beta1,
            beta2=cfg.optim.beta2,
            eps=cfg.optim.eps,
            weight_decay=cfg.optim.weight_decay,
        )
        self.rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
        self.carry: Dict[int, HiddenState] = {
            w: initial_hidden(params.config, cfg.envs_per_worker) for w in range(cfg.workers)
        }
        self.steps = 0
        self.updates = 0
        self._empty_rounds = 0

    def current_lr(self) -> float:
        """다음 update 에 적용할 lr (step 이 total_steps 에 도달하면 0)"""
        if not self.cfg.lr_decay or self.cfg.total_steps == 0:
            return self.cfg.lr
        return self.cfg.lr * max(0.0, 1.0 - self.steps / self.cfg.total_steps)

    def update(self) -> BCUpdateStats:
        """
        replay 수집 한 번 + minibatch 별 Adam step

        Raises:
            TrainingError: 연속으로 학습할 step 이 하나도 수집되지 않을 때
        """
        result = self.pool.collect(None, RolloutMode.REPLAY)
        minibatches = partition_envs(result.segments, self.cfg.minibatches_per_update, self.rng)
        if not minibatches:
            self._empty_rounds += 1
            if self._empty_rounds >= MAX_EMPTY_ROUNDS:
                raise TrainingError(f"{MAX_EMPTY_ROUNDS} 번 연속으로 유효한 데모 step 이 없습니다")
            logger.warning("round %d: 학습할 segment 가 없습니다", result.round_index)
            return BCUpdateStats(self.steps, float("nan"), self.current_lr(), 0, 0)
        self._empty_rounds = 0

        lr = self.current_lr()
        lrs = {name: lr for name in GROUP_NAMES}
        losses = []
        for minibatch in minibatches:
            with Tape() as tape:
                numerators = []
                weight_sum = 0.0
                carried = []
                for segment, columns in minibatch:
                    hidden0 = self.carry[segment.worker_id].take(columns)
                    batch = BCBatch.from_segment(segment, columns, hidden0, self.sigma)
                    nll = weighted_nll(batch, self.params)
                    numerators.append(nll.numerator)
                    weight_sum += nll.weight_sum
                    carried.append((segment.worker_id, columns, nll.hidden))
                total = numerators[0]
                for numerator in numerators[1:]:
                    total = F.add(total, numerator)
                loss = F.mul(total, 1.0 / weight_sum)
            self.optimizer.step(self.params.gradients(tape, loss), lrs)
            losses.append(loss.item())
            for worker_id, columns, hidden in carried:
                data = self.carry[worker_id].data.copy()
                data[:, columns] = hidden.data
                self.carry[worker_id] = HiddenState(data)

        self.steps += result.env_steps
        self.updates += 1
        return BCUpdateStats(
            step=self.steps,
            loss=float(np.mean(losses)),
            lr=lr,
            env_steps=result.env_steps,
            minibatches=len(minibatches),
            truncated_workers=result.truncated_workers,
        )

    def close(self) -> None:
        self.pool.close()

    def __enter__(self) -> "BCTrainer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __repr__(self) -> str:
        return f"BCTrainer(steps={self.steps}, updates={self.updates}, sigma={self.sigma:.3f})"


@dataclass
class BCRunResult:
    """train_bc 결과"""

    params: PolicyParams
    checkpoints: List[Path]
    metrics_path: Path
    steps: int
    final_lr: float


def _probe_episodes(dataset: DemoDataset, count: int) -> List[Episode]:
    seen = set()
    episodes = []
    for demo in dataset.demonstrations:
        if len(episodes) >= count:
            break
        if demo.episode_id not in seen:
            seen.add(demo.episode_id)
            episodes.append(demo.episode)
    return episodes


def train_bc(
    dataset: DemoDataset,
    cfg: BCConfig,
    registry: WorldRegistry,
    out_dir: Union[str, Path],
    policy_config: Optional[PolicyConfig] = None,
    params: Optional[PolicyParams] = None,
    probe_episodes: Optional[Sequence[Episode]] = None,
    show_progress: bool = False,
) -> BCRunResult:
    """
    BC 학습 실행

    out_dir 에 bc_{step:09d}.ckpt 체크포인트, metrics.csv, run.json 을 씁니다.
    step 0 체크포인트는 항상 기록되고, 이후 checkpoint_interval 마다와 마지막에 기록됩니다.

    Args:
        dataset: 데모 데이터셋
        cfg: BC 설정
        registry: world registry (데이터셋과 같은 env_params)
        out_dir: 출력 디렉토리
        policy_config: 네트워크 구조 (기본값: env 에 맞춘 PolicyConfig)
        params: 시작 파라미터 (None 이면 cfg.seed 로 초기화)
        probe_episodes: train-success probe 에피소드 (기본값: 데이터셋 앞쪽 에피소드)
        show_progress: tqdm 진행 막대 표시

    Returns:
        BCRunResult

    Raises:
        TrainingError: 빈 데이터셋 또는 env_params 불일치
    """
    if not any(d.length > 0 for d in dataset.demonstrations):
        raise TrainingError("BC 데이터셋이 비어 있습니다")
    if dataset.header.env_params != registry.params:
        raise TrainingError("데이터셋 env_params 가 registry 와 다릅니다")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if params is None:
        policy_config = policy_config or PolicyConfig.for_env(registry.params)
        params = init_policy(policy_config, np.random.default_rng(cfg.seed))
    if probe_episodes is None:
        probe_episodes = _probe_episodes(dataset, cfg.probe_episodes)
    digest = config_hash(cfg)

    metrics = MetricsLog(out_dir / "metrics.csv", METRIC_COLUMNS)
    checkpoints: List[Path] = []
    started = time.monotonic()

    with BCTrainer(dataset, cfg, registry, params) as trainer:
        header = {
            "phase": "bc",
            "config": cfg.model_dump(mode="json"),
            "config_hash": digest,
            "policy": params.config.model_dump(mode="json"),
            "source": dataset.header.source.value,
            "dataset_steps": dataset.total_steps,
            "inflection_sigma": trainer.sigma,
        }
        atomic_write_text(out_dir / "run.json", json.dumps(header, sort_keys=True, indent=2) + "\n")

        def checkpoint(loss: Optional[float], lr: float) -> None:
            probe = success_probe(params, registry, probe_episodes)
            path = save_policy(
                out_dir / f"bc_{trainer.steps:09d}.ckpt",
                params,
                step=trainer.steps,
                config_hash=digest,
                phase="bc",
                rng_state={"seed": cfg.seed, "updates": trainer.updates},
                extra={"train_success_probe": probe},
            )
            checkpoints.append(path)
            metrics.append(
                {
                    "step": trainer.steps,
                    "loss": loss,
                    "lr": lr,
                    "train_success_probe": probe,
                    "wall_time_s": round(time.monotonic() - started, 3),
                }
            )
            metrics.flush()
            logger.info("bc step %d: probe %.3f → %s", trainer.steps, probe, path.name)

        checkpoint(None, trainer.current_lr())
        next_checkpoint = cfg.checkpoint_interval
        with progress_bar(cfg.total_steps, desc="bc", enabled=show_progress) as bar:
            while trainer.steps < cfg.total_steps:
                stats = trainer.update()
                bar.update(stats.env_steps)
                if trainer.steps >= cfg.total_steps:
                    break
                if trainer.steps >= next_checkpoint:
                    checkpoint(stats.loss, stats.lr)
                    while next_checkpoint <= trainer.steps:
                        next_checkpoint += cfg.checkpoint_interval
                else:
                    metrics.append(
                        {
                            "step": stats.step,
                            "loss": stats.loss,
                            "lr": stats.lr,
                            "wall_time_s": round(time.monotonic() - started, 3),
                        }
                    )
        if trainer.steps > 0:
            checkpoint(stats.loss, stats.lr)
        metrics.flush()
        return BCRunResult(
            params=params,
            checkpoints=checkpoints,
            metrics_path=metrics.path,
            steps=trainer.steps,
            final_lr=trainer.current_lr(),
        )
