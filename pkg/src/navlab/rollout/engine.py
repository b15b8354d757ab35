"""
병렬 경험 수집 (worker 선점 포함)

worker 마다 스레드 하나와 env 여러 개를 둡니다. ceil(sync_fraction × num_workers) 개의
worker 가 rollout_len step 을 끝내면 선점 신호가 켜지고, 남은 worker 는 다음 env step
직전에 멈춰 잘린 segment 를 돌려줍니다. worker 끼리 공유하는 것은 읽기 전용 정책
snapshot 과 완료 카운터뿐입니다.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from common.config import EnvParams, WorkerPoolConfig
from common.models import Action, Demonstration, Episode
from common.utils import get_logger, write_jsonl
from navlab.gridnav import EnvError, GridNavEnv, Observation, StepResult, WorldRegistry
from navlab.policy import (
    HiddenState,
    ObsBatch,
    PolicyParams,
    argmax_action,
    initial_hidden,
    log_probs,
    policy_forward,
    sample_action,
)

from .segment import CollectedSegment, CollectResult, EpisodeOutcome, RolloutError, RolloutMode

logger = get_logger("rollout")

StepHook = Callable[[int, int], None]


class _EnvFault(Exception):
    pass


@dataclass
class _EnvSlot:
    env: GridNavEnv
    obs: Optional[Observation] = None
    episode_id: str = ""
    demo: Optional[Demonstration] = None
    cursor: int = 0
    starting: bool = True
    last_action: int = -1
    episode_return: float = 0.0


@dataclass
class _WorkerState:
    worker_id: int
    rng: np.random.Generator
    slots: List[_EnvSlot]
    demos: List[Demonstration] = field(default_factory=list)
    demo_pos: int = 0
    hidden: Optional[HiddenState] = None
    mode: Optional[RolloutMode] = None


@dataclass
class _Barrier:
    """한 번의 collect 동안 worker 가 공유하는 완료 카운터와 선점 신호"""

    sync_count: int
    preempt: threading.Event = field(default_factory=threading.Event)
    lock: threading.Lock = field(default_factory=threading.Lock)
    completed: int = 0

    def finish(self) -> None:
        with self.lock:
            self.completed += 1
            if self.completed >= self.sync_count:
                self.preempt.set()


class WorkerPool:
    """
    rollout worker 풀

    env 상태(진행 중 에피소드, hidden carry)는 collect 호출 사이에 유지됩니다.

    Example:
        with WorkerPool(registry, pool_config, episodes=train, seed=0) as pool:
            result = pool.collect(params.snapshot(), RolloutMode.SAMPLE)
    """

    def __init__(
        self,
        registry: WorldRegistry,
        config: WorkerPoolConfig,
        episodes: Optional[Sequence[Episode]] = None,
        demos: Optional[Sequence[Demonstration]] = None,
        seed: int = 0,
    ):
        if not episodes and not demos:
            raise RolloutError("episodes 또는 demos 중 하나는 비어 있지 않아야 합니다")
        self.registry = registry
        self.config = config
        self.episodes = list(episodes or [])
        self.seed = seed
        self.rounds = 0

        all_demos = list(demos or [])
        streams = np.random.SeedSequence(seed).spawn(config.num_workers)
        self._workers = [
            _WorkerState(
                worker_id=w,
                rng=np.random.default_rng(streams[w]),
                slots=[_EnvSlot(GridNavEnv(registry)) for _ in range(config.envs_per_worker)],
                demos=all_demos[w :: config.num_workers],
            )
            for w in range(config.num_workers)
        ]
        self._executor: Optional[ThreadPoolExecutor] = None
        if config.num_workers > 1:
            self._executor = ThreadPoolExecutor(
                max_workers=config.num_workers, thread_name_prefix="rollout"
            )

    @property
    def params(self) -> EnvParams:
        return self.registry.params

    @property
    def has_demos(self) -> bool:
        return any(w.demos for w in self._workers)

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __repr__(self) -> str:
        return (
            f"WorkerPool(workers={self.config.num_workers}, "
            f"envs_per_worker={self.config.envs_per_worker}, "
            f"rollout_len={self.config.rollout_len}, sync_count={self.config.sync_count})"
        )

    def collect(
        self,
        snapshot: Optional[PolicyParams],
        mode: Union[RolloutMode, str] = RolloutMode.SAMPLE,
        step_hook: Optional[StepHook] = None,
    ) -> CollectResult:
        """
        모든 worker 에서 segment 하나씩 수집

        Args:
            snapshot: 읽기 전용 정책 파라미터 (replay 모드에서는 None 가능)
            mode: sample / argmax / replay
            step_hook: (worker_id, step) 를 받아 env step 직전에 호출되는 함수 (지연 주입용)

        Returns:
            CollectResult (worker 순서로 정렬된 segment)

        Raises:
            RolloutError: 정책이나 데이터 없이 해당 모드를 요청했거나 쓸 수 있는 에피소드가 없을 때
        """
        mode = RolloutMode(mode)
        if mode.uses_policy and snapshot is None:
            raise RolloutError(f"{mode.value} 모드에는 정책 snapshot 이 필요합니다")
        if mode is RolloutMode.REPLAY and not all(w.demos for w in self._workers):
            raise RolloutError(
                f"replay 모드: 모든 worker 에 데모가 있어야 합니다 (workers={self.config.num_workers})"
            )
        if mode.uses_policy and not self.episodes:
            raise RolloutError(f"{mode.value} 모드에 사용할 에피소드가 없습니다")

        barrier = _Barrier(sync_count=self.config.sync_count)
        if self._executor is None:
            segments = [self._run_worker(w, snapshot, mode, barrier, step_hook) for w in self._workers]
        else:
            futures = [
                self._executor.submit(self._run_worker, w, snapshot, mode, barrier, step_hook)
                for w in self._workers
            ]
            segments = [f.result() for f in futures]

        result = CollectResult(segments=segments, mode=mode, round_index=self.rounds)
        if result.truncated_workers:
            logger.debug("round %d: 선점된 worker %s", self.rounds, result.truncated_workers)
        if self.config.debug_dump is not None:
            dump_segments(result, self.config.debug_dump)
        self.rounds += 1
        return result

    # worker

    def _next_episode(self, state: _WorkerState, slot: _EnvSlot, mode: RolloutMode) -> None:
        """slot 에 새 에피소드를 시작 (실패한 에피소드는 경고 후 건너뜀)"""
        attempts = len(state.demos) if mode is RolloutMode.REPLAY else len(self.episodes)
        for _ in range(max(1, attempts)):
            if mode is RolloutMode.REPLAY:
                demo = state.demos[state.demo_pos % len(state.demos)]
                state.demo_pos += 1
                episode = demo.episode
                if demo.length == 0:
                    logger.warning("worker %d: 빈 데모 %s 건너뜀", state.worker_id, episode.episode_id)
                    continue
            else:
                demo = None
                episode = self.episodes[int(state.rng.integers(len(self.episodes)))]
            try:
                slot.obs = slot.env.reset(episode)
            except EnvError as e:
                logger.warning(
                    "worker %d: 에피소드 %s 건너뜀 (%s)", state.worker_id, episode.episode_id, e
                )
                continue
            slot.episode_id = episode.episode_id
            slot.demo = demo
            slot.cursor = 0
            slot.starting = True
            slot.last_action = -1
            slot.episode_return = 0.0
            return
        raise RolloutError(f"worker {state.worker_id}: 시작할 수 있는 에피소드가 없습니다")

    def _step_slot(self, slot: _EnvSlot, action: int, mode: RolloutMode) -> StepResult:
        if mode is RolloutMode.REPLAY:
            assert slot.demo is not None
            slot.cursor += 1
        try:
            result = slot.env.step(Action(action))
        except EnvError as e:
            raise _EnvFault(str(e)) from e
        if mode is RolloutMode.REPLAY:
            remaining = slot.demo.length - slot.cursor
            if result.done and remaining > 0:
                raise _EnvFault(f"{slot.episode_id}: 데모 행동 {remaining}개가 남았는데 에피소드가 끝났습니다")
            if not result.done and remaining == 0:
                raise _EnvFault(f"{slot.episode_id}: 데모 행동이 끝났는데 에피소드가 진행 중입니다")
        return result

    def _run_worker(
        self,
        state: _WorkerState,
        snapshot: Optional[PolicyParams],
        mode: RolloutMode,
        barrier: _Barrier,
        step_hook: Optional[StepHook],
    ) -> CollectedSegment:
        n = len(state.slots)
        if state.mode is not mode:
            for slot in state.slots:
                slot.obs = None
            state.hidden = None
            state.mode = mode
        for slot in state.slots:
            if slot.obs is None:
                self._next_episode(state, slot, mode)

        if mode.uses_policy:
            assert snapshot is not None
            if state.hidden is None:
                state.hidden = initial_hidden(snapshot.config, n)
        hidden0 = state.hidden

        valid = np.ones(n, dtype=bool)
        observations: List[ObsBatch] = []
        actions, logps, values, rewards, dones, starts, inflections = [], [], [], [], [], [], []
        finished: List[EpisodeOutcome] = []
        truncated_at: Optional[int] = None

        for t in range(self.config.rollout_len):
            if barrier.preempt.is_set():
                truncated_at = t
                break
            if step_hook is not None:
                step_hook(state.worker_id, t)

            batch = ObsBatch.from_observations([slot.obs for slot in state.slots])
            start_row = np.array([slot.starting for slot in state.slots])
            if mode.uses_policy:
                hidden = state.hidden.reset(start_row)
                out = policy_forward(batch, hidden, snapshot)
                if mode is RolloutMode.SAMPLE:
                    chosen = sample_action(out.logits, state.rng)
                else:
                    chosen = argmax_action(out.logits)
                logp_row = log_probs(out.logits)[np.arange(n), chosen]
                value_row = out.value
                state.hidden = out.hidden
            else:
                chosen = np.array(
                    [
                        Action.from_code(slot.demo.actions[slot.cursor]) if valid[i] else Action.STOP
                        for i, slot in enumerate(state.slots)
                    ],
                    dtype=np.int64,
                )
                logp_row = np.zeros(n)
                value_row = np.zeros(n)

            reward_row = np.zeros(n)
            done_row = np.zeros(n, dtype=bool)
            inflection_row = np.zeros(n, dtype=bool)
            for i, slot in enumerate(state.slots):
                if not valid[i]:
                    continue
                action = int(chosen[i])
                try:
                    result = self._step_slot(slot, action, mode)
                except _EnvFault as e:
                    logger.warning("worker %d env %d: segment 무효화 (%s)", state.worker_id, i, e)
                    valid[i] = False
                    continue
                inflection_row[i] = slot.starting or action != slot.last_action
                slot.last_action = action
                slot.starting = False
                slot.episode_return += result.reward
                reward_row[i] = result.reward
                done_row[i] = result.done
                if result.done:
                    finished.append(
                        EpisodeOutcome(
                            episode_id=slot.episode_id,
                            success=result.info.success,
                            episode_return=slot.episode_return,
                            steps=result.info.steps_elapsed,
                        )
                    )
                    self._next_episode(state, slot, mode)
                else:
                    slot.obs = result.obs

            observations.append(batch)
            actions.append(np.asarray(chosen, dtype=np.int64))
            logps.append(logp_row)
            values.append(value_row)
            rewards.append(reward_row)
            dones.append(done_row)
            starts.append(start_row)
            inflections.append(inflection_row)

        barrier.finish()

        bootstrap = np.zeros(n)
        if mode.uses_policy:
            batch = ObsBatch.from_observations([slot.obs for slot in state.slots])
            hidden = state.hidden.reset(np.array([slot.starting for slot in state.slots]))
            bootstrap = policy_forward(batch, hidden, snapshot).value

        for i in np.flatnonzero(~valid):
            state.slots[i].obs = None

        def stacked(rows: list, dtype) -> np.ndarray:
            if not rows:
                return np.zeros((0, n), dtype=dtype)
            return np.stack(rows).astype(dtype)

        return CollectedSegment(
            worker_id=state.worker_id,
            observations=observations,
            actions=stacked(actions, np.int64),
            log_probs=stacked(logps, np.float64),
            values=stacked(values, np.float64),
            rewards=stacked(rewards, np.float64),
            dones=stacked(dones, bool),
            episode_starts=stacked(starts, bool),
            inflections=stacked(inflections, bool),
            bootstrap_value=bootstrap,
            valid=valid,
            hidden0=hidden0,
            truncated_at=truncated_at,
            finished=finished,
        )


def collect(
    pool: WorkerPool,
    snapshot: Optional[PolicyParams],
    mode: Union[RolloutMode, str] = RolloutMode.SAMPLE,
    step_hook: Optional[StepHook] = None,
) -> CollectResult:
    """pool.collect 의 함수형 진입점"""
    return pool.collect(snapshot, mode, step_hook)


def deterministic_collect(
    registry: WorldRegistry,
    config: WorkerPoolConfig,
    snapshot: Optional[PolicyParams],
    seed: int,
    mode: Union[RolloutMode, str] = RolloutMode.SAMPLE,
    episodes: Optional[Sequence[Episode]] = None,
    demos: Optional[Sequence[Demonstration]] = None,
    rounds: int = 1,
) -> List[CollectedSegment]:
    """
    worker 1개로 순차 수집 (같은 seed/snapshot → 비트 동일)

    Args:
        registry: world 레지스트리
        config: 풀 구성 (num_workers 는 1 로 고정됨)
        snapshot: 정책 snapshot
        seed: worker 난수 seed
        mode: 행동 선택 방식
        episodes: sample/argmax 모드 에피소드
        demos: replay 모드 데모
        rounds: 수집 횟수

    Returns:
        round 순서의 segment 목록
    """
    single = config.model_copy(update={"num_workers": 1, "debug_dump": None})
    with WorkerPool(registry, single, episodes=episodes, demos=demos, seed=seed) as pool:
        return [pool.collect(snapshot, mode).segments[0] for _ in range(rounds)]


def dump_segments(result: CollectResult, directory: Union[str, Path]) -> Path:
    """segment 요약을 round 별 JSON-lines 파일로 저장"""
    path = Path(directory) / f"collect_{result.round_index:05d}.jsonl"
    header = {
        "round": result.round_index,
        "mode": result.mode.value,
        "env_steps": result.env_steps,
        "truncated_workers": result.truncated_workers,
    }
    return write_jsonl(path, header, [s.to_dump() for s in result.segments])
