"""
Pipeline 단계

world → episode → demo → BC → RL-FT → eval 각 단계를 파일 단위로 실행합니다.
CLI 서브커맨드와 recipe 스테이지가 같은 함수를 씁니다.
"""

import json
import math
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

from common.config import (
    DemoSource,
    EnvParams,
    LabConfig,
    ScheduleMode,
    config_hash,
)
from common.models import DemoDataset, Episode, Split
from common.utils import atomic_write_text, get_logger
from navlab.bc import BCRunResult, TrainingError, train_bc
from navlab.demos import (
    DatasetCorruptionError,
    DemoError,
    build_budgeted_dataset,
    create_generator,
    read_dataset,
    subsample_nested,
    write_dataset,
)
from navlab.evaluation import (
    EvalResult,
    EvaluationError,
    evaluate_checkpoint,
    select_episodes,
    write_eval_output,
)
from navlab.gridnav import (
    EpisodeError,
    WorldGenerationError,
    WorldRegistry,
    generate_suite,
    load_episodes,
    seeds_for_split,
    write_episodes,
)
from navlab.ppo import RLRunResult, train_rl_finetune

from .base import HarnessError

logger = get_logger("harness")

WORLDS_FILE = "worlds.json"
TRAIN_EPISODES_FILE = "train_episodes.jsonl"
VAL_EPISODES_FILE = "val_episodes.jsonl"
DEMOS_FILE = "demos.jsonl"

# ablation 행 이름 → finetuning 모드
ABLATION_ROWS = {
    "naive": ScheduleMode.NAIVE,
    "critic-learning": ScheduleMode.CRITIC_ONLY_THEN_JUMP,
    "critic-decay": ScheduleMode.CRITIC_DECAY_ONLY,
    "actor-warmup": ScheduleMode.ACTOR_WARMUP_ONLY,
    "pirlnav": ScheduleMode.PIRLNAV,
}


def parse_mode(text: str) -> ScheduleMode:
    """
    CLI 모드 문자열 해석

    'pirlnav', 'naive', 'vpt' 또는 'ablation:<row>' (row 는 ABLATION_ROWS 의 키)

    Raises:
        HarnessError: 알 수 없는 모드
    """
    if text.startswith("ablation:"):
        row = text.split(":", 1)[1]
        if row not in ABLATION_ROWS:
            raise HarnessError(f"알 수 없는 ablation 행: {row} (가능: {', '.join(ABLATION_ROWS)})")
        return ABLATION_ROWS[row]
    try:
        return ScheduleMode(text)
    except ValueError as e:
        raise HarnessError(f"알 수 없는 finetuning 모드: {text}") from e


# World / Episode


def gen_worlds(config: LabConfig, out_dir: Union[str, Path]) -> Path:
    """
    train/val world seed 목록 생성

    world 는 seed 로부터 재생성되므로 seed 목록과 env_params 만 저장합니다.
    모든 world 를 한 번 생성해 생성 실패를 미리 드러냅니다.

    Returns:
        worlds.json 경로

    Raises:
        HarnessError: world 생성 실패
    """
    env, harness = config.env, config.harness
    try:
        train = seeds_for_split(Split.TRAIN, harness.train_worlds, env.val_percent, start=env.seed)
        val = seeds_for_split(Split.VAL, harness.val_worlds, env.val_percent, start=env.seed)
        registry = WorldRegistry(env)
        rooms = [len(registry.get(seed).rooms) for seed in train + val]
    except (EpisodeError, WorldGenerationError) as e:
        raise HarnessError(f"world 생성 실패: {e}") from e

    payload = {
        "env_params": env.model_dump(mode="json"),
        "env_hash": config_hash(env),
        "train_seeds": train,
        "val_seeds": val,
        "mean_rooms": round(sum(rooms) / len(rooms), 6),
    }
    path = Path(out_dir) / WORLDS_FILE
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    logger.info("world %d개 (train %d, val %d) → %s", len(rooms), len(train), len(val), path)
    return path


def load_worlds(world_dir: Union[str, Path]) -> Tuple[EnvParams, List[int], List[int]]:
    """worlds.json → (env_params, train_seeds, val_seeds)"""
    path = Path(world_dir) / WORLDS_FILE
    try:
        payload = json.loads(path.read_text("utf-8"))
        env = EnvParams.model_validate(payload["env_params"])
        return env, list(payload["train_seeds"]), list(payload["val_seeds"])
    except (OSError, ValueError, KeyError) as e:
        raise HarnessError(f"{path}: world 목록을 읽을 수 없습니다 ({e})") from e


def world_registry(world_dir: Union[str, Path]) -> WorldRegistry:
    env, train, val = load_worlds(world_dir)
    return WorldRegistry(env, known_seeds=train + val)


def gen_episodes(config: LabConfig, world_dir: Union[str, Path]) -> Tuple[Path, Path]:
    """
    world_dir 에 train/val 에피소드 파일 생성

    val 에피소드는 val world 에 고르게 나눠 harness.val_episodes 개를 만듭니다.

    Raises:
        HarnessError: env_params 가 설정과 다르거나 에피소드 생성 실패
    """
    world_dir = Path(world_dir)
    env, train_seeds, val_seeds = load_worlds(world_dir)
    if env != config.env:
        raise HarnessError(f"{world_dir}: world 의 env_params 가 설정과 다릅니다")
    registry = WorldRegistry(env, known_seeds=train_seeds + val_seeds)
    harness = config.harness
    per_val_world = math.ceil(harness.val_episodes / len(val_seeds))
    try:
        train = generate_suite(registry, train_seeds, harness.train_episodes_per_world, env.seed)
        val = generate_suite(registry, val_seeds, per_val_world, env.seed + 1)
    except EpisodeError as e:
        raise HarnessError(f"에피소드 생성 실패: {e}") from e
    val = val[: harness.val_episodes]
    train_path = write_episodes(train, env, world_dir / TRAIN_EPISODES_FILE)
    val_path = write_episodes(val, env, world_dir / VAL_EPISODES_FILE)
    logger.info("에피소드 train %d, val %d", len(train), len(val))
    return train_path, val_path


def read_episodes(world_dir: Union[str, Path], split: Split) -> List[Episode]:
    name = TRAIN_EPISODES_FILE if split == Split.TRAIN else VAL_EPISODES_FILE
    try:
        _, episodes = load_episodes(Path(world_dir) / name)
    except EpisodeError as e:
        raise HarnessError(str(e)) from e
    return episodes


# Demo


def gen_demos(
    config: LabConfig,
    source: DemoSource,
    world_dir: Union[str, Path],
    out_path: Union[str, Path],
    target_steps: Optional[int] = None,
    show_progress: bool = False,
) -> DemoDataset:
    """train 에피소드로 source 데모 데이터셋을 step 예산까지 생성해 저장"""
    registry = world_registry(world_dir)
    episodes = read_episodes(world_dir, Split.TRAIN)
    demo = config.demo
    try:
        generator = create_generator(source, registry, demo)
        dataset = build_budgeted_dataset(
            generator,
            episodes,
            demo.target_steps if target_steps is None else target_steps,
            seed=demo.seed,
            success_only=demo.success_only,
            show_progress=show_progress,
        )
    except DemoError as e:
        raise HarnessError(f"{source.value} 데모 생성 실패: {e}") from e
    write_dataset(dataset, out_path)
    return dataset


# Training


def load_demo_dataset(
    path: Union[str, Path], subsample_steps: Optional[int], seed: int
) -> DemoDataset:
    """데이터셋 로드 (subsample_steps 가 있으면 seed 고정 중첩 부분집합)"""
    try:
        dataset = read_dataset(path)
        if subsample_steps is not None:
            dataset = subsample_nested(dataset, [subsample_steps], seed)[0]
    except (DatasetCorruptionError, DemoError) as e:
        raise HarnessError(f"{path}: {e}") from e
    return dataset


def run_bc(
    config: LabConfig,
    dataset_path: Union[str, Path],
    world_dir: Union[str, Path],
    out_dir: Union[str, Path],
    subsample_steps: Optional[int] = None,
    show_progress: bool = False,
) -> BCRunResult:
    """데모 데이터셋으로 BC 학습"""
    dataset = load_demo_dataset(dataset_path, subsample_steps, config.demo.seed)
    try:
        return train_bc(
            dataset,
            config.bc,
            world_registry(world_dir),
            out_dir,
            policy_config=config.policy,
            show_progress=show_progress,
        )
    except TrainingError as e:
        raise HarnessError(f"BC 학습 실패: {e}") from e


def run_rl(
    config: LabConfig,
    init_checkpoint: Union[str, Path],
    world_dir: Union[str, Path],
    out_dir: Union[str, Path],
    mode: ScheduleMode,
    fixed_lr: Optional[float] = None,
    show_progress: bool = False,
) -> RLRunResult:
    """
    BC 체크포인트에서 mode 로 RL finetuning

    Args:
        fixed_lr: naive / critic-only-then-jump 모드의 고정 lr override

    Raises:
        HarnessError: 체크포인트 불일치 등 학습 시작 실패
    """
    update = {"mode": mode}
    if fixed_lr is not None:
        update["fixed_lr"] = fixed_lr
    schedule = config.schedule.model_copy(update=update)
    try:
        return train_rl_finetune(
            init_checkpoint,
            config.ppo,
            schedule,
            world_registry(world_dir),
            read_episodes(world_dir, Split.TRAIN),
            out_dir,
            policy_config=config.policy,
            vpt=config.vpt if mode is ScheduleMode.VPT else None,
            show_progress=show_progress,
        )
    except TrainingError as e:
        raise HarnessError(f"RL finetuning 실패 ({mode.value}): {e}") from e


# Evaluation


def run_eval(
    config: LabConfig,
    checkpoint: Union[str, Path],
    world_dir: Union[str, Path],
    out_dir: Union[str, Path],
    episode_ids: Optional[Iterable[str]] = None,
    show_progress: bool = False,
) -> EvalResult:
    """
    val 에피소드 (또는 그 부분집합) 에서 체크포인트 평가 후 저장

    Raises:
        HarnessError: 평가할 에피소드가 없거나 평가 실패
    """
    episodes = read_episodes(world_dir, Split.VAL)
    if episode_ids is not None:
        episodes = select_episodes(episodes, set(episode_ids))
    episodes = episodes[: config.eval.episodes]
    if not episodes:
        raise HarnessError(f"{out_dir}: 평가할 에피소드가 없습니다")
    try:
        result = evaluate_checkpoint(
            checkpoint,
            episodes,
            world_registry(world_dir),
            config.eval,
            policy_config=config.policy,
            show_progress=show_progress,
        )
    except EvaluationError as e:
        raise HarnessError(f"평가 실패: {e}") from e
    write_eval_output(result, out_dir)
    return result
