"""
에피소드 평가 실행기

평가 에피소드를 controller 로 끝까지 실행하고 EvalRecord / EvalSummary 를 만듭니다.
에피소드별 rng 는 (seed, episode_id) 로만 정해지므로 worker 수와 무관하게 결과가 같습니다.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from common.config import EvalConfig, PolicyConfig
from common.models import EvalRecord, EvalSummary, Episode
from common.utils import (
    JsonlError,
    atomic_write_text,
    get_logger,
    progress,
    read_jsonl,
    write_jsonl,
)
from navlab.demos import episode_rng
from navlab.gridnav import EnvError, GridNavEnv, WorldRegistry
from navlab.policy import PolicyError, PolicyParams, load_policy

from .controllers import Controller, PolicyController
from .metrics import EvaluationError, summarize, tag_failure

logger = get_logger("evaluation")

RECORDS_FILE = "records.jsonl"
SUMMARY_FILE = "summary.json"


@dataclass
class EvalResult:
    """평가 결과 (레코드는 입력 에피소드 순서)"""

    records: List[EvalRecord]
    summary: EvalSummary

    def by_episode(self) -> dict:
        return {r.episode_id: r for r in self.records}


def run_episode(
    controller: Controller,
    episode: Episode,
    registry: WorldRegistry,
    rng: np.random.Generator,
    loop_threshold: int = 4,
) -> EvalRecord:
    """
    에피소드 하나를 종료까지 실행

    Args:
        controller: 평가 대상
        episode: 평가 에피소드
        registry: world registry
        rng: 에피소드 전용 rng
        loop_threshold: LOOPING 태그 임계값

    Returns:
        EvalRecord (failure_tag 포함)

    Raises:
        EvaluationError: 에피소드가 world 와 맞지 않을 때
    """
    env = GridNavEnv(registry)
    try:
        obs = env.reset(episode)
    except EnvError as e:
        raise EvaluationError(f"{episode.episode_id}: {e}") from e

    planner = controller.planner(env.world, episode, rng)
    while not env.done:
        obs = env.step(planner.act(env, obs)).obs

    record = EvalRecord(
        episode_id=episode.episode_id,
        success=env.last_success,
        path_len=env.path_len,
        geodesic_len=episode.geodesic_len,
        steps=env.steps,
        goal_ever_in_view=env.goal_ever_in_view,
        final_distance_to_goal=env.final_distance,
        visit_histogram={f"{r},{c}": n for (r, c), n in sorted(env.visits.items())},
    )
    tag = tag_failure(record, registry.params.success_radius, loop_threshold)
    return record.model_copy(update={"failure_tag": tag})


def evaluate(
    controller: Controller,
    episodes: Sequence[Episode],
    registry: WorldRegistry,
    config: Optional[EvalConfig] = None,
    show_progress: bool = False,
) -> EvalResult:
    """
    에피소드 목록 평가

    Args:
        controller: 평가 대상
        episodes: 평가 에피소드 (앞에서 config.episodes 개만 사용)
        registry: world registry
        config: 평가 설정 (기본값: EvalConfig())
        show_progress: tqdm 진행 막대 표시

    Returns:
        EvalResult

    Raises:
        EvaluationError: 에피소드가 비어 있을 때
    """
    config = config or EvalConfig()
    available = list(episodes)
    selected = available[: config.episodes]
    if not selected:
        raise EvaluationError("평가할 에피소드가 없습니다")
    if len(available) > len(selected):
        logger.info(
            "%s: 에피소드 %d 개 중 앞의 %d 개만 평가합니다",
            controller.name,
            len(available),
            len(selected),
        )

    def run(episode: Episode) -> EvalRecord:
        return run_episode(
            controller, episode, registry, episode_rng(config.seed, episode), config.loop_threshold
        )

    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        records = list(
            progress(
                executor.map(run, selected),
                desc=f"eval[{controller.name}]",
                total=len(selected),
                enabled=show_progress,
            )
        )

    summary = summarize(records, mode=config.mode)
    logger.info(
        "%s: success %.3f, SPL %.3f (n=%d)", controller.name, summary.success, summary.spl, summary.n
    )
    return EvalResult(records=records, summary=summary)


def evaluate_checkpoint(
    path: Union[str, Path],
    episodes: Sequence[Episode],
    registry: WorldRegistry,
    config: Optional[EvalConfig] = None,
    policy_config: Optional[PolicyConfig] = None,
    show_progress: bool = False,
) -> EvalResult:
    """
    정책 체크포인트 평가

    Raises:
        EvaluationError: 체크포인트 로드 실패 또는 구조 불일치
    """
    config = config or EvalConfig()
    try:
        params, meta = load_policy(path, policy_config)
    except PolicyError as e:
        raise EvaluationError(str(e)) from e
    controller = PolicyController(params, mode=config.mode, name=f"{meta.phase}@{meta.step}")
    return evaluate(controller, episodes, registry, config, show_progress)


def success_probe(
    params: PolicyParams,
    registry: WorldRegistry,
    episodes: Sequence[Episode],
    mode: str = "argmax",
    workers: int = 1,
) -> float:
    """학습 중 체크포인트마다 쓰는 빠른 성공률 측정 (에피소드가 없으면 nan)"""
    if not episodes:
        return float("nan")
    config = EvalConfig(mode=mode, episodes=len(episodes), workers=workers)
    result = evaluate(PolicyController(params, mode=mode, name="probe"), episodes, registry, config)
    return result.summary.success


def write_eval_output(result: EvalResult, out_dir: Union[str, Path]) -> Path:
    """
    평가 결과 저장

    out_dir/records.jsonl (header + 에피소드별 레코드) 과 out_dir/summary.json 을 씁니다.
    """
    out_dir = Path(out_dir)
    header = {"kind": "eval_records", "n": result.summary.n, "mode": result.summary.mode}
    write_jsonl(out_dir / RECORDS_FILE, header, result.records)
    atomic_write_text(
        out_dir / SUMMARY_FILE,
        json.dumps(result.summary.model_dump(mode="json"), sort_keys=True, indent=2) + "\n",
    )
    return out_dir


def load_eval_output(out_dir: Union[str, Path]) -> EvalResult:
    """
    write_eval_output 결과 로드

    Raises:
        EvaluationError: 파일이 없거나 손상되었을 때
    """
    out_dir = Path(out_dir)
    try:
        _, records = read_jsonl(out_dir / RECORDS_FILE, EvalRecord)
        summary = EvalSummary.model_validate_json((out_dir / SUMMARY_FILE).read_text("utf-8"))
    except (JsonlError, OSError, ValueError) as e:
        raise EvaluationError(f"{out_dir}: 평가 결과를 읽을 수 없습니다 ({e})") from e
    if len(records) != summary.n:
        raise EvaluationError(f"{out_dir}: 레코드 {len(records)} 개, summary n={summary.n}")
    return EvalResult(records=records, summary=summary)
