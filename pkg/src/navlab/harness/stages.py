"""
Recipe 스테이지 구현

각 스테이지는 pipeline 함수 하나를 감싸고, 의존 스테이지의 산출물 경로를 ctx.artifacts 에서 찾습니다.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from common.config import DemoSource, ScheduleMode
from common.models import StageKind
from common.utils import atomic_write_text
from navlab.evaluation import build_adversarial_split, load_eval_output

from .base import HarnessError, RunContext, Stage
from .matching import matched_target, select_matched_checkpoints
from .pipeline import (
    DEMOS_FILE,
    TRAIN_EPISODES_FILE,
    VAL_EPISODES_FILE,
    WORLDS_FILE,
    gen_demos,
    gen_episodes,
    gen_worlds,
    run_bc,
    run_eval,
    run_rl,
)

WORLD_STAGE = "world"
RUN_OUTPUTS = ["run.json", "metrics.csv"]
EVAL_OUTPUTS = ["records.jsonl", "summary.json"]


def _deps(*names: Optional[str]) -> List[str]:
    out: List[str] = []
    for name in names:
        if name is not None and name not in out:
            out.append(name)
    return out


class WorldStage(Stage):
    """world seed 목록과 train/val 에피소드"""

    kind = StageKind.WORLD_GEN
    default_outputs = [WORLDS_FILE, TRAIN_EPISODES_FILE, VAL_EPISODES_FILE]

    def __init__(self, name: str = WORLD_STAGE):
        super().__init__(name)

    def execute(self, ctx: RunContext) -> Dict[str, Any]:
        config = self.stage_config(ctx)
        out = ctx.stage_dir(self.name)
        gen_worlds(config, out)
        gen_episodes(config, out)
        return {"world_dir": str(out)}


class DemoStage(Stage):
    """
    source 데모를 step 예산까지 생성

    source 끼리 같은 예산으로 비교해야 하므로 에피소드가 모자라 예산에 못 미치면 스테이지가 실패합니다.
    """

    kind = StageKind.DEMO_GEN
    default_outputs = [DEMOS_FILE]

    def __init__(
        self,
        name: str,
        source: DemoSource,
        target_steps: Optional[int] = None,
        world: str = WORLD_STAGE,
    ):
        super().__init__(
            name,
            depends_on=_deps(world),
            source=source.value,
            target_steps=target_steps,
            world=world,
        )

    def execute(self, ctx: RunContext) -> Dict[str, Any]:
        config = self.stage_config(ctx)
        path = ctx.stage_dir(self.name) / DEMOS_FILE
        target = self.params["target_steps"]
        if target is None:
            target = config.demo.target_steps
        dataset = gen_demos(
            config,
            DemoSource(self.params["source"]),
            ctx.artifact(self.params["world"], "world_dir"),
            path,
            target_steps=target,
            show_progress=ctx.show_progress,
        )
        if dataset.total_steps < target:
            raise HarnessError(
                f"{self.name}: train 에피소드가 부족해 예산 {target} step 중 "
                f"{dataset.total_steps} step 만 수집했습니다"
            )
        return {"dataset": str(path), "total_steps": dataset.total_steps}


class BCStage(Stage):
    """데모 데이터셋 (또는 그 중첩 부분집합) 으로 BC 사전학습"""

    kind = StageKind.BC
    default_outputs = RUN_OUTPUTS

    def __init__(
        self,
        name: str,
        demos: str,
        size: Optional[int] = None,
        source: Optional[DemoSource] = None,
        world: str = WORLD_STAGE,
    ):
        super().__init__(
            name,
            depends_on=_deps(world, demos),
            demos=demos,
            size=size,
            source=None if source is None else source.value,
            world=world,
        )

    def execute(self, ctx: RunContext) -> Dict[str, Any]:
        config = self.stage_config(ctx)
        out = ctx.stage_dir(self.name)
        result = run_bc(
            config,
            ctx.artifact(self.params["demos"], "dataset"),
            ctx.artifact(self.params["world"], "world_dir"),
            out,
            subsample_steps=self.params["size"],
            show_progress=ctx.show_progress,
        )
        return {
            "run_dir": str(out),
            "checkpoint": str(result.checkpoints[-1]),
            "steps": result.steps,
        }


class RLStage(Stage):
    """BC 체크포인트에서 mode 로 RL finetuning"""

    kind = StageKind.RL_FT
    default_outputs = RUN_OUTPUTS

    def __init__(
        self,
        name: str,
        init: str,
        mode: ScheduleMode,
        lr: Optional[float] = None,
        row: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None,
        world: str = WORLD_STAGE,
    ):
        super().__init__(
            name,
            depends_on=_deps(world, init),
            overrides=overrides,
            init=init,
            mode=mode.value,
            lr=lr,
            row=row,
            world=world,
        )

    def execute(self, ctx: RunContext) -> Dict[str, Any]:
        config = self.stage_config(ctx)
        out = ctx.stage_dir(self.name)
        result = run_rl(
            config,
            ctx.artifact(self.params["init"], "checkpoint"),
            ctx.artifact(self.params["world"], "world_dir"),
            out,
            ScheduleMode(self.params["mode"]),
            fixed_lr=self.params["lr"],
            show_progress=ctx.show_progress,
        )
        return {
            "run_dir": str(out),
            "checkpoint": str(result.checkpoints[-1]),
            "steps": result.steps,
        }


class EvalStage(Stage):
    """
    학습 스테이지의 마지막 체크포인트 평가

    split=(favored, disfavored) 가 주어지면 두 평가 스테이지의 레코드로 만든
    disfavored 에 불리한 adversarial split 에서만 평가합니다.
    """

    kind = StageKind.EVAL
    default_outputs = EVAL_OUTPUTS

    def __init__(
        self,
        name: str,
        target: str,
        split: Optional[Sequence[str]] = None,
        split_name: Optional[str] = None,
        world: str = WORLD_STAGE,
    ):
        favored, disfavored = split if split is not None else (None, None)
        super().__init__(
            name,
            depends_on=_deps(world, target, favored, disfavored),
            target=target,
            split=None if split is None else [favored, disfavored],
            split_name=split_name,
            world=world,
        )

    def _episode_ids(self, ctx: RunContext) -> Optional[List[str]]:
        if self.params["split"] is None:
            return None
        favored, disfavored = self.params["split"]
        records_a = load_eval_output(ctx.artifact(favored, "eval_dir")).records
        records_b = load_eval_output(ctx.artifact(disfavored, "eval_dir")).records
        return sorted(build_adversarial_split(records_a, records_b))

    def execute(self, ctx: RunContext) -> Dict[str, Any]:
        config = self.stage_config(ctx)
        out = ctx.stage_dir(self.name)
        result = run_eval(
            config,
            ctx.artifact(self.params["target"], "checkpoint"),
            ctx.artifact(self.params["world"], "world_dir"),
            out,
            episode_ids=self._episode_ids(ctx),
            show_progress=ctx.show_progress,
        )
        return {
            "eval_dir": str(out),
            "success": result.summary.success,
            "spl": result.summary.spl,
            "n": result.summary.n,
        }


class MatchedEvalStage(Stage):
    """
    train-success probe 를 맞춘 BC 체크포인트 평가

    group 의 모든 BC run 이 도달하는 probe 목표 (harness.matched_target, 없으면
    run 별 최대 probe 의 최솟값) 에 처음 도달한 target 의 체크포인트를 평가합니다.
    """

    kind = StageKind.EVAL
    default_outputs = EVAL_OUTPUTS + ["matched.json"]

    def __init__(self, name: str, target: str, group: Sequence[str], world: str = WORLD_STAGE):
        super().__init__(
            name,
            depends_on=_deps(world, *group),
            target=target,
            group=list(group),
            world=world,
        )

    def execute(self, ctx: RunContext) -> Dict[str, Any]:
        config = self.stage_config(ctx)
        out = ctx.stage_dir(self.name)
        runs = {name: Path(ctx.artifact(name, "run_dir")) for name in self.params["group"]}
        target = config.harness.matched_target
        if target is None:
            target = matched_target(runs.values())
        selected = select_matched_checkpoints(runs, target)[self.params["target"]]
        result = run_eval(
            config,
            selected.path,
            ctx.artifact(self.params["world"], "world_dir"),
            out,
            show_progress=ctx.show_progress,
        )
        payload = {
            "target": target,
            "checkpoint": selected.path.name,
            "step": selected.step,
            "probe": selected.probe,
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        atomic_write_text(out / "matched.json", text)
        return {
            "eval_dir": str(out),
            "success": result.summary.success,
            "spl": result.summary.spl,
            "n": result.summary.n,
            "matched_step": selected.step,
        }
