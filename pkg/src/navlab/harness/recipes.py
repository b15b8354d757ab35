"""
사전 정의된 실험 recipe

각 recipe 는 표/그림 하나를 desk-scale 로 재현하는 스테이지 DAG 입니다.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Sequence

from common.config import DemoSource, LabConfig, ScheduleMode

from .base import HarnessError
from .pipeline import ABLATION_ROWS
from .stages import (
    BCStage,
    DemoStage,
    EvalStage,
    MatchedEvalStage,
    RLStage,
    WorldStage,
)
from .workflow import RecipeWorkflow

SOURCE_TAGS = {"sp": DemoSource.SP, "fe": DemoSource.FE, "hd": DemoSource.HD_SURROGATE}

# adversarial split 이름 → (유리한 쪽, 불리한 쪽)
ADVERSARIAL_SPLITS = {"sp-favoring": ("sp", "hd"), "hd-favoring": ("hd", "sp")}


def _with_demos(workflow: RecipeWorkflow, tags: Iterable[str], target_steps=None) -> RecipeWorkflow:
    workflow.add_stage(WorldStage())
    for tag in tags:
        workflow.add_stage(DemoStage(f"demos-{tag}", SOURCE_TAGS[tag], target_steps=target_steps))
    return workflow


def _add_bc(workflow: RecipeWorkflow, tag: str, size=None, evaluate: bool = True) -> str:
    name = f"bc-{tag}" if size is None else f"bc-{tag}-{size}"
    workflow.add_stage(BCStage(name, demos=f"demos-{tag}", size=size, source=SOURCE_TAGS[tag]))
    if evaluate:
        workflow.add_stage(EvalStage(f"eval-{name}", target=name))
    return name


def _add_rl(
    workflow: RecipeWorkflow,
    name: str,
    init: str,
    mode: ScheduleMode,
    evaluate: bool = True,
    **kwargs,
) -> str:
    workflow.add_stage(RLStage(name, init=init, mode=mode, **kwargs))
    if evaluate:
        workflow.add_stage(EvalStage(f"eval-{name}", target=name))
    return name


def finetune_ablation(config: LabConfig) -> RecipeWorkflow:
    """HD BC 초기화에서 finetuning ablation 6행 (BC, naive, 중간 3단계, 전체 스케줄)"""
    workflow = _with_demos(
        RecipeWorkflow("finetune-ablation", "RL finetuning ablation (BC 행 + 모드 5개)"), ["hd"]
    )
    bc = _add_bc(workflow, "hd")
    for row, mode in ABLATION_ROWS.items():
        _add_rl(workflow, f"rl-{row}", bc, mode, row=row)
    return workflow


def demo_sources(config: LabConfig) -> RecipeWorkflow:
    """SP / FE / HD 데모로 같은 step 예산의 BC, 이어서 RL-FT"""
    workflow = _with_demos(
        RecipeWorkflow("demo-sources", "데모 source 별 BC → RL-FT"), SOURCE_TAGS
    )
    for tag in SOURCE_TAGS:
        bc = _add_bc(workflow, tag)
        _add_rl(workflow, f"rl-{tag}", bc, ScheduleMode.PIRLNAV)
    return workflow


def vpt_comparison(config: LabConfig) -> RecipeWorkflow:
    workflow = _with_demos(
        RecipeWorkflow("vpt-comparison", "2단계 스케줄 vs KL 패널티 finetuning"), ["hd"]
    )
    bc = _add_bc(workflow, "hd")
    _add_rl(workflow, "rl-pirlnav", bc, ScheduleMode.PIRLNAV, row="pirlnav")
    _add_rl(workflow, "rl-vpt", bc, ScheduleMode.VPT, row="vpt")
    return workflow


def naive_drop(config: LabConfig) -> RecipeWorkflow:
    """
    naive finetuning 초반 성능 하락 관찰

    budget 의 5% 지점에 probe 가 남도록 체크포인트 간격을 total_steps / 20 으로 둡니다.
    """
    interval = max(1, config.ppo.total_steps // 20)
    workflow = _with_demos(
        RecipeWorkflow("naive-drop", "naive vs 2단계 finetuning 의 초반 train-success probe"),
        ["hd"],
    )
    bc = _add_bc(workflow, "hd", evaluate=False)
    overrides = {"ppo.checkpoint_interval": interval}
    for row in ("naive", "pirlnav"):
        mode = ABLATION_ROWS[row]
        _add_rl(workflow, f"rl-{row}", bc, mode, evaluate=False, row=row, overrides=overrides)
    return workflow


def matched_bc(config: LabConfig) -> RecipeWorkflow:
    """train-success probe 를 맞춘 SP / FE / HD BC 체크포인트의 val 성능"""
    workflow = _with_demos(
        RecipeWorkflow("matched-bc", "probe 를 맞춘 BC 체크포인트 비교"), SOURCE_TAGS
    )
    group = [_add_bc(workflow, tag, evaluate=False) for tag in SOURCE_TAGS]
    for bc in group:
        workflow.add_stage(MatchedEvalStage(f"matched-{bc}", target=bc, group=group))
    return workflow


def adversarial_splits(config: LabConfig) -> RecipeWorkflow:
    """
    SP / HD BC 정책 쌍으로 만든 adversarial split 에서 BC 와 RL-FT 비교

    split 은 seed 별로 그 seed 의 BC 평가 레코드로 만듭니다.
    """
    workflow = _with_demos(
        RecipeWorkflow("adversarial-splits", "BC 가 불리한 split 에서 RL-FT 의 반전"), ["sp", "hd"]
    )
    targets = []
    for tag in ("sp", "hd"):
        bc = _add_bc(workflow, tag)
        rl = _add_rl(workflow, f"rl-{tag}", bc, ScheduleMode.PIRLNAV, evaluate=False)
        targets.extend([bc, rl])
    for split, (favored, disfavored) in ADVERSARIAL_SPLITS.items():
        for target in targets:
            workflow.add_stage(
                EvalStage(
                    f"eval-{split}-{target}",
                    target=target,
                    split=(f"eval-bc-{favored}", f"eval-bc-{disfavored}"),
                    split_name=split,
                )
            )
    return workflow


def scaling_recipe(name: str, tag: str, sizes: Sequence[int]) -> RecipeWorkflow:
    """
    중첩 데이터셋 크기별 BC → RL-FT → eval

    가장 큰 크기만큼 데모를 한 번 만들고 크기마다 seed 고정 중첩 부분집합으로 학습합니다.
    """
    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])) or not sizes:
        raise HarnessError(f"{name}: 데이터셋 크기는 엄격히 증가해야 합니다: {sizes}")
    workflow = _with_demos(
        RecipeWorkflow(name, f"{SOURCE_TAGS[tag].value} 데이터셋 크기 스케일링"), [tag], sizes[-1]
    )
    for size in sizes:
        bc = _add_bc(workflow, tag, size=size)
        _add_rl(workflow, f"rl-{tag}-{size}", bc, ScheduleMode.PIRLNAV)
    return workflow


def hd_scaling(config: LabConfig) -> RecipeWorkflow:
    return scaling_recipe("hd-scaling", "hd", config.harness.hd_scaling_steps)


def fe_scaling(config: LabConfig) -> RecipeWorkflow:
    return scaling_recipe("fe-scaling", "fe", config.harness.fe_scaling_steps)


def failure_modes(config: LabConfig) -> RecipeWorkflow:
    """BC 와 RL-FT 정책의 실패 유형 히스토그램"""
    workflow = _with_demos(RecipeWorkflow("failure-modes", "실패 유형 태깅"), ["hd"])
    bc = _add_bc(workflow, "hd")
    _add_rl(workflow, "rl-pirlnav", bc, ScheduleMode.PIRLNAV, row="pirlnav")
    return workflow


def naive_lr_sweep(config: LabConfig) -> RecipeWorkflow:
    """naive / critic-learning 행을 harness.naive_lr_candidates 의 각 lr 로 실행 (최고 lr 을 보고)"""
    workflow = _with_demos(
        RecipeWorkflow("naive-lr-sweep", "naive / critic-learning 행의 고정 lr 탐색"), ["hd"]
    )
    bc = _add_bc(workflow, "hd", evaluate=False)
    for row in ("naive", "critic-learning"):
        for index, lr in enumerate(config.harness.naive_lr_candidates):
            _add_rl(workflow, f"rl-{row}-lr{index}", bc, ABLATION_ROWS[row], row=row, lr=lr)
    return workflow


@dataclass(frozen=True)
class RecipeDefinition:
    description: str
    build: Callable[[LabConfig], RecipeWorkflow]


RECIPES: Dict[str, RecipeDefinition] = {
    "finetune-ablation": RecipeDefinition("finetuning ablation 6행", finetune_ablation),
    "demo-sources": RecipeDefinition("데모 source 별 BC → RL-FT", demo_sources),
    "vpt-comparison": RecipeDefinition("2단계 스케줄 vs KL 패널티", vpt_comparison),
    "naive-drop": RecipeDefinition("naive finetuning 초반 하락", naive_drop),
    "matched-bc": RecipeDefinition("probe 를 맞춘 BC 체크포인트", matched_bc),
    "adversarial-splits": RecipeDefinition("adversarial split 반전", adversarial_splits),
    "hd-scaling": RecipeDefinition("HD 데이터셋 크기 스케일링", hd_scaling),
    "fe-scaling": RecipeDefinition("FE 데이터셋 크기 스케일링", fe_scaling),
    "failure-modes": RecipeDefinition("실패 유형 히스토그램", failure_modes),
    "naive-lr-sweep": RecipeDefinition("naive 행 lr 탐색", naive_lr_sweep),
}

# 이전 명령 이름. 같은 워크플로우를 만들고 결과는 원래 이름 디렉토리에 저장됨
RECIPE_ALIASES: Dict[str, str] = {
    "table2-ablation": "finetune-ablation",
    "table3-demo-sources": "demo-sources",
}


def create_recipe_workflow(name: str, config: LabConfig) -> RecipeWorkflow:
    """
    이름으로 recipe 워크플로우 생성

    Raises:
        HarnessError: 알 수 없는 recipe
    """
    definition = RECIPES.get(RECIPE_ALIASES.get(name, name))
    if definition is None:
        known = ", ".join([*RECIPES, *RECIPE_ALIASES])
        raise HarnessError(f"알 수 없는 recipe: {name} (가능: {known})")
    return definition.build(config)
