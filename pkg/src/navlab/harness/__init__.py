"""
Experiment harness

recipe 스테이지 DAG 실행, 완료 manifest, 체크포인트 매칭, 스케일링 곡선, report
"""

from .base import HarnessError, RunContext, Stage, apply_overrides
from .checks import acceptance_checks, beats_with_margin
from .manifest import StageManifest, stage_digest
from .matching import (
    MatchedCheckpoint,
    ProbePoint,
    matched_target,
    probe_trace,
    select_matched_checkpoints,
)
from .pipeline import (
    ABLATION_ROWS,
    gen_demos,
    gen_episodes,
    gen_worlds,
    load_worlds,
    parse_mode,
    run_bc,
    run_eval,
    run_rl,
)
from .recipes import (
    RECIPE_ALIASES,
    RECIPES,
    create_recipe_workflow,
    naive_lr_sweep,
    scaling_recipe,
)
from .report import (
    ReportError,
    build_report,
    collect_run_dirs,
    generate_report,
    mean_stderr,
    write_report,
)
from .scaling import SATURATING_FORM, fit_saturating, scaling_curve
from .stages import BCStage, DemoStage, EvalStage, MatchedEvalStage, RLStage, WorldStage
from .sweep import run_scaling_sweep
from .workflow import RecipeWorkflow

__all__ = [
    # Workflow
    "RecipeWorkflow",
    "RunContext",
    "Stage",
    "StageManifest",
    "stage_digest",
    "apply_overrides",
    # Stages
    "WorldStage",
    "DemoStage",
    "BCStage",
    "RLStage",
    "EvalStage",
    "MatchedEvalStage",
    # Pipeline
    "ABLATION_ROWS",
    "parse_mode",
    "gen_worlds",
    "gen_episodes",
    "load_worlds",
    "gen_demos",
    "run_bc",
    "run_rl",
    "run_eval",
    # Recipes
    "RECIPES",
    "RECIPE_ALIASES",
    "create_recipe_workflow",
    "scaling_recipe",
    "naive_lr_sweep",
    # Matching / scaling
    "ProbePoint",
    "MatchedCheckpoint",
    "probe_trace",
    "matched_target",
    "select_matched_checkpoints",
    "SATURATING_FORM",
    "fit_saturating",
    "scaling_curve",
    "run_scaling_sweep",
    # Report
    "build_report",
    "write_report",
    "generate_report",
    "collect_run_dirs",
    "mean_stderr",
    "acceptance_checks",
    "beats_with_margin",
    # Errors
    "HarnessError",
    "ReportError",
]
