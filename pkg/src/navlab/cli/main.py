"""
navlab CLI

world/episode/demo 생성, BC 와 RL finetuning, 평가, recipe 실행, report 를 서브커맨드로 제공합니다.
설정 파일이 잘못되면 계산을 시작하기 전에 필드 경로가 포함된 메시지와 함께 nonzero 로 종료합니다.
"""

from pathlib import Path
from typing import List, Optional

import click

from common.config import ConfigError, DemoSource, LabConfig, data_dir, load_config
from common.utils import console, print_failure, print_success
from navlab.harness import (
    RECIPE_ALIASES,
    RECIPES,
    HarnessError,
    ReportError,
    apply_overrides,
    create_recipe_workflow,
    gen_demos,
    gen_episodes,
    gen_worlds,
    generate_report,
    parse_mode,
    run_bc,
    run_eval,
    run_rl,
)
from navlab.harness.base import SEEDED_FIELDS

config_option = click.option(
    "--config", "config_path", type=click.Path(dir_okay=False), default=None, help="JSON 설정 파일"
)
seed_option = click.option(
    "--seed", type=int, default=None, help="학습/평가 seed (bc, ppo, demo, eval)"
)
worlds_option = click.option(
    "--worlds",
    "world_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="gen-worlds 출력 디렉토리 (기본값: <data>/worlds)",
)


def _config(config_path: Optional[str], seed: Optional[int] = None, **overrides) -> LabConfig:
    """설정 로드 + seed / override 적용 (실패 시 ClickException)"""
    try:
        config = load_config(config_path)
        values = {name: seed for name in SEEDED_FIELDS} if seed is not None else {}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return apply_overrides(config, values) if values else config
    except (ConfigError, HarnessError) as e:
        raise click.ClickException(f"설정 오류\n{e}") from e


def _worlds(world_dir: Optional[str]) -> Path:
    return Path(world_dir) if world_dir else data_dir() / "worlds"


def _seeds(text: Optional[str], config: LabConfig) -> List[int]:
    """'3' → [0, 1, 2], '0,4,7' → [0, 4, 7], 없으면 harness.seeds"""
    if text is None:
        return list(config.harness.seeds)
    try:
        if "," in text:
            return [int(part) for part in text.split(",") if part.strip()]
        return list(range(int(text)))
    except ValueError as e:
        raise click.BadParameter(f"seed 개수 또는 쉼표 목록이어야 합니다: {text}") from e


@click.group()
@click.version_option(package_name="objectnav-bc-rl-lab")
def cli() -> None:
    """desk-scale ObjectNav BC → RL finetuning 실험실"""


@cli.command("gen-worlds")
@config_option
@click.option("--out", type=click.Path(file_okay=False), default=None, help="출력 디렉토리")
def gen_worlds_cmd(config_path: Optional[str], out: Optional[str]) -> None:
    """train/val world seed 목록 생성"""
    config = _config(config_path)
    try:
        path = gen_worlds(config, _worlds(out))
    except HarnessError as e:
        raise click.ClickException(str(e)) from e
    print_success(f"worlds → {path}")


@cli.command("gen-episodes")
@config_option
@worlds_option
def gen_episodes_cmd(config_path: Optional[str], world_dir: Optional[str]) -> None:
    """world 디렉토리에 train/val 에피소드 생성"""
    config = _config(config_path)
    try:
        train, val = gen_episodes(config, _worlds(world_dir))
    except HarnessError as e:
        raise click.ClickException(str(e)) from e
    print_success(f"episodes → {train}, {val}")


@cli.command("gen-demos")
@config_option
@seed_option
@worlds_option
@click.option("--source", type=click.Choice(["sp", "fe", "hd"]), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="데이터셋 파일")
@click.option("--steps", type=int, default=None, help="step 예산 (기본값: demo.target_steps)")
@click.option("--progress/--no-progress", default=True)
def gen_demos_cmd(
    config_path: Optional[str],
    seed: Optional[int],
    world_dir: Optional[str],
    source: str,
    out: str,
    steps: Optional[int],
    progress: bool,
) -> None:
    """source 데모 데이터셋 생성"""
    config = _config(config_path, seed)
    try:
        demo_source = DemoSource.from_cli(source)
        dataset = gen_demos(
            config, demo_source, _worlds(world_dir), out, steps, show_progress=progress
        )
    except HarnessError as e:
        raise click.ClickException(str(e)) from e
    name = dataset.header.source.value
    print_success(f"{name}: 데모 {len(dataset)}개, {dataset.total_steps} step → {out}")


@cli.command("train-bc")
@config_option
@seed_option
@worlds_option
@click.option("--demos", type=click.Path(dir_okay=False, exists=True), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--steps", type=int, default=None, help="bc.total_steps override")
@click.option("--progress/--no-progress", default=True)
def train_bc_cmd(
    config_path: Optional[str],
    seed: Optional[int],
    world_dir: Optional[str],
    demos: str,
    out: str,
    steps: Optional[int],
    progress: bool,
) -> None:
    """BC 사전학습"""
    config = _config(config_path, seed, **{"bc.total_steps": steps})
    try:
        result = run_bc(config, demos, _worlds(world_dir), out, show_progress=progress)
    except HarnessError as e:
        raise click.ClickException(str(e)) from e
    print_success(f"BC {result.steps} step, 체크포인트 {len(result.checkpoints)}개 → {out}")


@cli.command("train-rl")
@config_option
@seed_option
@worlds_option
@click.option(
    "--init", "init_checkpoint", type=click.Path(dir_okay=False, exists=True), required=True
)
@click.option(
    "--mode",
    default="pirlnav",
    show_default=True,
    help="pirlnav | naive | vpt | ablation:<row> (naive, critic-learning, critic-decay, "
    "actor-warmup, pirlnav)",
)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--steps", type=int, default=None, help="ppo.total_steps override")
@click.option("--progress/--no-progress", default=True)
def train_rl_cmd(
    config_path: Optional[str],
    seed: Optional[int],
    world_dir: Optional[str],
    init_checkpoint: str,
    mode: str,
    out: str,
    steps: Optional[int],
    progress: bool,
) -> None:
    """BC 체크포인트에서 RL finetuning"""
    config = _config(config_path, seed, **{"ppo.total_steps": steps})
    try:
        schedule_mode = parse_mode(mode)
        result = run_rl(
            config, init_checkpoint, _worlds(world_dir), out, schedule_mode, show_progress=progress
        )
    except HarnessError as e:
        raise click.ClickException(str(e)) from e
    print_success(f"RL-FT ({schedule_mode.value}) {result.steps} step → {out}")


@cli.command("eval")
@config_option
@seed_option
@worlds_option
@click.option("--checkpoint", type=click.Path(dir_okay=False, exists=True), required=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--progress/--no-progress", default=True)
def eval_cmd(
    config_path: Optional[str],
    seed: Optional[int],
    world_dir: Optional[str],
    checkpoint: str,
    out: str,
    progress: bool,
) -> None:
    """val 에피소드에서 체크포인트 평가"""
    config = _config(config_path, seed)
    try:
        result = run_eval(config, checkpoint, _worlds(world_dir), out, show_progress=progress)
    except HarnessError as e:
        raise click.ClickException(str(e)) from e
    summary = result.summary
    print_success(f"success {summary.success:.3f}, SPL {summary.spl:.3f} (n={summary.n}) → {out}")


@cli.command("experiment")
@click.argument("recipe", type=click.Choice(sorted([*RECIPES, *RECIPE_ALIASES])))
@config_option
@click.option("--seeds", default=None, help="seed 개수 (예: 3) 또는 쉼표 목록 (예: 0,4,7)")
@click.option("--out", type=click.Path(file_okay=False), default="runs", show_default=True)
@click.option("--parallel", type=int, default=1, show_default=True, help="동시에 실행할 seed 수")
@click.option("--progress/--no-progress", default=False)
def experiment_cmd(
    recipe: str,
    config_path: Optional[str],
    seeds: Optional[str],
    out: str,
    parallel: int,
    progress: bool,
) -> None:
    """recipe 실행 (<out>/<recipe>/<seed>/, 완료된 스테이지는 건너뜀)"""
    config = _config(config_path)
    seed_list = _seeds(seeds, config)
    try:
        workflow = create_recipe_workflow(recipe, config)
        results = workflow.run(
            config, out, seeds=seed_list, max_parallel=parallel, show_progress=progress
        )
    except HarnessError as e:
        raise click.ClickException(str(e)) from e

    console.print(workflow.get_summary(results), markup=False, highlight=False)
    if not all(r["success"] for r in results):
        print_failure(f"{workflow.name}: 실패한 스테이지가 있습니다")
        raise SystemExit(1)
    print_success(f"{workflow.name} 완료 → {Path(out) / workflow.name}")


@cli.command("report")
@click.option(
    "--run", "run_dir", type=click.Path(), required=True, help="recipe 또는 seed run 디렉토리"
)
@click.option("--out", type=click.Path(file_okay=False), default=None, help="기본값: <run>/report")
def report_cmd(run_dir: str, out: Optional[str]) -> None:
    """seed 별 결과를 평균 ± 표준오차 표와 JSON 으로 집계"""
    try:
        written = generate_report(run_dir, out)
    except (ReportError, HarnessError) as e:
        raise click.ClickException(str(e)) from e
    for path in written:
        print_success(str(path))


if __name__ == "__main__":
    cli()
