"""
데이터셋 크기 스케일링 sweep
"""

from pathlib import Path
from typing import Optional, Sequence, Union

from common.config import DemoSource, LabConfig
from common.models import ScalingCurve

from .base import HarnessError
from .recipes import SOURCE_TAGS, scaling_recipe
from .report import REPORT_DIR, build_report, collect_run_dirs, write_report


def run_scaling_sweep(
    sizes: Sequence[int],
    source: DemoSource,
    config: LabConfig,
    out_dir: Union[str, Path],
    seeds: Optional[Sequence[int]] = None,
    target: str = "bc_success",
    max_parallel: int = 1,
    show_progress: bool = False,
) -> ScalingCurve:
    """
    크기마다 BC → RL-FT → eval 을 실행하고 포화 곡선 적합

    <out>/<source>-scaling/ 아래에 seed 별 run 과 report 를 남깁니다.

    Args:
        sizes: 데이터셋 크기 (step, 엄격히 증가)
        source: 데모 source
        config: 기본 설정
        out_dir: 출력 루트
        seeds: seed 목록 (기본값: harness.seeds)
        target: 반환할 곡선의 적합 대상 (bc_success 또는 rlft_success)

    Returns:
        ScalingCurve (크기별 점, 적합 파라미터, 잔차)

    Raises:
        HarnessError: 스테이지 실패 또는 적합 실패
    """
    tag = next(key for key, value in SOURCE_TAGS.items() if value == source)
    workflow = scaling_recipe(f"{tag}-scaling", tag, sizes)
    results = workflow.run(
        config, out_dir, seeds=seeds, max_parallel=max_parallel, show_progress=show_progress
    )
    errors = [error for result in results for error in result["errors"]]
    if errors:
        raise HarnessError(f"{workflow.name}: 스테이지 실패 {len(errors)}건 ({errors[0]})")

    recipe_dir = Path(out_dir) / workflow.name
    report = build_report(collect_run_dirs(recipe_dir))
    write_report(report, recipe_dir / REPORT_DIR)
    for curve in report["curves"]:
        if curve.get("target") != target:
            continue
        if "error" in curve:
            raise HarnessError(f"{workflow.name}: {curve['error']}")
        return ScalingCurve.model_validate(curve)
    raise HarnessError(f"{workflow.name}: {target} 곡선이 없습니다")
