"""
Recipe Workflow

스테이지 DAG 를 seed 별로 실행하고, manifest 로 완료된 스테이지를 건너뜁니다.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from common.config import LabConfig, config_hash
from common.models import ExperimentRecipe
from common.utils import atomic_write_text, get_logger

from .base import HarnessError, RunContext, Stage
from .manifest import StageManifest, stage_digest

logger = get_logger("harness")

RUN_FILE = "run.json"
RECIPE_FILE = "recipe.json"


class RecipeWorkflow:
    """
    실험 recipe 워크플로우

    Example:
        workflow = RecipeWorkflow("bc-only")
        workflow.add_stage(WorldStage())
        workflow.add_stage(DemoStage("demos-sp", DemoSource.SP))
        workflow.add_stage(BCStage("bc-sp", demos="demos-sp"))

        results = workflow.run(config, "runs", seeds=[0, 1, 2])
    """

    def __init__(self, name: str, description: str = "", seeds: Optional[Sequence[int]] = None):
        """
        Args:
            name: recipe 이름 (출력 디렉토리 이름)
            description: 설명
            seeds: 기본 seed 목록 (None 이면 harness.seeds)
        """
        self.name = name
        self.description = description
        self.seeds = None if seeds is None else list(seeds)
        self.stages: Dict[str, Stage] = {}

    def add_stage(self, stage: Stage) -> "RecipeWorkflow":
        """
        스테이지 추가

        Returns:
            self (메서드 체이닝용)
        """
        if stage.name in self.stages:
            raise HarnessError(f"{self.name}: 중복된 스테이지 이름 {stage.name}")
        self.stages[stage.name] = stage
        return self

    def recipe(self, seeds: Sequence[int]) -> ExperimentRecipe:
        """선언된 스테이지로 ExperimentRecipe 생성 (DAG 검증)"""
        try:
            return ExperimentRecipe(
                name=self.name,
                description=self.description,
                stages=[stage.spec for stage in self.stages.values()],
                seeds=list(seeds),
            )
        except ValueError as e:
            raise HarnessError(f"{self.name}: 잘못된 recipe ({e})") from e

    def run_dir(self, out_dir: Union[str, Path], seed: int) -> Path:
        return Path(out_dir) / self.name / str(seed)

    def execute(
        self,
        config: LabConfig,
        out_dir: Union[str, Path],
        seed: int,
        stop_on_error: bool = False,
        show_progress: bool = False,
    ) -> Dict[str, Any]:
        """
        seed 하나에 대해 recipe 실행

        실패한 스테이지에 의존하는 스테이지는 실행하지 않고 blocked 로 기록합니다.

        Args:
            config: 기본 설정
            out_dir: 출력 루트 (run 디렉토리는 <out>/<recipe>/<seed>)
            seed: 학습/평가 seed
            stop_on_error: 에러 발생 시 중단 여부 (기본값: False)
            show_progress: tqdm 진행 막대 표시

        Returns:
            {
                "success": bool,
                "seed": int,
                "run_dir": str,
                "stages_executed": int,  # 새로 실행한 스테이지
                "stages_skipped": int,   # manifest 로 건너뛴 스테이지
                "results": List[Dict],   # 스테이지별 결과
                "errors": List[str],
            }

        Raises:
            HarnessError: recipe 가 잘못되었거나, stop_on_error=True 이고 에러 발생 시
        """
        recipe = self.recipe([seed])
        run_dir = self.run_dir(out_dir, seed)
        run_dir.mkdir(parents=True, exist_ok=True)
        ctx = RunContext(
            config=config, recipe=self.name, seed=seed, run_dir=run_dir, show_progress=show_progress
        )

        results: List[Dict[str, Any]] = []
        errors: List[str] = []
        digests: Dict[str, str] = {}
        failed = set()

        with StageManifest(run_dir) as manifest:
            for spec in recipe.topological_order():
                stage = self.stages[spec.name]
                blocked = [d for d in spec.depends_on if d in failed]
                if blocked:
                    failed.add(spec.name)
                    results.append(
                        {
                            "stage": spec.name,
                            "status": "blocked",
                            "digest": None,
                            "artifacts": None,
                            "error": f"의존 스테이지 실패: {', '.join(blocked)}",
                        }
                    )
                    continue

                try:
                    dep_digests = [digests[d] for d in spec.depends_on]
                    digest = stage_digest(stage.fingerprint(ctx), dep_digests)
                    outputs = stage.output_paths(ctx)
                    artifacts = manifest.lookup(spec.name, digest, outputs)
                    if artifacts is not None:
                        status = "skipped"
                        logger.info("[%s/%d] %s: 완료된 스테이지, 건너뜀", self.name, seed, spec.name)
                    else:
                        manifest.invalidate(spec.name)
                        logger.info("[%s/%d] %s 실행", self.name, seed, spec.name)
                        artifacts = stage.execute(ctx)
                        missing = [str(p) for p in outputs if not p.exists()]
                        if missing:
                            raise HarnessError(f"선언된 산출물이 생성되지 않았습니다: {missing}")
                        manifest.record(spec.name, digest, artifacts)
                        status = "done"

                    ctx.artifacts[spec.name] = artifacts
                    digests[spec.name] = digest
                    results.append(
                        {
                            "stage": spec.name,
                            "status": status,
                            "digest": digest,
                            "artifacts": artifacts,
                            "error": None,
                        }
                    )

                except Exception as e:
                    error_msg = f"{spec.name} 실행 실패: {e}"
                    errors.append(error_msg)
                    failed.add(spec.name)
                    logger.error("[%s/%d] %s", self.name, seed, error_msg)
                    results.append(
                        {
                            "stage": spec.name,
                            "status": "failed",
                            "digest": None,
                            "artifacts": None,
                            "error": str(e),
                        }
                    )
                    if stop_on_error:
                        self._write_run_file(config, run_dir, seed, results)
                        raise HarnessError(error_msg) from e

        self._write_run_file(config, run_dir, seed, results)
        return {
            "success": len(errors) == 0,
            "seed": seed,
            "run_dir": str(run_dir),
            "stages_executed": sum(1 for r in results if r["status"] == "done"),
            "stages_skipped": sum(1 for r in results if r["status"] == "skipped"),
            "results": results,
            "errors": errors,
        }

    def _write_run_file(
        self, config: LabConfig, run_dir: Path, seed: int, results: List[Dict[str, Any]]
    ) -> None:
        by_stage = {r["stage"]: r for r in results}
        stages = []
        for stage in self.stages.values():
            entry = stage.describe()
            result = by_stage.get(stage.name, {})
            entry["status"] = result.get("status", "pending")
            entry["digest"] = result.get("digest")
            stages.append(entry)
        payload = {
            "recipe": self.name,
            "seed": seed,
            "config_hash": config_hash(config),
            "env_params": config.env.model_dump(mode="json"),
            "stages": stages,
        }
        atomic_write_text(run_dir / RUN_FILE, json.dumps(payload, sort_keys=True, indent=2) + "\n")

    def run(
        self,
        config: LabConfig,
        out_dir: Union[str, Path],
        seeds: Optional[Sequence[int]] = None,
        max_parallel: int = 1,
        stop_on_error: bool = False,
        show_progress: bool = False,
    ) -> List[Dict[str, Any]]:
        """
        여러 seed 실행

        seed 마다 run 디렉토리가 분리되어 있으므로 max_parallel 개의 seed 를 동시에 실행합니다.
        실행 전에 <out>/<recipe>/recipe.json 에 스테이지와 산출물 경로를 모두 기록합니다.

        Returns:
            seed 순서대로 execute 결과 목록
        """
        seeds = list(seeds if seeds is not None else (self.seeds or config.harness.seeds))
        if not seeds:
            raise HarnessError(f"{self.name}: seed 가 없습니다")
        if max_parallel < 1:
            raise HarnessError(f"max_parallel 은 1 이상이어야 합니다: {max_parallel}")
        recipe = self.recipe(seeds)
        atomic_write_text(
            Path(out_dir) / self.name / RECIPE_FILE,
            json.dumps(recipe.model_dump(mode="json"), sort_keys=True, indent=2) + "\n",
        )

        def run_seed(seed: int) -> Dict[str, Any]:
            return self.execute(config, out_dir, seed, stop_on_error, show_progress)

        with ThreadPoolExecutor(max_workers=max_parallel) as executor:
            return list(executor.map(run_seed, seeds))

    def get_summary(self, results: Sequence[Dict[str, Any]]) -> str:
        """
        실행 결과 요약

        Returns:
            요약 텍스트
        """
        if not results:
            return "recipe 가 아직 실행되지 않았습니다."

        marks = {"done": "✓", "skipped": "↷", "failed": "✗", "blocked": "·"}
        lines = [f"=== {self.name} 실행 결과 ===", ""]
        for run in results:
            lines.append(f"seed {run['seed']} ({run['run_dir']})")
            for idx, result in enumerate(run["results"], 1):
                lines.append(f"  {idx}. {marks[result['status']]} {result['stage']}")
                if result["error"]:
                    lines.append(f"     에러: {result['error']}")

        done = sum(r["stages_executed"] for r in results)
        skipped = sum(r["stages_skipped"] for r in results)
        failed = sum(len(r["errors"]) for r in results)
        lines.append("")
        lines.append(f"실행 {done}개, 건너뜀 {skipped}개, 실패 {failed}개")
        return "\n".join(lines)

    def __repr__(self) -> str:
        return f"<RecipeWorkflow {self.name} ({len(self.stages)} stages)>"
