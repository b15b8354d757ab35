"""
실험 report

seed 별 run 디렉토리를 모아 평균 ± 표준오차 표(CSV)와 JSON 을 만듭니다.
같은 run 디렉토리에서는 항상 같은 바이트가 나옵니다.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from common.config import EnvParams, config_hash
from common.models import EvalSummary, ScalingPoint, StageKind, TAGGABLE_FAILURES
from common.utils import MetricsLog, atomic_write_text, get_logger

from .base import HarnessError
from .checks import acceptance_checks
from .matching import probe_trace
from .pipeline import DEMOS_FILE
from .scaling import scaling_curve
from .workflow import RUN_FILE

logger = get_logger("harness")

REPORT_DIR = "report"
REPORT_FILE = "report.json"

# budget 대비 초반 probe 위치
EARLY_PROBE_FRACTION = 0.05

TABLE_COLUMNS: Dict[str, List[str]] = {
    "eval": [
        "stage",
        "target",
        "source",
        "row",
        "mode",
        "size",
        "lr",
        "split",
        "n_seeds",
        "success_mean",
        "success_stderr",
        "spl_mean",
        "spl_stderr",
    ],
    "probes": [
        "stage",
        "mode",
        "n_seeds",
        "probe_start_mean",
        "probe_early_mean",
        "probe_final_mean",
        "drop_mean",
        "drop_stderr",
        "seeds_with_drop",
    ],
    "failures": ["stage", "n_seeds"] + [tag.value for tag in TAGGABLE_FAILURES],
    "scaling": [
        "size",
        "n_seeds",
        "bc_mean",
        "bc_stderr",
        "rlft_mean",
        "rlft_stderr",
        "delta_mean",
        "delta_stderr",
    ],
    "lr_sweep": ["row", "lr", "success_mean", "success_stderr", "best"],
    "demos": [
        "stage",
        "source",
        "n_seeds",
        "total_steps_mean",
        "total_steps_min",
        "total_steps_max",
    ],
}

# seed 별 probe 하락이 이 값 이상이면 drop 으로 셈
DROP_THRESHOLD = 0.05


class ReportError(Exception):
    """report 생성 에러"""

    pass


def mean_stderr(values: Sequence[Optional[float]]) -> Tuple[Optional[float], Optional[float]]:
    """
    평균과 표준오차 (표본 표준편차 / √n)

    값이 하나면 표준오차는 None (CSV 에서 빈 칸), 없으면 둘 다 None.
    """
    clean = [float(v) for v in values if v is not None and not math.isnan(v)]
    if not clean:
        return None, None
    arr = np.asarray(clean, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size == 1:
        return mean, None
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


@dataclass
class SeedRun:
    seed: int
    run_dir: Path
    header: Dict[str, Any]

    @property
    def stages(self) -> List[Dict[str, Any]]:
        return self.header["stages"]

    def stage_dir(self, name: str) -> Path:
        return self.run_dir / name


def collect_run_dirs(path: Union[str, Path]) -> List[Path]:
    """
    report 대상 run 디렉토리 수집

    path 가 seed run 디렉토리면 그 하나, recipe 디렉토리면 run.json 이 있는 하위 디렉토리 전부.

    Raises:
        ReportError: run 이 하나도 없을 때
    """
    path = Path(path)
    if (path / RUN_FILE).is_file():
        return [path]
    if not path.is_dir():
        raise ReportError(f"{path}: 디렉토리가 없습니다")
    dirs = [p for p in path.iterdir() if p.is_dir() and (p / RUN_FILE).is_file()]
    if not dirs:
        raise ReportError(f"{path}: report 할 run 이 없습니다")
    return sorted(dirs, key=lambda p: (0, int(p.name), "") if p.name.isdigit() else (1, 0, p.name))


def _load_run(run_dir: Path) -> SeedRun:
    try:
        header = json.loads((run_dir / RUN_FILE).read_text("utf-8"))
        return SeedRun(seed=int(header["seed"]), run_dir=run_dir, header=header)
    except (OSError, ValueError, KeyError) as e:
        raise ReportError(f"{run_dir}: run.json 을 읽을 수 없습니다 ({e})") from e


def _read_summary(path: Path) -> Optional[EvalSummary]:
    try:
        return EvalSummary.model_validate_json(path.read_text("utf-8"))
    except OSError:
        return None
    except ValueError as e:
        raise ReportError(f"{path}: summary 를 읽을 수 없습니다 ({e})") from e


def _target_params(stages: Dict[str, Dict[str, Any]], name: str) -> Dict[str, Any]:
    """평가 스테이지가 가리키는 학습 스테이지의 파라미터"""
    params = stages[name]["params"]
    target = stages.get(params.get("target"), {}).get("params", {})
    init = stages.get(target.get("init"), {}).get("params", {})
    return {
        "target": params.get("target"),
        "source": target.get("source", init.get("source")),
        "row": target.get("row"),
        "mode": target.get("mode"),
        "size": target.get("size", init.get("size")),
        "lr": target.get("lr"),
        "split": params.get("split_name"),
    }


# Tables


def _eval_table(runs: List[SeedRun], stages: Dict[str, Dict[str, Any]]) -> List[Dict[str, Any]]:
    rows = []
    for name, stage in stages.items():
        if stage["kind"] != StageKind.EVAL.value:
            continue
        summaries = {run.seed: _read_summary(run.stage_dir(name) / "summary.json") for run in runs}
        present = {seed: s for seed, s in summaries.items() if s is not None}
        success = mean_stderr([s.success for s in present.values()])
        spl = mean_stderr([s.spl for s in present.values()])
        rows.append(
            {
                "stage": name,
                **_target_params(stages, name),
                "n_seeds": len(present),
                "success_mean": success[0],
                "success_stderr": success[1],
                "spl_mean": spl[0],
                "spl_stderr": spl[1],
                "success_by_seed": {str(seed): s.success for seed, s in present.items()},
                "failure_histogram": {
                    tag.value: mean_stderr(
                        [s.failure_histogram.get(tag.value, 0) for s in present.values()]
                    )[0]
                    for tag in TAGGABLE_FAILURES
                },
            }
        )
    return rows


def _demo_total_steps(path: Path) -> Optional[int]:
    """데이터셋 header (첫 줄) 의 total_steps"""
    try:
        with path.open("r", encoding="utf-8") as f:
            first = f.readline()
    except OSError:
        return None
    try:
        return int(json.loads(first)["total_steps"])
    except (ValueError, KeyError, TypeError) as e:
        raise ReportError(f"{path}: 데이터셋 header 를 읽을 수 없습니다 ({e})") from e


def _demo_table(runs: List[SeedRun], stages: Dict[str, Dict[str, Any]]) -> List[Dict[str, Any]]:
    rows = []
    for name, stage in stages.items():
        if stage["kind"] != StageKind.DEMO_GEN.value:
            continue
        totals = {run.seed: _demo_total_steps(run.stage_dir(name) / DEMOS_FILE) for run in runs}
        present = {seed: t for seed, t in totals.items() if t is not None}
        if not present:
            continue
        rows.append(
            {
                "stage": name,
                "source": stage["params"].get("source"),
                "n_seeds": len(present),
                "total_steps_mean": mean_stderr(list(present.values()))[0],
                "total_steps_min": min(present.values()),
                "total_steps_max": max(present.values()),
                "total_steps_by_seed": {str(seed): t for seed, t in present.items()},
            }
        )
    return rows


def _early_probe(run_dir: Path) -> Optional[Dict[str, float]]:
    if not (run_dir / "metrics.csv").is_file():
        return None
    trace = probe_trace(run_dir)
    if not trace:
        return None
    try:
        header = json.loads((run_dir / "run.json").read_text("utf-8"))
        total = int(header["config"]["total_steps"])
    except (OSError, ValueError, KeyError) as e:
        raise ReportError(f"{run_dir}: 학습 run.json 을 읽을 수 없습니다 ({e})") from e
    early_step = EARLY_PROBE_FRACTION * total
    early = next((p for p in trace if p.step > 0 and p.step >= early_step), trace[-1])
    start = trace[0].probe if trace[0].step == 0 else None
    return {
        "start": start,
        "early": early.probe,
        "final": trace[-1].probe,
        "drop": None if start is None else start - early.probe,
    }


def _probe_table(runs: List[SeedRun], stages: Dict[str, Dict[str, Any]]) -> List[Dict[str, Any]]:
    rows = []
    for name, stage in stages.items():
        if stage["kind"] not in (StageKind.BC.value, StageKind.RL_FT.value):
            continue
        per_seed = {}
        for run in runs:
            probe = _early_probe(run.stage_dir(name))
            if probe is not None:
                per_seed[run.seed] = probe
        if not per_seed:
            continue
        drops = [p["drop"] for p in per_seed.values()]
        drop = mean_stderr(drops)
        rows.append(
            {
                "stage": name,
                "mode": stage["params"].get("mode", "bc"),
                "n_seeds": len(per_seed),
                "probe_start_mean": mean_stderr([p["start"] for p in per_seed.values()])[0],
                "probe_early_mean": mean_stderr([p["early"] for p in per_seed.values()])[0],
                "probe_final_mean": mean_stderr([p["final"] for p in per_seed.values()])[0],
                "drop_mean": drop[0],
                "drop_stderr": drop[1],
                "seeds_with_drop": sum(1 for d in drops if d is not None and d >= DROP_THRESHOLD),
                "drop_by_seed": {str(seed): p["drop"] for seed, p in per_seed.items()},
            }
        )
    return rows


def _failure_table(eval_rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    return [
        {"stage": row["stage"], "n_seeds": row["n_seeds"], **row["failure_histogram"]}
        for row in eval_rows
        if row["n_seeds"] > 0
    ]


def _scaling_tables(
    eval_rows: List[Dict[str, Any]]
) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    """크기별 BC / RL-FT / Δ 표와 두 적합 곡선"""
    by_size: Dict[int, Dict[str, Dict[str, float]]] = {}
    source = None
    for row in eval_rows:
        if row["size"] is None or row["split"] is not None:
            continue
        source = row["source"]
        key = "rlft" if row["mode"] is not None else "bc"
        by_size.setdefault(int(row["size"]), {})[key] = row["success_by_seed"]
    if not by_size:
        return [], []

    table, points = [], []
    for size in sorted(by_size):
        bc = by_size[size].get("bc", {})
        rl = by_size[size].get("rlft", {})
        deltas = [rl[seed] - bc[seed] for seed in sorted(bc) if seed in rl]
        bc_stat, rl_stat, delta = (
            mean_stderr(list(bc.values())),
            mean_stderr(list(rl.values())),
            mean_stderr(deltas),
        )
        table.append(
            {
                "size": size,
                "n_seeds": len(bc),
                "bc_mean": bc_stat[0],
                "bc_stderr": bc_stat[1],
                "rlft_mean": rl_stat[0],
                "rlft_stderr": rl_stat[1],
                "delta_mean": delta[0],
                "delta_stderr": delta[1],
            }
        )
        if bc_stat[0] is not None:
            points.append(ScalingPoint(size=size, bc_success=bc_stat[0], rlft_success=rl_stat[0]))

    curves = []
    for target in ("bc_success", "rlft_success"):
        try:
            curve = scaling_curve(source or "", points, target)
            curves.append(curve.model_dump(mode="json"))
        except HarnessError as e:
            logger.warning("%s 곡선 적합 실패: %s", target, e)
            curves.append({"source": source, "target": target, "error": str(e)})
    return table, curves


def _lr_table(eval_rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    rows = [r for r in eval_rows if r["lr"] is not None and r["success_mean"] is not None]
    best: Dict[str, float] = {}
    for r in rows:
        best[r["row"]] = max(best.get(r["row"], -1.0), r["success_mean"])
    return [
        {
            "row": r["row"],
            "lr": r["lr"],
            "success_mean": r["success_mean"],
            "success_stderr": r["success_stderr"],
            "best": r["success_mean"] == best[r["row"]],
        }
        for r in rows
    ]


def build_report(run_dirs: Sequence[Union[str, Path]]) -> Dict[str, Any]:
    """
    seed 별 run 디렉토리를 모아 report 생성

    Args:
        run_dirs: 같은 recipe 의 seed run 디렉토리

    Returns:
        report 딕셔너리 (tables, curves, checks)

    Raises:
        ReportError: run 이 없거나, recipe / env_params 가 서로 다를 때
    """
    if not run_dirs:
        raise ReportError("report 할 run 이 없습니다")
    runs = sorted((_load_run(Path(d)) for d in run_dirs), key=lambda r: r.seed)
    first = runs[0]
    for run in runs[1:]:
        if run.header.get("recipe") != first.header.get("recipe"):
            raise ReportError(
                f"{run.run_dir}: recipe {run.header.get('recipe')} ≠ {first.header.get('recipe')}"
            )
        if run.header.get("env_params") != first.header.get("env_params"):
            raise ReportError(f"{run.run_dir}: env_params 가 {first.run_dir} 와 다릅니다")
    if len({run.seed for run in runs}) != len(runs):
        raise ReportError("같은 seed 의 run 이 중복되었습니다")

    try:
        env = EnvParams.model_validate(first.header["env_params"])
    except (KeyError, ValueError) as e:
        raise ReportError(f"{first.run_dir}: env_params 가 올바르지 않습니다 ({e})") from e

    stages = {stage["name"]: stage for stage in first.stages}
    try:
        eval_rows = _eval_table(runs, stages)
        probe_rows = _probe_table(runs, stages)
    except HarnessError as e:
        raise ReportError(str(e)) from e
    scaling_rows, curves = _scaling_tables(eval_rows)

    report: Dict[str, Any] = {
        "recipe": first.header["recipe"],
        "seeds": [run.seed for run in runs],
        "env_hash": config_hash(env),
        "config_hashes": {str(run.seed): run.header.get("config_hash") for run in runs},
        "tables": {
            "eval": eval_rows,
            "probes": probe_rows,
            "failures": _failure_table(eval_rows),
            "scaling": scaling_rows,
            "lr_sweep": _lr_table(eval_rows),
            "demos": _demo_table(runs, stages),
        },
        "curves": curves,
    }
    report["checks"] = acceptance_checks(report)
    return report


def write_report(report: Dict[str, Any], out_dir: Union[str, Path]) -> List[Path]:
    """
    report.json 과 비어 있지 않은 표마다 <table>.csv 저장

    Returns:
        쓴 파일 경로 목록
    """
    out_dir = Path(out_dir)
    text = json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    written = [atomic_write_text(out_dir / REPORT_FILE, text)]
    for table, rows in report["tables"].items():
        if not rows:
            continue
        log = MetricsLog(out_dir / f"{table}.csv", TABLE_COLUMNS[table])
        for row in rows:
            log.append({key: row.get(key) for key in TABLE_COLUMNS[table]})
        written.append(log.flush())
    return written


def generate_report(
    path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None
) -> List[Path]:
    """
    recipe (또는 seed run) 디렉토리의 report 를 path/report 아래에 생성

    모든 run 을 읽고 집계한 뒤에만 파일을 쓰므로 에러 시 report 가 남지 않습니다.
    """
    report = build_report(collect_run_dirs(path))
    return write_report(report, out_dir if out_dir is not None else Path(path) / REPORT_DIR)
