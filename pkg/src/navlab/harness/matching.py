"""
성능을 맞춘 BC 체크포인트 선택
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Union

from common.utils import read_metrics

from .base import HarnessError


@dataclass(frozen=True)
class ProbePoint:
    """체크포인트 하나의 train-success probe"""

    step: int
    probe: float
    path: Path


@dataclass(frozen=True)
class MatchedCheckpoint:
    run: str
    path: Path
    step: int
    probe: float


def probe_trace(run_dir: Union[str, Path]) -> List[ProbePoint]:
    """
    학습 run 의 probe 로그 (step 순)

    metrics.csv 에서 probe 가 기록된 행만 골라 같은 step 의 체크포인트와 짝짓습니다.

    Raises:
        HarnessError: metrics.csv 가 없거나 체크포인트 파일이 빠졌을 때
    """
    run_dir = Path(run_dir)
    try:
        rows = read_metrics(run_dir / "metrics.csv")
    except OSError as e:
        raise HarnessError(f"{run_dir}: metrics.csv 를 읽을 수 없습니다 ({e})") from e

    points = []
    for row in rows:
        if not row.get("train_success_probe"):
            continue
        step = int(row["step"])
        matches = sorted(run_dir.glob(f"*_{step:09d}.ckpt"))
        if not matches:
            raise HarnessError(f"{run_dir}: step {step} 체크포인트가 없습니다")
        probe = float(row["train_success_probe"])
        points.append(ProbePoint(step=step, probe=probe, path=matches[0]))
    return sorted(points, key=lambda p: p.step)


def matched_target(run_dirs: Iterable[Union[str, Path]]) -> float:
    """모든 run 이 도달하는 가장 높은 probe 값 (run 별 최대 probe 의 최솟값)"""
    maxima = []
    for run_dir in run_dirs:
        trace = probe_trace(run_dir)
        if not trace:
            raise HarnessError(f"{run_dir}: probe 로그가 비어 있습니다")
        maxima.append(max(p.probe for p in trace))
    if not maxima:
        raise HarnessError("matched_target: run 이 없습니다")
    return min(maxima)


def select_matched_checkpoints(
    bc_runs: Mapping[str, Union[str, Path]], target: float
) -> Dict[str, MatchedCheckpoint]:
    """
    run 마다 probe ≥ target 에 처음 도달한 체크포인트 선택

    Args:
        bc_runs: run 이름 → run 디렉토리
        target: 목표 train-success probe

    Returns:
        run 이름 → MatchedCheckpoint

    Raises:
        HarnessError: probe 로그가 비었거나 목표에 도달하지 못한 run 이 있을 때 (run 이름 포함)
    """
    selected: Dict[str, MatchedCheckpoint] = {}
    missed = []
    for name, run_dir in bc_runs.items():
        trace = probe_trace(run_dir)
        if not trace:
            raise HarnessError(f"{name}: probe 로그가 비어 있습니다")
        hit = next((p for p in trace if p.probe >= target), None)
        if hit is None:
            missed.append(f"{name} (최대 {max(p.probe for p in trace):.3f})")
            continue
        selected[name] = MatchedCheckpoint(run=name, path=hit.path, step=hit.step, probe=hit.probe)
    if missed:
        raise HarnessError(f"probe 목표 {target:.3f} 에 도달하지 못한 run: {', '.join(missed)}")
    return selected
