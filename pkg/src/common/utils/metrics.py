"""
학습 지표 CSV 로그
"""

import csv
import io
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

from .jsonl import atomic_write_text


class MetricsLog:
    """
    고정 열 CSV 지표 로그

    flush 할 때마다 파일 전체를 원자적으로 다시 씁니다.
    None 과 nan 은 빈 칸으로 기록됩니다.

    Example:
        log = MetricsLog(run_dir / "metrics.csv", ["step", "loss", "lr"])
        log.append({"step": 512, "loss": 1.2, "lr": 1e-3})
        log.flush()
    """

    def __init__(self, path: Union[str, Path], columns: Sequence[str]):
        self.path = Path(path)
        self.columns = list(columns)
        self.rows: List[Dict[str, Any]] = []

    def append(self, row: Dict[str, Any]) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise ValueError(f"{self.path.name}: 알 수 없는 열 {sorted(unknown)}")
        self.rows.append(dict(row))

    def column(self, name: str) -> List[Any]:
        return [row.get(name) for row in self.rows]

    def render(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_cell(row.get(name)) for name in self.columns])
        return buffer.getvalue()

    def flush(self) -> Path:
        return atomic_write_text(self.path, self.render())

    def __len__(self) -> int:
        return len(self.rows)


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".10g")
    return str(value)


def read_metrics(path: Union[str, Path]) -> List[Dict[str, str]]:
    """MetricsLog 로 저장한 CSV 를 행 딕셔너리 목록으로 읽기"""
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
