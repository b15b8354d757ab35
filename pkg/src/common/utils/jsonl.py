"""
JSON-lines / 원자적 파일 쓰기 유틸리티
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

M = TypeVar("M", bound=BaseModel)

PathLike = Union[str, Path]


class JsonlError(Exception):
    """JSON-lines 파일 읽기 에러"""

    pass


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """
    임시 파일에 쓴 뒤 os.replace 로 교체

    Args:
        path: 대상 경로
        data: 쓸 바이트

    Returns:
        대상 Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dumps_sorted(payload: Any) -> str:
    """키 정렬된 한 줄 JSON"""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_jsonl(path: PathLike, header: Dict[str, Any], records: Iterable[BaseModel]) -> Path:
    """
    header 한 줄 + 레코드 줄 형식으로 저장

    Args:
        path: 출력 경로
        header: 첫 줄에 기록할 header
        records: pydantic 레코드들

    Returns:
        저장된 Path
    """
    lines = [dumps_sorted(header)]
    for record in records:
        lines.append(dumps_sorted(record.model_dump(mode="json")))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def iter_lines(path: PathLike) -> Iterator[Tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                yield lineno, line


def read_jsonl(path: PathLike, record_type: Type[M]) -> Tuple[Dict[str, Any], List[M]]:
    """
    write_jsonl 로 저장한 파일 로드

    Args:
        path: 입력 경로
        record_type: 레코드 pydantic 모델

    Returns:
        (header, records)

    Raises:
        JsonlError: 파일이 없거나 줄 파싱 실패 시
    """
    path = Path(path)
    if not path.exists():
        raise JsonlError(f"파일을 찾을 수 없습니다: {path}")

    header: Dict[str, Any] = {}
    records: List[M] = []
    for lineno, line in iter_lines(path):
        try:
            if lineno == 1:
                header = json.loads(line)
                if not isinstance(header, dict):
                    raise JsonlError(f"{path}:1 header 가 객체가 아닙니다")
            else:
                records.append(record_type.model_validate_json(line))
        except (json.JSONDecodeError, ValidationError) as e:
            raise JsonlError(f"{path}:{lineno} 파싱 실패: {e}") from e

    if not header:
        raise JsonlError(f"header 가 없습니다: {path}")
    return header, records
