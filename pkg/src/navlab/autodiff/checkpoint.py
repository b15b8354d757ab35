"""
체크포인트 컨테이너

형식:
    NAVCKPT1 | header 길이 (8바이트 LE) | 정렬 키 JSON header | <f8 원시 바이트
header 는 metadata 와 텐서 인덱스(name, shape, offset)를 담습니다.
"""

import json
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from common.utils import atomic_write_bytes

MAGIC = b"NAVCKPT1"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    """체크포인트 읽기/쓰기 에러"""

    pass


class CheckpointMeta(BaseModel):
    """체크포인트 metadata"""

    format_version: int = FORMAT_VERSION
    step: int = Field(0, ge=0)
    rng_state: Dict[str, Any] = Field(default_factory=dict, description="numpy bit generator 상태")
    config_hash: str = ""
    phase: str = Field("init", description="init / bc / critic / joint / vpt 등")
    extra: Dict[str, Any] = Field(default_factory=dict)


def save_checkpoint(
    path: Union[str, Path], tensors: Mapping[str, np.ndarray], meta: CheckpointMeta
) -> Path:
    """
    체크포인트 저장 (원자적 쓰기)

    Args:
        path: 출력 경로
        tensors: 'group/name' → 배열
        meta: metadata

    Returns:
        저장된 Path
    """
    index = []
    chunks = []
    offset = 0
    for name in sorted(tensors):
        array = np.ascontiguousarray(tensors[name], dtype="<f8")
        raw = array.tobytes()
        index.append({"name": name, "shape": list(array.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)

    header = json.dumps(
        {"meta": meta.model_dump(mode="json"), "tensors": index},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")

    payload = MAGIC + len(header).to_bytes(8, "little") + header + b"".join(chunks)
    return atomic_write_bytes(path, payload)


def load_checkpoint(path: Union[str, Path]) -> Tuple[CheckpointMeta, Dict[str, np.ndarray]]:
    """
    체크포인트 로드

    Raises:
        CheckpointError: 파일이 없거나 형식이 잘못되었을 때
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"체크포인트를 찾을 수 없습니다: {path}")

    blob = path.read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"체크포인트 형식이 아닙니다: {path}")

    start = len(MAGIC) + 8
    header_len = int.from_bytes(blob[len(MAGIC) : start], "little")
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
        meta = CheckpointMeta.model_validate(header["meta"])
    except (json.JSONDecodeError, UnicodeDecodeError, KeyError, ValidationError) as e:
        raise CheckpointError(f"체크포인트 header 파싱 실패 ({path}): {e}") from e

    if meta.format_version != FORMAT_VERSION:
        raise CheckpointError(f"지원하지 않는 체크포인트 버전: {meta.format_version}")

    body = blob[start + header_len :]
    tensors: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        begin = entry["offset"]
        end = begin + 8 * count
        if end > len(body):
            raise CheckpointError(f"체크포인트가 잘렸습니다: {path} ({entry['name']})")
        tensors[entry["name"]] = np.frombuffer(body[begin:end], dtype="<f8").reshape(shape).copy()

    return meta, tensors
