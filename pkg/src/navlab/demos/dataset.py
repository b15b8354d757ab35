"""
데모 데이터셋 입출력

JSON-lines: 첫 줄 header {format_version, source, env_params, count, total_steps},
이후 데모 한 줄씩. 읽을 때 header 합계를 다시 계산해 검증합니다.
"""

from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from pydantic import ValidationError

from common.models import DEMO_FORMAT_VERSION, DatasetHeader, DemoDataset, Demonstration
from common.utils import JsonlError, read_jsonl, write_jsonl

from .base import DemoError


class DatasetCorruptionError(Exception):
    """데이터셋 파일 손상 (header 불일치, 잘린 파일 등)"""

    pass


def write_dataset(dataset: DemoDataset, path: Union[str, Path]) -> Path:
    """
    데이터셋 저장 (원자적 교체)

    Args:
        dataset: 저장할 데이터셋
        path: 출력 경로

    Returns:
        저장된 Path

    Raises:
        DemoError: header 합계가 데모 목록과 맞지 않을 때
    """
    header = dataset.header
    actual_steps = sum(d.length for d in dataset.demonstrations)
    if header.count != len(dataset.demonstrations) or header.total_steps != actual_steps:
        raise DemoError(
            f"header 불일치: count={header.count}/{len(dataset.demonstrations)}, "
            f"total_steps={header.total_steps}/{actual_steps}"
        )
    return write_jsonl(path, header.model_dump(mode="json"), dataset.demonstrations)


def read_dataset(path: Union[str, Path]) -> DemoDataset:
    """
    데이터셋 로드

    Raises:
        DatasetCorruptionError: 파싱 실패, 버전 불일치, count/total_steps 불일치 시
    """
    try:
        raw_header, demos = read_jsonl(path, Demonstration)
    except JsonlError as e:
        raise DatasetCorruptionError(str(e)) from e

    try:
        header = DatasetHeader.model_validate(raw_header)
    except ValidationError as e:
        raise DatasetCorruptionError(f"{path}: header 가 올바르지 않습니다: {e}") from e

    if header.format_version != DEMO_FORMAT_VERSION:
        raise DatasetCorruptionError(f"{path}: 지원하지 않는 형식 버전 {header.format_version}")
    if header.count != len(demos):
        raise DatasetCorruptionError(f"{path}: count={header.count} 이지만 레코드는 {len(demos)}개")
    total = sum(d.length for d in demos)
    if header.total_steps != total:
        raise DatasetCorruptionError(f"{path}: total_steps={header.total_steps} 이지만 합계는 {total}")
    mixed = {d.source for d in demos} - {header.source}
    if mixed:
        raise DatasetCorruptionError(f"{path}: header source 와 다른 데모: {sorted(s.value for s in mixed)}")
    return DemoDataset(header=header, demonstrations=demos)


def merge_datasets(datasets: Sequence[DemoDataset]) -> DemoDataset:
    """
    worker 별 데이터셋 병합 (순서 유지)

    Raises:
        DemoError: 비어 있거나 source/env_params 가 다를 때
    """
    if not datasets:
        raise DemoError("병합할 데이터셋이 없습니다")
    first = datasets[0].header
    demos: List[Demonstration] = []
    for ds in datasets:
        if ds.header.source != first.source or ds.header.env_params != first.env_params:
            raise DemoError("source 또는 env_params 가 다른 데이터셋은 병합할 수 없습니다")
        demos.extend(ds.demonstrations)
    return DemoDataset.build(first.source, first.env_params, demos)


def subsample_nested(dataset: DemoDataset, sizes: Sequence[int], seed: int) -> List[DemoDataset]:
    """
    스케일링 실험용 중첩 부분집합

    고정된 순열의 앞부분을 total_steps 가 각 크기에 도달할 때까지 잘라내므로
    작은 부분집합은 항상 큰 부분집합에 포함됩니다.

    Args:
        dataset: 원본 데이터셋
        sizes: step 단위 크기 (엄격히 증가)
        seed: 순열 seed

    Returns:
        크기 순 데이터셋 목록

    Raises:
        DemoError: 크기가 증가하지 않거나 원본보다 클 때
    """
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DemoError(f"sizes 는 엄격히 증가해야 합니다: {list(sizes)}")
    if sizes and sizes[-1] > dataset.total_steps:
        raise DemoError(f"최대 크기 {sizes[-1]} 가 데이터셋 total_steps {dataset.total_steps} 보다 큽니다")

    order = np.random.default_rng(seed).permutation(len(dataset.demonstrations))
    shuffled = [dataset.demonstrations[int(i)] for i in order]

    subsets = []
    cut = 0
    total = 0
    for size in sizes:
        while total < size:
            total += shuffled[cut].length
            cut += 1
        subsets.append(DemoDataset.build(dataset.header.source, dataset.header.env_params, shuffled[:cut]))
    return subsets
