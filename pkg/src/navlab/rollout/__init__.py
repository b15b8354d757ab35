"""
Rollout engine

worker 스레드 풀, 선점(sync fraction), segment 수집
"""

from .engine import StepHook, WorkerPool, collect, deterministic_collect, dump_segments
from .segment import (
    CollectedSegment,
    CollectResult,
    EnvGroup,
    EpisodeOutcome,
    RolloutError,
    RolloutMode,
    SegmentDump,
    partition_envs,
)

__all__ = [
    # Engine
    "WorkerPool",
    "StepHook",
    "collect",
    "deterministic_collect",
    "dump_segments",
    # Segments
    "CollectedSegment",
    "CollectResult",
    "EpisodeOutcome",
    "RolloutMode",
    "SegmentDump",
    "EnvGroup",
    "partition_envs",
    # Errors
    "RolloutError",
]
