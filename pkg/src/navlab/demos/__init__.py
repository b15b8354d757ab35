"""
Demo forge

SP / FE / HD surrogate 데모 생성, 데이터셋 입출력, 재생
"""

from .base import (
    BaseDemoGenerator,
    DemoError,
    DemoPlanner,
    heading_between,
    realize_path,
    step_toward,
    turn_toward,
)
from .dataset import (
    DatasetCorruptionError,
    merge_datasets,
    read_dataset,
    subsample_nested,
    write_dataset,
)
from .forge import GENERATORS, build_budgeted_dataset, create_generator, episode_rng
from .frontier import FrontierDemoGenerator, FrontierPlanner
from .mapping import AgentMap
from .replay import ReplayResult, replay, verify_dataset
from .shortest_path import ShortestPathDemoGenerator
from .surrogate_human import (
    SurrogateHumanDemoGenerator,
    SurrogateHumanPlanner,
    room_anchor,
    room_visit_order,
)

__all__ = [
    # Generators
    "BaseDemoGenerator",
    "DemoPlanner",
    "ShortestPathDemoGenerator",
    "FrontierDemoGenerator",
    "FrontierPlanner",
    "SurrogateHumanDemoGenerator",
    "SurrogateHumanPlanner",
    "AgentMap",
    "GENERATORS",
    "create_generator",
    "episode_rng",
    "build_budgeted_dataset",
    # Path helpers
    "heading_between",
    "turn_toward",
    "step_toward",
    "realize_path",
    "room_anchor",
    "room_visit_order",
    # Dataset
    "write_dataset",
    "read_dataset",
    "merge_datasets",
    "subsample_nested",
    # Replay
    "ReplayResult",
    "replay",
    "verify_dataset",
    # Errors
    "DemoError",
    "DatasetCorruptionError",
]
