"""
GridNav environment

절차적 multi-room grid world 와 ObjectNav 과제
"""

from .env import (
    GridNavEnv,
    Observation,
    StepInfo,
    StepResult,
    patch_cells,
    render_patch,
    success_check,
)
from .episodes import (
    EpisodeError,
    eligible_starts,
    generate_episodes,
    generate_suite,
    load_episodes,
    seeds_for_split,
    split_for_seed,
    write_episodes,
)
from .generator import (
    CODE_UNKNOWN,
    CODE_WALL,
    FLOOR_CODE_BASE,
    PlacedObject,
    Room,
    WorldGenerationError,
    WorldRegistry,
    WorldSpec,
    generate_world,
)
from .geometry import (
    EnvError,
    bfs_distances,
    chebyshev,
    geodesic_distance,
    line_of_sight,
    los_requirements,
    shortest_path,
)

__all__ = [
    # Environment
    "GridNavEnv",
    "Observation",
    "StepInfo",
    "StepResult",
    "render_patch",
    "patch_cells",
    "success_check",
    # World
    "WorldSpec",
    "Room",
    "PlacedObject",
    "WorldRegistry",
    "generate_world",
    "CODE_UNKNOWN",
    "CODE_WALL",
    "FLOOR_CODE_BASE",
    # Episodes
    "generate_episodes",
    "generate_suite",
    "eligible_starts",
    "split_for_seed",
    "seeds_for_split",
    "write_episodes",
    "load_episodes",
    # Geometry
    "bfs_distances",
    "shortest_path",
    "geodesic_distance",
    "line_of_sight",
    "los_requirements",
    "chebyshev",
    # Errors
    "EnvError",
    "EpisodeError",
    "WorldGenerationError",
]
