"""
Configuration management
"""

from .settings import (
    DATA_DIR_ENV,
    DEFAULT_CATEGORIES,
    DEFAULT_ROOM_PRIORS,
    DEFAULT_ROOM_TYPES,
    BCConfig,
    ConfigError,
    DemoConfig,
    DemoSource,
    EnvParams,
    EvalConfig,
    HarnessConfig,
    LabConfig,
    OptimConfig,
    PolicyConfig,
    PPOConfig,
    ScheduleConfig,
    ScheduleMode,
    VPTConfig,
    WorkerPoolConfig,
    ceil_fraction,
    config_hash,
    data_dir,
    default_phase_knots,
    format_validation_error,
    load_config,
)

__all__ = [
    # Config models
    "LabConfig",
    "EnvParams",
    "PolicyConfig",
    "OptimConfig",
    "BCConfig",
    "PPOConfig",
    "ScheduleConfig",
    "ScheduleMode",
    "VPTConfig",
    "WorkerPoolConfig",
    "DemoConfig",
    "DemoSource",
    "EvalConfig",
    "HarnessConfig",
    # Defaults
    "DEFAULT_CATEGORIES",
    "DEFAULT_ROOM_TYPES",
    "DEFAULT_ROOM_PRIORS",
    "DATA_DIR_ENV",
    # Helpers
    "ConfigError",
    "load_config",
    "config_hash",
    "data_dir",
    "default_phase_knots",
    "ceil_fraction",
    "format_validation_error",
]
