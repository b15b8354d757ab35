"""
Common data models
"""

from .demo import DEMO_FORMAT_VERSION, DatasetHeader, DemoDataset, Demonstration
from .evaluation import TAGGABLE_FAILURES, EvalRecord, EvalSummary, FailureTag
from .experiment import ExperimentRecipe, ScalingCurve, ScalingPoint, StageKind, StageSpec
from .world import ACTION_CODES, NUM_ACTIONS, Action, Cell, Episode, Heading, Split

__all__ = [
    # World models
    "Action",
    "ACTION_CODES",
    "NUM_ACTIONS",
    "Cell",
    "Episode",
    "Heading",
    "Split",
    # Demo models
    "Demonstration",
    "DemoDataset",
    "DatasetHeader",
    "DEMO_FORMAT_VERSION",
    # Evaluation models
    "EvalRecord",
    "EvalSummary",
    "FailureTag",
    "TAGGABLE_FAILURES",
    # Experiment models
    "ExperimentRecipe",
    "StageSpec",
    "StageKind",
    "ScalingCurve",
    "ScalingPoint",
]
