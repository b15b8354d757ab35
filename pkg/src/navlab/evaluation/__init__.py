"""
Evaluation

Success / SPL 평가, 실패 유형 태깅, adversarial split
"""

from .controllers import Controller, OracleController, PolicyController, RandomController
from .evaluator import (
    EvalResult,
    evaluate,
    evaluate_checkpoint,
    load_eval_output,
    run_episode,
    success_probe,
    write_eval_output,
)
from .metrics import EvaluationError, failure_histogram, spl, summarize, tag_failure
from .splits import build_adversarial_split, select_episodes

__all__ = [
    # Controllers
    "Controller",
    "PolicyController",
    "OracleController",
    "RandomController",
    # Evaluation
    "EvalResult",
    "run_episode",
    "evaluate",
    "evaluate_checkpoint",
    "success_probe",
    "write_eval_output",
    "load_eval_output",
    # Metrics
    "spl",
    "tag_failure",
    "failure_histogram",
    "summarize",
    # Splits
    "build_adversarial_split",
    "select_episodes",
    # Errors
    "EvaluationError",
]
