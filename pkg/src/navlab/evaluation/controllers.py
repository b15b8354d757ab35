"""
평가용 controller

controller 는 에피소드마다 새 planner 를 만들고, planner 가 한 step 씩 행동을 결정합니다.
"""

from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from common.models import NUM_ACTIONS, Action, Episode
from navlab.demos import BaseDemoGenerator, DemoPlanner, ShortestPathDemoGenerator
from navlab.gridnav import GridNavEnv, Observation, WorldRegistry, WorldSpec
from navlab.policy import HiddenState, PolicyParams, argmax_action, policy_forward, sample_action

from .metrics import EvaluationError


class Controller(ABC):
    """에피소드별 planner 를 만드는 평가 대상"""

    name: str = "controller"

    @abstractmethod
    def planner(self, world: WorldSpec, episode: Episode, rng: np.random.Generator) -> DemoPlanner:
        """에피소드 전용 planner 생성"""
        pass

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} name={self.name}>"


class _PolicyPlanner(DemoPlanner):
    def __init__(self, params: PolicyParams, mode: str, rng: np.random.Generator):
        self.params = params
        self.mode = mode
        self.rng = rng
        self.hidden: Optional[HiddenState] = None

    def act(self, env: GridNavEnv, obs: Observation) -> Action:
        out = policy_forward(obs, self.hidden, self.params)
        self.hidden = out.hidden
        if self.mode == "sample":
            return Action(sample_action(out.logits[0], self.rng))
        return Action(argmax_action(out.logits[0]))


class PolicyController(Controller):
    """
    학습된 정책 (argmax 또는 sample)

    Example:
        controller = PolicyController(params, mode="argmax")
    """

    def __init__(self, params: PolicyParams, mode: str = "argmax", name: str = "policy"):
        if mode not in ("argmax", "sample"):
            raise EvaluationError(f"알 수 없는 평가 모드: {mode}")
        self.params = params.snapshot()
        self.mode = mode
        self.name = name

    def planner(self, world: WorldSpec, episode: Episode, rng: np.random.Generator) -> DemoPlanner:
        return _PolicyPlanner(self.params, self.mode, rng)


class OracleController(Controller):
    """데모 생성기를 그대로 실행하는 controller (기본: SP)"""

    name = "oracle"

    def __init__(self, registry: WorldRegistry, generator: Optional[BaseDemoGenerator] = None):
        self.generator = generator or ShortestPathDemoGenerator(registry)

    def planner(self, world: WorldSpec, episode: Episode, rng: np.random.Generator) -> DemoPlanner:
        return self.generator.planner(world, episode, rng)


class _RandomPlanner(DemoPlanner):
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def act(self, env: GridNavEnv, obs: Observation) -> Action:
        return Action(int(self.rng.integers(NUM_ACTIONS)))


class RandomController(Controller):
    """4개 행동 균등 무작위"""

    name = "random"

    def planner(self, world: WorldSpec, episode: Episode, rng: np.random.Generator) -> DemoPlanner:
        return _RandomPlanner(rng)
