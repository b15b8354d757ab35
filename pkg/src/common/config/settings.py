"""
실험 설정 모델

모든 모듈의 Config 타입을 pydantic 모델로 정의합니다.
설정 파일(JSON)의 알 수 없는 키는 거부됩니다.
"""

import hashlib
import json
import math
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

DATA_DIR_ENV = "PIRLNAV_DATA_DIR"

DEFAULT_CATEGORIES = ["chair", "bed", "plant", "toilet", "tv_monitor", "sofa"]
DEFAULT_ROOM_TYPES = ["living_room", "bedroom", "bathroom", "kitchen", "office"]

# category → room_type 확률표 (world 생성 시 물체 배치에 사용)
DEFAULT_ROOM_PRIORS: Dict[str, Dict[str, float]] = {
    "chair": {"living_room": 0.25, "bedroom": 0.1, "bathroom": 0.0, "kitchen": 0.35, "office": 0.3},
    "bed": {"living_room": 0.05, "bedroom": 0.9, "bathroom": 0.0, "kitchen": 0.0, "office": 0.05},
    "plant": {"living_room": 0.4, "bedroom": 0.1, "bathroom": 0.1, "kitchen": 0.2, "office": 0.2},
    "toilet": {"living_room": 0.0, "bedroom": 0.0, "bathroom": 1.0, "kitchen": 0.0, "office": 0.0},
    "tv_monitor": {"living_room": 0.55, "bedroom": 0.25, "bathroom": 0.0, "kitchen": 0.0, "office": 0.2},
    "sofa": {"living_room": 0.8, "bedroom": 0.1, "bathroom": 0.0, "kitchen": 0.0, "office": 0.1},
}


class ConfigError(Exception):
    """설정 검증 에러"""

    pass


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnvParams(_StrictModel):
    """GridNav world/episode 생성 파라미터"""

    width: int = Field(15, ge=3, description="grid 폭 (테두리 벽 포함)")
    height: int = Field(15, ge=3, description="grid 높이 (테두리 벽 포함)")
    room_count: Tuple[int, int] = Field((3, 6), description="방 개수 범위 (min, max)")
    min_room_size: int = Field(3, ge=1, description="방의 최소 한 변 길이 (셀)")
    categories: List[str] = Field(default_factory=lambda: list(DEFAULT_CATEGORIES))
    room_types: List[str] = Field(default_factory=lambda: list(DEFAULT_ROOM_TYPES))
    room_priors: Dict[str, Dict[str, float]] = Field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_ROOM_PRIORS.items()},
        description="category → room_type 확률표",
    )
    instances_per_category: Tuple[int, int] = Field((1, 2), description="category별 인스턴스 수 범위")
    patch_depth: int = Field(5, ge=1, description="전방 관측 깊이 D")
    patch_half_width: int = Field(2, ge=0, description="관측 폭 2K+1 의 K")
    success_radius: int = Field(1, ge=0, description="성공 반경 (Chebyshev, 셀)")
    max_steps: int = Field(256, ge=1, description="에피소드 최대 step")
    success_reward: float = Field(1.0, gt=0.0)
    max_generation_retries: int = Field(20, ge=1)
    val_percent: int = Field(20, ge=0, le=100, description="val 로 배정되는 world seed 비율 (%)")

    @field_validator("room_count", "instances_per_category")
    @classmethod
    def _check_range(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        low, high = value
        if low < 1 or high < low:
            raise ValueError(f"잘못된 범위: {value}")
        return value

    @field_validator("categories", "room_types")
    @classmethod
    def _check_names(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("빈 목록은 허용되지 않습니다")
        if len(set(value)) != len(value):
            raise ValueError(f"중복된 이름: {value}")
        return value

    @property
    def patch_width(self) -> int:
        return 2 * self.patch_half_width + 1

    @property
    def num_cell_codes(self) -> int:
        # unknown, wall, room type별 floor, category별 물체
        return 2 + len(self.room_types) + len(self.categories)

    def prior(self, category: str, room_type: str) -> float:
        """category 가 room_type 방에 놓일 사전 확률 (표에 없으면 균등)"""
        table = self.room_priors.get(category)
        if table is None:
            return 1.0 / len(self.room_types)
        return float(table.get(room_type, 0.0))


class PolicyConfig(_StrictModel):
    """actor-critic 네트워크 구조"""

    cell_embed_dim: int = Field(8, ge=1)
    d_vis: int = Field(128, ge=1, description="patch 인코더 출력 폭")
    aux_dim: int = Field(32, ge=1, description="gps/compass/goal 임베딩 폭")
    hidden_size: int = Field(128, ge=1, description="GRU hidden 폭")
    num_layers: int = Field(2, ge=1)
    critic_init_scale: float = Field(1e-6, ge=0.0, le=1e-4, description="critic 최종층 초기화 크기")
    gps_scale: float = Field(0.1, gt=0.0)
    patch_depth: int = Field(5, ge=1)
    patch_width: int = Field(5, ge=1)
    num_cell_codes: int = Field(13, ge=3)
    num_categories: int = Field(6, ge=1)

    @classmethod
    def for_env(cls, env: EnvParams, **overrides: Any) -> "PolicyConfig":
        """env 관측 형태에 맞춘 PolicyConfig 생성"""
        geometry = {
            "patch_depth": env.patch_depth,
            "patch_width": env.patch_width,
            "num_cell_codes": env.num_cell_codes,
            "num_categories": len(env.categories),
        }
        geometry.update(overrides)
        return cls(**geometry)


class OptimConfig(_StrictModel):
    """Adam 하이퍼파라미터"""

    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-5, gt=0.0)
    weight_decay: float = Field(0.0, ge=0.0)


class BCConfig(_StrictModel):
    """behavior cloning 학습 설정"""

    lr: float = Field(1e-3, gt=0.0, description="초기 lr (update 마다 선형 감소)")
    lr_decay: bool = Field(True, description="False 면 고정 lr")
    rollout_len: int = Field(64, ge=1)
    minibatches_per_update: int = Field(2, ge=1)
    envs_per_worker: int = Field(8, ge=1)
    workers: int = Field(1, ge=1)
    sync_fraction: float = Field(0.6, gt=0.0, le=1.0)
    total_steps: int = Field(2_000_000, ge=0)
    checkpoint_interval: int = Field(200_000, ge=1, description="체크포인트 간격 (env step)")
    probe_episodes: int = Field(50, ge=0, description="train-success probe 에피소드 수")
    inflection_weighting: bool = True
    seed: int = 0
    optim: OptimConfig = Field(default_factory=OptimConfig)


class PPOConfig(_StrictModel):
    """PPO + GAE 설정"""

    gamma: float = Field(0.99, gt=0.0, le=1.0)
    gae_tau: float = Field(0.95, ge=0.0, le=1.0)
    clip: float = Field(0.2, gt=0.0)
    ppo_epochs: int = Field(2, ge=1)
    minibatches: int = Field(2, ge=1)
    value_loss_coef: float = Field(0.5, ge=0.0)
    max_grad_norm: float = Field(0.2, gt=0.0)
    entropy_coef: float = Field(0.01, ge=0.0)
    normalize_advantage: bool = False
    rollout_len: int = Field(64, ge=1)
    envs_per_worker: int = Field(8, ge=1)
    workers: int = Field(1, ge=1)
    sync_fraction: float = Field(0.6, gt=0.0, le=1.0)
    total_steps: int = Field(3_000_000, ge=0)
    checkpoint_interval: int = Field(300_000, ge=1)
    probe_episodes: int = Field(50, ge=0)
    seed: int = 0
    optim: OptimConfig = Field(default_factory=OptimConfig)


class ScheduleMode(str, Enum):
    """RL finetuning 모드 (ablation 행과 대응)"""

    PIRLNAV = "pirlnav"
    NAIVE = "naive"
    CRITIC_ONLY_THEN_JUMP = "critic_only_then_jump"
    CRITIC_DECAY_ONLY = "critic_decay_only"
    ACTOR_WARMUP_ONLY = "actor_warmup_only"
    VPT = "vpt"

    @property
    def has_critic_phase(self) -> bool:
        return self not in (ScheduleMode.NAIVE, ScheduleMode.VPT)


class ScheduleConfig(_StrictModel):
    """finetuning lr 스케줄"""

    mode: ScheduleMode = ScheduleMode.PIRLNAV
    phase1_end: Optional[int] = Field(None, ge=0, description="S₁ (None 이면 total_steps·8/300)")
    warmup_end: Optional[int] = Field(None, ge=0, description="S₂ (None 이면 total_steps·12/300)")
    total_steps: Optional[int] = Field(None, ge=0)
    critic_lr_hi: float = Field(2.5e-4, gt=0.0)
    lr_lo: float = Field(1.5e-5, gt=0.0)
    fixed_lr: float = Field(2.5e-4, gt=0.0, description="naive / critic-only-then-jump 모드의 고정 lr")

    @model_validator(mode="after")
    def _check_knots(self) -> "ScheduleConfig":
        s1, s2, total = self.phase1_end, self.warmup_end, self.total_steps
        if s1 is not None and s2 is not None and s1 > s2:
            raise ValueError(f"phase1_end({s1}) > warmup_end({s2})")
        if total is not None:
            for name, knot in (("phase1_end", s1), ("warmup_end", s2)):
                if knot is not None and knot > total:
                    raise ValueError(f"{name}({knot}) > total_steps({total})")
        return self

    def resolved(self, total_steps: int) -> "ScheduleConfig":
        """total_steps 에 맞춰 S₁, S₂ 를 확정한 복사본"""
        s1 = self.phase1_end if self.phase1_end is not None else (8 * total_steps) // 300
        s2 = self.warmup_end if self.warmup_end is not None else (12 * total_steps) // 300
        return self.model_copy(
            update={"phase1_end": s1, "warmup_end": max(s1, s2), "total_steps": total_steps}
        )


class VPTConfig(_StrictModel):
    """VPT 방식 finetuning 설정"""

    rho: float = Field(0.2, ge=0.0)
    rho_decay: float = Field(0.995, gt=0.0, le=1.0)
    fixed_lr: float = Field(1.5e-5, gt=0.0)


class WorkerPoolConfig(_StrictModel):
    """rollout worker 풀 구성"""

    num_workers: int = Field(1, ge=1)
    envs_per_worker: int = Field(8, ge=1)
    rollout_len: int = Field(64, ge=1)
    sync_fraction: float = Field(0.6, gt=0.0, le=1.0)
    debug_dump: Optional[Path] = Field(None, description="segment JSON-lines 덤프 디렉토리 (디버그용)")

    @classmethod
    def from_trainer(cls, cfg: Union[BCConfig, PPOConfig], **overrides: Any) -> "WorkerPoolConfig":
        values: Dict[str, Any] = {
            "num_workers": cfg.workers,
            "envs_per_worker": cfg.envs_per_worker,
            "rollout_len": cfg.rollout_len,
            "sync_fraction": cfg.sync_fraction,
        }
        values.update(overrides)
        return cls(**values)

    @property
    def num_envs(self) -> int:
        return self.num_workers * self.envs_per_worker

    @property
    def sync_count(self) -> int:
        """선점 신호가 발생하는 완료 worker 수"""
        return ceil_fraction(self.sync_fraction, self.num_workers)


class DemoSource(str, Enum):
    """데모 생성 방식"""

    SP = "SP"
    FE = "FE"
    HD_SURROGATE = "HD_SURROGATE"

    @classmethod
    def from_cli(cls, name: str) -> "DemoSource":
        aliases = {"sp": cls.SP, "fe": cls.FE, "hd": cls.HD_SURROGATE}
        try:
            return aliases[name.lower()]
        except KeyError:
            return cls(name)


class DemoConfig(_StrictModel):
    """데모 데이터셋 생성 설정"""

    source: DemoSource = DemoSource.SP
    detour_prob: float = Field(0.1, ge=0.0, le=1.0, description="HD surrogate 의 우회 확률")
    target_steps: int = Field(200_000, ge=0, description="데이터셋 총 step 예산")
    success_only: bool = True
    seed: int = 0


class EvalConfig(_StrictModel):
    """평가 설정"""

    mode: str = Field("argmax", pattern="^(argmax|sample)$")
    episodes: int = Field(1000, ge=1)
    workers: int = Field(4, ge=1)
    loop_threshold: int = Field(4, ge=1, description="LOOPING 태그의 셀 재방문 임계값")
    seed: int = 0


class HarnessConfig(_StrictModel):
    """실험 하네스 예산"""

    train_worlds: int = Field(200, ge=1)
    val_worlds: int = Field(50, ge=1)
    train_episodes_per_world: int = Field(20, ge=1)
    val_episodes: int = Field(1000, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    hd_scaling_steps: List[int] = Field(default_factory=lambda: [25_000, 50_000, 100_000, 200_000])
    fe_scaling_steps: List[int] = Field(default_factory=lambda: [25_000, 50_000, 100_000, 200_000])
    matched_target: Optional[float] = Field(None, ge=0.0, le=1.0)
    naive_lr_candidates: List[float] = Field(default_factory=lambda: [1.5e-4, 2.5e-4, 1.5e-5])

    @field_validator("hd_scaling_steps", "fe_scaling_steps")
    @classmethod
    def _strictly_increasing(cls, value: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"크기 목록은 엄격히 증가해야 합니다: {value}")
        return value


class LabConfig(_StrictModel):
    """전체 실험 설정 (설정 파일 최상위)"""

    env: EnvParams = Field(default_factory=EnvParams)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    bc: BCConfig = Field(default_factory=BCConfig)
    ppo: PPOConfig = Field(default_factory=PPOConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    vpt: VPTConfig = Field(default_factory=VPTConfig)
    demo: DemoConfig = Field(default_factory=DemoConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    harness: HarnessConfig = Field(default_factory=HarnessConfig)

    @model_validator(mode="after")
    def _check_policy_geometry(self) -> "LabConfig":
        expected = PolicyConfig.for_env(self.env)
        for name in ("patch_depth", "patch_width", "num_cell_codes", "num_categories"):
            if getattr(self.policy, name) != getattr(expected, name):
                raise ValueError(
                    f"policy.{name}={getattr(self.policy, name)} 가 env 관측 형태"
                    f"({getattr(expected, name)})와 다릅니다"
                )
        return self


def format_validation_error(error: ValidationError, prefix: str = "") -> str:
    """pydantic 에러를 필드 경로별 메시지로 변환"""
    lines = []
    for item in error.errors():
        loc = ".".join(str(part) for part in item["loc"])
        if prefix:
            loc = f"{prefix}.{loc}" if loc else prefix
        lines.append(f"{loc or '<root>'}: {item['msg']}")
    return "\n".join(lines)


def load_config(path: Union[str, Path, None] = None) -> LabConfig:
    """
    JSON 설정 파일 로드

    Args:
        path: 설정 파일 경로 (None 이면 기본값)

    Returns:
        검증된 LabConfig

    Raises:
        ConfigError: 파일이 없거나 필드 검증 실패 시
    """
    if path is None:
        return LabConfig()

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"설정 파일이 존재하지 않음: {path}")

    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON 파싱 실패 ({path}): {e}") from e

    if not isinstance(raw, dict):
        raise ConfigError(f"설정 파일 최상위는 객체여야 합니다: {path}")

    try:
        return LabConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e


def config_hash(config: BaseModel) -> str:
    """정렬된 JSON 직렬화의 SHA-256 앞 16자"""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def data_dir(default: Union[str, Path] = "data") -> Path:
    """데이터셋 루트 (.env 또는 PIRLNAV_DATA_DIR 로 덮어쓰기)"""
    load_dotenv()
    override = os.getenv(DATA_DIR_ENV)
    return Path(override) if override else Path(default)


def default_phase_knots(total_steps: int) -> Tuple[int, int]:
    """300 단위 비율(8/300, 12/300)로 계산한 기본 S₁, S₂"""
    return (8 * total_steps) // 300, (12 * total_steps) // 300


def ceil_fraction(fraction: float, count: int) -> int:
    """ceil(fraction × count), 부동소수 오차를 흡수"""
    return max(1, math.ceil(fraction * count - 1e-9))
