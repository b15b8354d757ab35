"""
evaluation 테스트

SPL, 실패 태깅, controller 평가, adversarial split, 결과 저장
"""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest

# src 경로 추가
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root / "src"))

from common.config import EnvParams, EvalConfig, PolicyConfig  # noqa: E402
from common.models import EvalRecord, FailureTag, Split  # noqa: E402
from navlab.evaluation import (  # noqa: E402
    EvaluationError,
    OracleController,
    PolicyController,
    RandomController,
    build_adversarial_split,
    evaluate,
    evaluate_checkpoint,
    failure_histogram,
    load_eval_output,
    select_episodes,
    spl,
    summarize,
    tag_failure,
    write_eval_output,
)
from navlab.gridnav import WorldRegistry, generate_suite, seeds_for_split  # noqa: E402
from navlab.policy import init_policy, save_policy  # noqa: E402

PARAMS = EnvParams()


@pytest.fixture(scope="module")
def val_suite():
    registry = WorldRegistry(PARAMS)
    seeds = seeds_for_split(Split.VAL, 25, PARAMS.val_percent)
    return registry, generate_suite(registry, seeds, 4, seed=0)


@pytest.fixture(scope="module")
def policy():
    config = PolicyConfig.for_env(PARAMS, d_vis=8, aux_dim=4, hidden_size=8, cell_embed_dim=3)
    return init_policy(config, np.random.default_rng(0))


def make_record(**overrides):
    values = dict(
        episode_id="0-train-0",
        success=False,
        path_len=10,
        geodesic_len=8,
        steps=40,
        goal_ever_in_view=False,
        final_distance_to_goal=9,
        visit_histogram={"1,1": 1, "1,2": 2},
    )
    values.update(overrides)
    return EvalRecord(**values)


# SPL


def test_spl_examples():
    print("테스트 1: SPL")

    assert spl(True, 10, 10) == 1.0
    assert spl(True, 10, 20) == 0.5
    assert spl(False, 10, 10) == 0.0
    assert spl(False, 10, 0) == 0.0
    # p < l (성공 반경 안에서 멈춤) 이어도 1 을 넘지 않음
    assert spl(True, 10, 8) == 1.0
    print("  ✓ 1.0 / 0.5 / 0")


def test_spl_rejects_bad_lengths():
    with pytest.raises(EvaluationError):
        spl(True, 0, 3)
    with pytest.raises(EvaluationError):
        spl(True, 3, -1)


# 실패 태깅


def test_tag_failure_priority():
    print("\n테스트 2: 실패 태깅")

    assert tag_failure(make_record(success=True, final_distance_to_goal=0)) == FailureTag.NONE
    # 종료 거리 2 ≤ 2·R → LAST_MILE (목표를 봤더라도)
    near = make_record(final_distance_to_goal=2, goal_ever_in_view=True)
    assert tag_failure(near, success_radius=1) == FailureTag.LAST_MILE
    assert tag_failure(make_record(final_distance_to_goal=3), success_radius=1) != FailureTag.LAST_MILE
    # 목표를 본 뒤 멀리서 시간 초과
    seen = make_record(goal_ever_in_view=True, final_distance_to_goal=12)
    assert tag_failure(seen) == FailureTag.RECOGNITION
    # 두 셀을 30 번 왕복
    pacing = make_record(visit_histogram={"3,3": 30, "3,4": 30})
    assert tag_failure(pacing) == FailureTag.LOOPING
    assert tag_failure(pacing, loop_threshold=31) == FailureTag.EXPLORATION
    assert tag_failure(make_record()) == FailureTag.EXPLORATION
    print("  ✓ LAST_MILE → RECOGNITION → LOOPING → EXPLORATION")


def test_failure_histogram_partitions_failures():
    records = [
        make_record(success=True, failure_tag=FailureTag.NONE),
        make_record(failure_tag=FailureTag.LOOPING),
        make_record(failure_tag=FailureTag.LOOPING),
        make_record(failure_tag=FailureTag.EXPLORATION),
    ]
    histogram = failure_histogram(records)
    assert histogram == {"LAST_MILE": 0, "RECOGNITION": 0, "LOOPING": 2, "EXPLORATION": 1}
    assert sum(histogram.values()) == sum(not r.success for r in records)


def test_summarize_rejects_empty():
    with pytest.raises(EvaluationError):
        summarize([])


# controller 평가


def test_oracle_scores_perfect(val_suite):
    """최단 경로 controller → success = SPL = 1"""
    print("\n테스트 3: oracle controller")

    registry, episodes = val_suite
    result = evaluate(OracleController(registry), episodes, registry, EvalConfig(episodes=100))
    assert result.summary.n == 100
    assert result.summary.success == 1.0
    assert result.summary.spl == 1.0
    assert all(r.failure_tag == FailureTag.NONE for r in result.records)
    print(f"  ✓ success {result.summary.success:.2f}, SPL {result.summary.spl:.2f}")


def test_random_controller_rarely_succeeds(val_suite):
    print("\n테스트 4: random controller")

    registry, episodes = val_suite
    result = evaluate(RandomController(), episodes, registry, EvalConfig(episodes=100))
    assert result.summary.success < 0.10
    failures = sum(not r.success for r in result.records)
    assert sum(result.summary.failure_histogram.values()) == failures
    for record in result.records:
        assert spl(record.success, record.geodesic_len, record.path_len) <= float(record.success)
    print(f"  ✓ success {result.summary.success:.3f}")


def test_evaluation_is_pure_and_worker_independent(val_suite, policy):
    registry, episodes = val_suite
    controller = PolicyController(policy, mode="sample")
    one = evaluate(controller, episodes, registry, EvalConfig(mode="sample", episodes=20, workers=1))
    four = evaluate(controller, episodes, registry, EvalConfig(mode="sample", episodes=20, workers=4))
    assert one.records == four.records
    assert [r.episode_id for r in one.records] == [e.episode_id for e in episodes[:20]]


def test_evaluate_rejects_empty_episode_list(val_suite):
    registry, _ = val_suite
    with pytest.raises(EvaluationError):
        evaluate(RandomController(), [], registry)


def test_evaluate_logs_truncated_episode_list(val_suite, caplog):
    """설정된 episodes 보다 많이 주면 앞부분만 평가하고 그 사실을 기록"""
    registry, episodes = val_suite
    root = logging.getLogger("navlab")
    root.addHandler(caplog.handler)
    try:
        result = evaluate(OracleController(registry), episodes, registry, EvalConfig(episodes=5))
    finally:
        root.removeHandler(caplog.handler)

    assert result.summary.n == 5
    assert [r.episode_id for r in result.records] == [e.episode_id for e in episodes[:5]]
    assert any(f"{len(episodes)} 개 중 앞의 5 개" in m for m in caplog.messages)


def test_policy_controller_rejects_unknown_mode(policy):
    with pytest.raises(EvaluationError):
        PolicyController(policy, mode="greedy")


def test_evaluate_checkpoint_matches_in_memory_policy(val_suite, policy, tmp_path):
    registry, episodes = val_suite
    path = save_policy(tmp_path / "policy.ckpt", policy, step=0, config_hash="test", phase="bc")
    config = EvalConfig(episodes=10, workers=2)

    from_file = evaluate_checkpoint(path, episodes, registry, config)
    in_memory = evaluate(PolicyController(policy), episodes, registry, config)
    assert from_file.records == in_memory.records

    with pytest.raises(EvaluationError):
        evaluate_checkpoint(tmp_path / "missing.ckpt", episodes, registry, config)


# adversarial split


def test_adversarial_split_examples():
    print("\n테스트 5: adversarial split")

    ids = ["a", "b", "c", "d"]
    a_all = [make_record(episode_id=i, success=True) for i in ids]
    b_all = [make_record(episode_id=i, success=True) for i in ids]
    assert build_adversarial_split(a_all, b_all) == set()

    # 성공이 서로소이고 모든 에피소드를 덮음 → B 의 실패 집합
    a = [make_record(episode_id=i, success=i in ("a", "b")) for i in ids]
    b = [make_record(episode_id=i, success=i in ("c", "d")) for i in ids]
    assert build_adversarial_split(a, b) == {"a", "b"}

    # 둘 다 실패한 에피소드 포함
    a = [make_record(episode_id=i, success=i == "a") for i in ids]
    b = [make_record(episode_id=i, success=i == "b") for i in ids]
    assert build_adversarial_split(a, b) == {"a", "c", "d"}
    print("  ✓ 빈 split / B 실패 집합 / 둘 다 실패 포함")


def test_adversarial_split_requires_same_episodes():
    a = [make_record(episode_id="a")]
    b = [make_record(episode_id="b")]
    with pytest.raises(EvaluationError):
        build_adversarial_split(a, b)


def test_disadvantaged_controller_scores_zero_on_split(val_suite):
    registry, episodes = val_suite
    config = EvalConfig(episodes=40)
    oracle = evaluate(OracleController(registry), episodes, registry, config)
    random = evaluate(RandomController(), episodes, registry, config)

    split = build_adversarial_split(oracle.records, random.records)
    assert split
    rerun = evaluate(RandomController(), select_episodes(episodes, split), registry, config)
    assert rerun.summary.success == 0.0


# 결과 저장


def test_eval_output_roundtrip(val_suite, tmp_path):
    registry, episodes = val_suite
    result = evaluate(RandomController(), episodes, registry, EvalConfig(episodes=12))
    write_eval_output(result, tmp_path / "eval")

    assert (tmp_path / "eval" / "summary.json").exists()
    loaded = load_eval_output(tmp_path / "eval")
    assert loaded.records == result.records
    assert loaded.summary == result.summary

    (tmp_path / "eval" / "summary.json").write_text("{}", encoding="utf-8")
    with pytest.raises(EvaluationError):
        load_eval_output(tmp_path / "eval")


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-s"])
