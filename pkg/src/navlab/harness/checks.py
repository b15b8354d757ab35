"""
방향성 판정

report 의 표에서 recipe 별 비교 주장을 판정합니다. 판정 결과는 report 에 기록될 뿐
실패해도 예외를 던지지 않습니다.

"margin" = 평균 차이 > 2 × pooled 표준오차 (√(se_a² + se_b²)).
"""

import math
from typing import Any, Dict, List, Optional, Sequence

PASS = "pass"
FAIL = "fail"
INSUFFICIENT = "insufficient"


def _check(name: str, description: str, status: str, detail: str) -> Dict[str, Any]:
    return {"name": name, "description": description, "status": status, "detail": detail}


def pooled_stderr(a: Dict[str, Any], b: Dict[str, Any], key: str = "success") -> Optional[float]:
    se_a, se_b = a.get(f"{key}_stderr"), b.get(f"{key}_stderr")
    if se_a is None or se_b is None:
        return None
    return math.sqrt(se_a**2 + se_b**2)


def beats_with_margin(a: Optional[Dict[str, Any]], b: Optional[Dict[str, Any]]) -> Optional[bool]:
    """a 의 success 가 b 보다 margin 이상 높은지 (판정 불가면 None)"""
    if a is None or b is None or a.get("success_mean") is None or b.get("success_mean") is None:
        return None
    pooled = pooled_stderr(a, b)
    if pooled is None:
        return None
    return a["success_mean"] - b["success_mean"] > 2.0 * pooled


def _fmt(row: Optional[Dict[str, Any]]) -> str:
    if row is None or row.get("success_mean") is None:
        return "n/a"
    se = row.get("success_stderr")
    return f"{row['success_mean']:.3f}" + ("" if se is None else f"±{se:.3f}")


def _ordering(rows: Dict[str, Dict[str, Any]], names: Sequence[str], label: str, description: str):
    """names[0] > names[1] > ... 를 인접 쌍마다 margin 으로 판정"""
    verdicts = [beats_with_margin(rows.get(a), rows.get(b)) for a, b in zip(names, names[1:])]
    detail = " > ".join(f"{n} {_fmt(rows.get(n))}" for n in names)
    if any(v is None for v in verdicts):
        return _check(label, description, INSUFFICIENT, detail)
    return _check(label, description, PASS if all(verdicts) else FAIL, detail)


def _demo_source_ordering(rows) -> List[Dict[str, Any]]:
    return [
        _ordering(
            rows,
            ["eval-bc-hd", "eval-bc-fe", "eval-bc-sp"],
            "demo-source-ordering",
            "BC val success: HD > FE > SP (margin)",
        )
    ]


def _two_phase_beats_naive(rows) -> List[Dict[str, Any]]:
    naive, full = rows.get("eval-rl-naive"), rows.get("eval-rl-pirlnav")
    verdict = beats_with_margin(full, naive)
    middle = ["eval-rl-critic-learning", "eval-rl-critic-decay", "eval-rl-actor-warmup"]
    placements = []
    for name in middle:
        row = rows.get(name)
        if row is None or row.get("success_mean") is None or None in (naive, full):
            placements.append(f"{name} n/a")
            continue
        low, high = naive["success_mean"], full["success_mean"]
        between = min(low, high) <= row["success_mean"] <= max(low, high)
        close = beats_with_margin(row, naive) is False or beats_with_margin(full, row) is False
        placements.append(f"{name} {_fmt(row)} {'between' if between else 'outside'}")
        if not between and close:
            placements[-1] += " (이웃과 구분 불가)"
    detail = f"pirlnav {_fmt(full)} vs naive {_fmt(naive)}; " + "; ".join(placements)
    status = INSUFFICIENT if verdict is None else (PASS if verdict else FAIL)
    return [_check("two-phase-beats-naive", "2단계 finetuning > naive (margin)", status, detail)]


def _naive_early_drop(probes: Dict[str, Dict[str, Any]]) -> List[Dict[str, Any]]:
    naive, full = probes.get("rl-naive"), probes.get("rl-pirlnav")
    description = "naive 의 5% 지점 probe 가 시작보다 0.05 이상 낮은 seed 가 2/3 이상, 2단계는 아님"
    if naive is None or full is None or naive["n_seeds"] < 3:
        return [_check("naive-early-drop", description, INSUFFICIENT, "seed 3개 이상 필요")]
    required = math.ceil(2 * naive["n_seeds"] / 3)
    detail = (
        f"naive {naive['seeds_with_drop']}/{naive['n_seeds']}, "
        f"pirlnav {full['seeds_with_drop']}/{full['n_seeds']} (필요 {required})"
    )
    ok = naive["seeds_with_drop"] >= required and full["seeds_with_drop"] < required
    return [_check("naive-early-drop", description, PASS if ok else FAIL, detail)]


def _diminishing_returns(scaling: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    description = "Δ(RL-FT − BC) 가 크기에 따라 증가하지 않음 (1 stderr 안의 역전 1회 허용)"
    deltas = [r for r in scaling if r.get("delta_mean") is not None]
    if len(deltas) < 3:
        return [_check("diminishing-returns", description, INSUFFICIENT, "크기 3개 이상 필요")]
    inversions, tolerated = 0, True
    for prev, cur in zip(deltas, deltas[1:]):
        rise = cur["delta_mean"] - prev["delta_mean"]
        if rise <= 0:
            continue
        inversions += 1
        se = [r.get("delta_stderr") for r in (prev, cur)]
        if None in se or rise > math.sqrt(se[0] ** 2 + se[1] ** 2):
            tolerated = False
    detail = ", ".join(f"{r['size']}: {r['delta_mean']:+.3f}" for r in deltas)
    ok = inversions == 0 or (inversions == 1 and tolerated)
    return [_check("diminishing-returns", description, PASS if ok else FAIL, detail)]


def _fe_saturation(scaling: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    description = "가장 큰 두 크기의 BC 차이 < 가장 작은 두 크기의 향상"
    bc = [r for r in scaling if r.get("bc_mean") is not None]
    if len(bc) < 3:
        return [_check("fe-saturation", description, INSUFFICIENT, "크기 3개 이상 필요")]
    head = bc[1]["bc_mean"] - bc[0]["bc_mean"]
    tail = abs(bc[-1]["bc_mean"] - bc[-2]["bc_mean"])
    detail = f"작은 쪽 향상 {head:+.3f}, 큰 쪽 차이 {tail:.3f}"
    return [_check("fe-saturation", description, PASS if tail < head else FAIL, detail)]


def _adversarial(rows) -> List[Dict[str, Any]]:
    checks = [
        _ordering(
            rows,
            ["eval-sp-favoring-rl-hd", "eval-sp-favoring-rl-sp"],
            "adversarial-flip",
            "SP 에 유리한 split 에서 RL-FT(HD) > RL-FT(SP) (margin)",
        )
    ]
    for split, disfavored in (("sp-favoring", "bc-hd"), ("hd-favoring", "bc-sp")):
        row = rows.get(f"eval-{split}-{disfavored}")
        if row is None or row.get("success_mean") is None:
            status, detail = INSUFFICIENT, "n/a"
        else:
            status = PASS if row["success_mean"] == 0.0 else FAIL
            detail = _fmt(row)
        checks.append(
            _check(
                f"adversarial-zero-{split}",
                f"{split} split 에서 불리한 BC 의 success 0",
                status,
                detail,
            )
        )
    return checks


# source 간 데모 step 수의 허용 상대 차이
DEMO_BUDGET_TOLERANCE = 0.01


def _demo_budget_parity(demo_rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    """seed 마다 source 별 데이터셋 step 수가 서로 tolerance 안에 있는지"""
    label = "demo-budget-parity"
    description = f"seed 별 데모 step 수의 상대 차이 ≤ {DEMO_BUDGET_TOLERANCE:.0%}"
    by_seed: Dict[str, Dict[str, int]] = {}
    for row in demo_rows:
        for seed, total in row["total_steps_by_seed"].items():
            by_seed.setdefault(seed, {})[row["stage"]] = total
    compared = {seed: totals for seed, totals in by_seed.items() if len(totals) >= 2}
    if not compared:
        return _check(label, description, INSUFFICIENT, "비교할 데모 스테이지가 2개 미만")

    worst_seed, worst_gap = None, 0.0
    for seed, totals in sorted(compared.items()):
        high = max(totals.values())
        gap = (high - min(totals.values())) / high if high > 0 else 0.0
        if worst_seed is None or gap > worst_gap:
            worst_seed, worst_gap = seed, gap
    detail = f"seed {worst_seed}: " + ", ".join(
        f"{stage} {total}" for stage, total in sorted(compared[worst_seed].items())
    )
    return _check(label, description, PASS if worst_gap <= DEMO_BUDGET_TOLERANCE else FAIL, detail)


def acceptance_checks(report: Dict[str, Any]) -> List[Dict[str, Any]]:
    """
    recipe 에 해당하는 방향성 판정 목록

    Args:
        report: build_report 의 tables 를 포함한 딕셔너리

    Returns:
        [{"name", "description", "status" (pass/fail/insufficient), "detail"}]
    """
    tables = report["tables"]
    checks = _recipe_checks(report["recipe"], tables)
    demo_rows = tables.get("demos", [])
    if len(demo_rows) >= 2:
        checks.append(_demo_budget_parity(demo_rows))
    return checks


def _recipe_checks(recipe: str, tables: Dict[str, Any]) -> List[Dict[str, Any]]:
    rows = {r["stage"]: r for r in tables["eval"]}
    probes = {r["stage"]: r for r in tables["probes"]}
    if recipe == "demo-sources":
        return _demo_source_ordering(rows)
    if recipe == "finetune-ablation":
        return _two_phase_beats_naive(rows)
    if recipe == "naive-drop":
        return _naive_early_drop(probes)
    if recipe == "hd-scaling":
        return _diminishing_returns(tables["scaling"])
    if recipe == "fe-scaling":
        return _fe_saturation(tables["scaling"])
    if recipe == "adversarial-splits":
        return _adversarial(rows)
    return []
