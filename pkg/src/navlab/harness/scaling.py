"""
데이터셋 크기 스케일링 곡선

success(n) = a − b·exp(−c·n) 적합. a 는 [관측 최댓값, 1] 로 제한합니다.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

from common.models import ScalingCurve, ScalingPoint

from .base import HarnessError

SATURATING_FORM = "a - b*exp(-c*n)"


def saturating(n: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    return a - b * np.exp(-c * n)


def fit_saturating(
    sizes: Sequence[int], values: Sequence[float]
) -> Tuple[Dict[str, float], List[float]]:
    """
    포화 지수 곡선 적합

    크기를 최댓값으로 나눠 적합한 뒤 c 를 원래 단위로 되돌립니다.

    Args:
        sizes: 데이터셋 크기 (step)
        values: 크기별 성공률

    Returns:
        ({"a", "b", "c"}, 크기별 잔차 y − ŷ)

    Raises:
        HarnessError: 점이 3개 미만이거나 적합이 수렴하지 않을 때
    """
    n = np.asarray(sizes, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if n.shape != y.shape or n.size < 3:
        raise HarnessError(f"포화 곡선 적합에는 3개 이상의 점이 필요합니다: {n.size}")
    if not np.all(np.isfinite(y)):
        raise HarnessError("성공률에 nan/inf 가 있습니다")

    scale = float(n.max())
    x = n / scale
    a_lo = float(y.max())
    a_hi = max(1.0, a_lo + 1e-9)
    a0 = 0.5 * (a_lo + a_hi)
    p0 = [a0, max(a0 - float(y.min()), 1e-3), 3.0]
    bounds = ([a_lo, 0.0, 0.0], [a_hi, np.inf, np.inf])
    try:
        popt, _ = curve_fit(saturating, x, y, p0=p0, bounds=bounds, max_nfev=10_000)
    except (RuntimeError, ValueError) as e:
        raise HarnessError(f"포화 곡선 적합 실패: {e}") from e

    a, b, c_scaled = (float(v) for v in popt)
    a = min(max(a, a_lo), max(a_lo, 1.0))
    params = {"a": a, "b": b, "c": c_scaled / scale}
    residuals = y - saturating(n, params["a"], params["b"], params["c"])
    return params, [float(r) for r in residuals]


def scaling_curve(
    source: str, points: Sequence[ScalingPoint], target: str = "bc_success"
) -> ScalingCurve:
    """
    점 목록으로 ScalingCurve 생성

    target 값이 없는 점이 있거나 점이 3개 미만이면 params/residuals 는 비어 있습니다.

    Raises:
        HarnessError: target 이 bc_success / rlft_success 가 아니거나 적합 실패
    """
    if target not in ("bc_success", "rlft_success"):
        raise HarnessError(f"알 수 없는 적합 대상: {target}")
    points = sorted(points, key=lambda p: p.size)
    curve = ScalingCurve(source=source, target=target, points=points, form=SATURATING_FORM)
    values = [getattr(p, target) for p in points]
    if len(points) < 3 or any(v is None for v in values):
        return curve
    params, residuals = fit_saturating([p.size for p in points], values)
    return curve.model_copy(update={"params": params, "residuals": residuals})
