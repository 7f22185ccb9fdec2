"""
스케일링 법칙 bounded 비선형 최소제곱 피팅

[주요 기능]
1. solve_bounded_least_squares: Levenberg-Marquardt + 매끄러운 bound 재매개변수화
   - 양쪽 bound: lo + (hi - lo) * logistic(z)
   - 한쪽 bound: lo + s * softplus(z) / hi - s * softplus(z)
   - damping lambda: 1e-3 시작, 채택 시 x0.5, 거부 시 x4 (Marquardt 대각 스케일링)
2. fit_saturating_power_law / fit_joint_law: 멀티스타트 (시드는 config.seed 에서만 파생)
3. pareto_frontier / fit_compute_frontier: compute 효율 frontier 추출 후 피팅
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (DegenerateVarianceError, DivergentStartError, DomainError,
                     InsufficientFrontierDataError, InvalidConfigError, InvalidInputError)
from .laws import JOINT, SATURATING, LawFamily, law_from_dict
from .stats import r_squared as r_squared_stat

logger = logging.getLogger(__name__)

# LM damping
LAMBDA_INIT = 1e-3
LAMBDA_ACCEPT = 0.5
LAMBDA_REJECT = 4.0
LAMBDA_MAX = 1e16

# step 이 더 이상 채택되지 않을 때 수렴으로 인정하는 상대 RSS
STALLED_RSS_FACTOR = float(np.finfo(np.float64).eps)

# 재매개변수화 내부 좌표 clip (bound 에 정확히 닿지 않도록)
LOGISTIC_CLIP = 35.0
SOFTPLUS_FLOOR = -700.0

# 식별성 판정
IDENTIFIABILITY_DROP = 0.2
IDENTIFIABILITY_SHIFT = 0.5
CONDITION_THRESHOLD = 1e-8


@dataclass
class FitConfig:
    """피팅 설정"""
    max_iterations: int = 5000
    bounds: Optional[Dict[str, Tuple[float, float]]] = None
    rss_tolerance: float = 1e-10
    gradient_tolerance: float = 1e-10
    multi_start: int = 16
    seed: int = 0
    check_identifiability: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidConfigError(f"max_iterations 는 1 이상이어야 합니다: {self.max_iterations}")
        if not self.rss_tolerance > 0 or not self.gradient_tolerance > 0:
            raise InvalidConfigError("허용오차는 양수여야 합니다")
        if self.multi_start < 1:
            raise InvalidConfigError(f"multi_start 는 1 이상이어야 합니다: {self.multi_start}")
        for name, (lo, hi) in (self.bounds or {}).items():
            if not lo < hi:
                raise InvalidConfigError(f"{name} bound 는 lo < hi 여야 합니다: [{lo}, {hi}]")

    def bounds_for(self, family: LawFamily) -> List[Tuple[float, float]]:
        """패밀리 기본 bounds 에 사용자 지정 bounds 덮어쓰기"""
        overrides = dict(self.bounds or {})
        unknown = set(overrides) - set(family.param_names)
        if unknown:
            raise InvalidConfigError(f"{family.name} 에 없는 파라미터 bound: {sorted(unknown)}")
        return [tuple(map(float, overrides.get(name, default)))
                for name, default in zip(family.param_names, family.default_bounds)]


@dataclass
class FitResult:
    """피팅 결과"""
    family: str
    variable: Optional[str]
    param_names: Tuple[str, ...]
    params: Tuple[float, ...]
    rss: float
    r_squared: Optional[float]
    iterations: int
    converged: bool
    residuals: List[float]
    inputs: List[List[float]]
    observed: List[float]
    predicted: List[float]
    starts_attempted: int = 1
    rss_trace: List[float] = field(default_factory=list)
    non_identifiable: bool = False
    underdetermined: bool = False
    warnings: List[str] = field(default_factory=list)
    frontier: Optional[List[Tuple[float, float]]] = None

    @property
    def parameters(self) -> Dict[str, float]:
        return dict(zip(self.param_names, self.params))

    @property
    def law(self):
        return law_from_dict(self.family, self.parameters, self.variable or "rank")


# ===================================================================
# bound 재매개변수화
# ===================================================================

def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softplus(z):
    return np.logaddexp(0.0, z)


class _BoundMap:
    """제약 없는 내부 좌표 z <-> bound 안의 파라미터 theta"""

    def __init__(self, bounds: Sequence[Tuple[float, float]], init: np.ndarray):
        self.lo = np.array([b[0] for b in bounds], dtype=np.float64)
        self.hi = np.array([b[1] for b in bounds], dtype=np.float64)
        self.two_sided = np.isfinite(self.lo) & np.isfinite(self.hi)
        self.lower_only = np.isfinite(self.lo) & ~np.isfinite(self.hi)
        self.upper_only = ~np.isfinite(self.lo) & np.isfinite(self.hi)
        # 한쪽 bound 의 스케일은 시작점까지의 거리로 고정
        gap = np.where(self.lower_only, init - self.lo,
                       np.where(self.upper_only, self.hi - init, 1.0))
        self.scale = np.where(gap > 0, gap, 1.0)

    def to_internal(self, theta: np.ndarray) -> np.ndarray:
        z = np.array(theta, dtype=np.float64)
        two = self.two_sided
        frac = (theta[two] - self.lo[two]) / (self.hi[two] - self.lo[two])
        z[two] = np.log(frac) - np.log1p(-frac)
        lower = self.lower_only
        z[lower] = np.log(np.expm1((theta[lower] - self.lo[lower]) / self.scale[lower]))
        upper = self.upper_only
        z[upper] = np.log(np.expm1((self.hi[upper] - theta[upper]) / self.scale[upper]))
        return z

    def clip(self, z: np.ndarray) -> np.ndarray:
        z = z.copy()
        z[self.two_sided] = np.clip(z[self.two_sided], -LOGISTIC_CLIP, LOGISTIC_CLIP)
        one_sided = self.lower_only | self.upper_only
        z[one_sided] = np.maximum(z[one_sided], SOFTPLUS_FLOOR)
        return z

    def to_external(self, z: np.ndarray) -> np.ndarray:
        theta = np.array(z, dtype=np.float64)
        two = self.two_sided
        theta[two] = self.lo[two] + (self.hi[two] - self.lo[two]) * _logistic(z[two])
        lower = self.lower_only
        theta[lower] = self.lo[lower] + self.scale[lower] * _softplus(z[lower])
        upper = self.upper_only
        theta[upper] = self.hi[upper] - self.scale[upper] * _softplus(z[upper])
        return theta

    def derivative(self, z: np.ndarray) -> np.ndarray:
        """d theta / d z"""
        deriv = np.ones_like(z)
        two = self.two_sided
        s = _logistic(z[two])
        deriv[two] = (self.hi[two] - self.lo[two]) * s * (1.0 - s)
        lower = self.lower_only
        deriv[lower] = self.scale[lower] * _logistic(z[lower])
        upper = self.upper_only
        deriv[upper] = -self.scale[upper] * _logistic(z[upper])
        return deriv


# ===================================================================
# LM 솔버
# ===================================================================

def _split_data(data, n_inputs: int) -> Tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != n_inputs + 1:
        raise InvalidInputError(f"데이터는 (입력 {n_inputs}개, q) 튜플 목록이어야 합니다")
    if arr.shape[0] < 1:
        raise InvalidInputError("데이터 포인트가 1개 이상 필요합니다")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("데이터에 NaN/Inf 값이 있습니다")
    inputs, q = arr[:, :n_inputs], arr[:, n_inputs]
    if np.any(inputs <= 0):
        raise DomainError("법칙 입력값은 모두 양수여야 합니다")
    return inputs, q


def _residuals(model: LawFamily, theta, inputs, q) -> np.ndarray:
    with np.errstate(all='ignore'):
        return q - model.predict(theta, inputs)


def _r_squared_or_none(q: np.ndarray, predicted: np.ndarray) -> Optional[float]:
    if q.size < 2:
        return None
    try:
        return r_squared_stat(q, predicted)
    except DegenerateVarianceError:
        return None


def solve_bounded_least_squares(model: LawFamily, data, init, config: FitConfig,
                                variable: Optional[str] = None) -> FitResult:
    """
    한 시작점에서 bounded LM 피팅

    잔차 r_i = q_i - law(x_i; theta), 해석적 Jacobian 사용.
    종료: 반복 상한, RSS 상대 변화(실제/예측 모두) < rss_tolerance,
    잔차-Jacobian 열 코사인 최대값 < gradient_tolerance,
    또는 더 이상 RSS 를 줄이는 step 이 없을 때 (이때는 RSS 가 반올림 수준이어야 converged).
    채택된 step 은 RSS 를 늘리지 않습니다.
    """
    inputs, q = _split_data(data, model.n_inputs)
    bounds = config.bounds_for(model)
    theta = np.asarray(init, dtype=np.float64).ravel()
    if theta.size != model.n_params:
        raise InvalidConfigError(f"초기값 개수가 {model.n_params} 개여야 합니다 (받음: {theta.size})")
    for name, value, (lo, hi) in zip(model.param_names, theta, bounds):
        if not lo < value < hi:
            raise InvalidConfigError(f"초기값 {name}={value} 가 bound ({lo}, {hi}) 밖입니다")

    bound_map = _BoundMap(bounds, theta)
    z = bound_map.to_internal(theta)
    theta = bound_map.to_external(z)
    r = _residuals(model, theta, inputs, q)
    if not np.any(np.isfinite(r)):
        raise DivergentStartError(f"초기값에서 모든 잔차가 유한하지 않습니다: {theta.tolist()}")
    if not np.all(np.isfinite(r)):
        raise DivergentStartError(f"초기값에서 일부 잔차가 유한하지 않습니다: {theta.tolist()}")

    rss = float(r @ r)
    tiny_rss = 1e-30 * max(float(q @ q), 1.0)
    stalled_rss = STALLED_RSS_FACTOR * max(float(q @ q), 1.0)
    lam = LAMBDA_INIT
    trace = [rss]
    converged = False
    iterations = 0

    while iterations < config.max_iterations:
        if rss <= tiny_rss:
            converged = True
            break
        iterations += 1

        with np.errstate(all='ignore'):
            jac = -model.jac(theta, inputs) * bound_map.derivative(z)
        if not np.all(np.isfinite(jac)):
            logger.debug("Jacobian 에 유한하지 않은 값 -> 종료")
            break
        grad = jac.T @ r
        # 스케일 무관 기울기 기준: 잔차와 Jacobian 열 사이 코사인
        col_norms = np.linalg.norm(jac, axis=0)
        active = col_norms > 0
        cosine = np.abs(grad[active]) / (col_norms[active] * math.sqrt(rss))
        if cosine.size == 0 or np.max(cosine) <= config.gradient_tolerance:
            converged = True
            break

        hessian = jac.T @ jac
        scaling = np.diag(hessian).copy()
        scaling = np.maximum(scaling, 1e-12 * max(float(np.max(scaling)), 1e-300))

        accepted = False
        while lam <= LAMBDA_MAX:
            try:
                step = np.linalg.solve(hessian + lam * np.diag(scaling), -grad)
            except np.linalg.LinAlgError:
                lam *= LAMBDA_REJECT
                continue
            z_new = bound_map.clip(z + step)
            theta_new = bound_map.to_external(z_new)
            r_new = _residuals(model, theta_new, inputs, q)
            with np.errstate(all='ignore'):
                rss_new = float(r_new @ r_new)
            if np.isfinite(rss_new) and rss_new < rss:
                linear = r + jac @ (z_new - z)
                predicted_reduction = rss - float(linear @ linear)
                actual_reduction = rss - rss_new
                z, theta, r, rss = z_new, theta_new, r_new, rss_new
                lam *= LAMBDA_ACCEPT
                accepted = True
                break
            lam *= LAMBDA_REJECT

        if not accepted:
            # RSS 를 줄이는 step 없음: 잔차가 반올림 수준일 때만 수렴
            converged = rss <= stalled_rss
            if not converged:
                logger.debug(f"damped step 이 모두 실패 (rss={rss:.3e}, cosine={np.max(cosine):.3e}) -> 미수렴 종료")
            break
        trace.append(rss)

        if (actual_reduction <= config.rss_tolerance * trace[-2]
                and abs(predicted_reduction) <= config.rss_tolerance * trace[-2]):
            converged = True
            break

    with np.errstate(all='ignore'):
        predicted = model.predict(theta, inputs)
    r = q - predicted
    return FitResult(
        family=model.name,
        variable=variable,
        param_names=tuple(model.param_names),
        params=tuple(float(v) for v in theta),
        rss=rss,
        r_squared=_r_squared_or_none(q, predicted),
        iterations=iterations,
        converged=converged,
        residuals=[float(v) for v in r],
        inputs=[[float(v) for v in row] for row in inputs],
        observed=[float(v) for v in q],
        predicted=[float(v) for v in predicted],
        rss_trace=trace,
        underdetermined=q.size < model.n_params,
    )


# ===================================================================
# 멀티스타트
# ===================================================================

def _canonical_order(data, n_inputs: int) -> Tuple[np.ndarray, np.ndarray]:
    """입력 순서와 무관하도록 (입력..., q) 사전식 정렬. (정렬 데이터, 원래 순서 인덱스)"""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != n_inputs + 1:
        raise InvalidInputError(f"데이터는 (입력 {n_inputs}개, q) 튜플 목록이어야 합니다")
    order = np.lexsort(arr.T[::-1])
    return arr[order], order


def _interior(value: float, lo: float, hi: float) -> float:
    """bound 안쪽으로 살짝 당긴 값"""
    width = hi - lo if math.isfinite(hi - lo) else max(abs(value), 1.0)
    margin = 1e-6 * width
    low = lo + margin if math.isfinite(lo) else -math.inf
    high = hi - margin if math.isfinite(hi) else math.inf
    return float(min(max(value, low), high))


def _q_inf_candidates(q: np.ndarray) -> List[float]:
    """관측 최대값 근처, [max q, 1] 중간점, 1"""
    q_max = float(np.max(q))
    return [q_max + 0.1 * max(1.0 - q_max, 0.0) + 1e-3, 0.5 * (q_max + 1.0), 1.0]


def _log_uniform(rng: np.random.Generator, low: float, high: float) -> float:
    return float(math.exp(rng.uniform(math.log(low), math.log(high))))


def _anchor(x_sorted: np.ndarray, q_sorted: np.ndarray, level: float) -> Tuple[float, float]:
    index = int(round(level * (x_sorted.size - 1)))
    return float(x_sorted[index]), float(q_sorted[index])


def _saturating_starts(inputs: np.ndarray, q: np.ndarray, config: FitConfig,
                       bounds) -> List[np.ndarray]:
    """
    q_inf: 3개 후보 순환, x_c: 데이터 분위수에 고정 (곡선이 그 점을 지나도록),
    alpha: [0.1, 2] 로그균등
    """
    rng = np.random.default_rng(config.seed)
    x = inputs[:, 0]
    order = np.argsort(x, kind='stable')
    x_sorted, q_sorted = x[order], q[order]
    q_choices = _q_inf_candidates(q)
    n_levels = max(1, math.ceil(config.multi_start / len(q_choices)))
    levels = np.linspace(0.1, 0.9, n_levels) if n_levels > 1 else np.array([0.5])

    starts = []
    for i in range(config.multi_start):
        alpha = _log_uniform(rng, 0.1, 2.0)
        q_inf = _interior(q_choices[i % len(q_choices)], *bounds[2])
        x_a, q_a = _anchor(x_sorted, q_sorted, levels[(i // len(q_choices)) % n_levels])
        x_c = x_a * max(q_inf - q_a, 1e-3) ** (1.0 / alpha)
        starts.append(np.array([
            _interior(x_c, *bounds[0]),
            _interior(alpha, *bounds[1]),
            q_inf,
        ]))
    return starts


def _joint_starts(inputs: np.ndarray, q: np.ndarray, config: FitConfig,
                  bounds) -> List[np.ndarray]:
    """q_inf 후보 순환, n_c / d_c 는 분위수, 지수는 [-2, -0.1] 로그균등"""
    rng = np.random.default_rng(config.seed)
    n_sorted = np.sort(inputs[:, 0])
    d_sorted = np.sort(inputs[:, 1])
    q_choices = _q_inf_candidates(q)
    levels = np.linspace(0.2, 0.8, 3)

    starts = []
    for i in range(config.multi_start):
        alpha, alpha_n, alpha_d = (-_log_uniform(rng, 0.1, 2.0) for _ in range(3))
        level_n = levels[(i // len(q_choices)) % len(levels)]
        level_d = levels[(i // (len(q_choices) * len(levels))) % len(levels)]
        n_c = n_sorted[int(round(level_n * (n_sorted.size - 1)))]
        d_c = d_sorted[int(round(level_d * (d_sorted.size - 1)))]
        theta = [q_choices[i % len(q_choices)], alpha, n_c, alpha_n, d_c, alpha_d]
        starts.append(np.array([_interior(v, *b) for v, b in zip(theta, bounds)]))
    return starts


def _best_of_starts(model: LawFamily, data_sorted: np.ndarray, starts: List[np.ndarray],
                    config: FitConfig, variable: Optional[str]) -> FitResult:
    best = None
    best_key = None
    for index, init in enumerate(starts):
        try:
            result = solve_bounded_least_squares(model, data_sorted, init, config, variable)
        except DivergentStartError as e:
            logger.debug(f"start {index}: 발산 ({e})")
            continue
        logger.debug(f"start {index}: rss={result.rss:.3e}, iter={result.iterations}")
        key = (result.rss, result.iterations, index)
        if best_key is None or key < best_key:
            best, best_key = result, key
    if best is None:
        raise DivergentStartError(f"{model.name}: 모든 시작점({len(starts)}개)이 발산했습니다")
    best.starts_attempted = len(starts)
    return best


def _jacobian_ill_conditioned(model: LawFamily, theta: np.ndarray, inputs: np.ndarray) -> bool:
    """상대 민감도 행렬 J * |theta| 의 조건이 나쁘면 식별 불가로 간주"""
    with np.errstate(all='ignore'):
        rel = model.jac(theta, inputs) * np.abs(theta)
    if not np.all(np.isfinite(rel)) or rel.shape[0] < rel.shape[1]:
        return True
    singular = np.linalg.svd(rel, compute_uv=False)
    return bool(singular[0] == 0 or singular[-1] <= CONDITION_THRESHOLD * singular[0])


def _subset_shift(model: LawFamily, data_sorted: np.ndarray, best: FitResult,
                  config: FitConfig, variable: Optional[str]) -> bool:
    """20% 포인트를 빼고 다시 피팅했을 때 파라미터가 50% 넘게 움직이면 True"""
    n = data_sorted.shape[0]
    keep = n - max(1, int(round(IDENTIFIABILITY_DROP * n)))
    if keep < model.n_params:
        return False
    rng = np.random.default_rng(config.seed)
    subset = data_sorted[np.sort(rng.choice(n, size=keep, replace=False))]
    theta = np.asarray(best.params)
    try:
        refit = solve_bounded_least_squares(model, subset, theta, config, variable)
    except (DivergentStartError, InvalidConfigError):
        return True
    shifted = np.abs(np.asarray(refit.params) - theta) > IDENTIFIABILITY_SHIFT * np.abs(theta)
    return bool(np.any(shifted))


def _finish(model: LawFamily, order: np.ndarray, data_sorted: np.ndarray,
            best: FitResult, config: FitConfig, variable: Optional[str]) -> FitResult:
    """식별성 / 과소결정 플래그, 잔차를 원래 입력 순서로 되돌림"""
    inputs_sorted = data_sorted[:, :model.n_inputs]
    theta = np.asarray(best.params)

    if best.underdetermined:
        best.warnings.append("underdetermined")
        logger.warning(f"⚠️ {model.name}: 포인트({inputs_sorted.shape[0]}) < 파라미터({model.n_params})")
    if config.check_identifiability and (
            np.ptp(data_sorted[:, -1]) == 0
            or _jacobian_ill_conditioned(model, theta, inputs_sorted)
            or _subset_shift(model, data_sorted, best, config, variable)):
        best.non_identifiable = True
        best.warnings.append("non_identifiable")
        logger.warning(f"⚠️ {model.name}: 파라미터 식별이 불안정합니다 (non-identifiable)")

    # 원래 순서 복원
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    for name in ('residuals', 'inputs', 'observed', 'predicted'):
        values = getattr(best, name)
        setattr(best, name, [values[i] for i in inverse])

    logger.info(f"✅ {model.name} 피팅 완료: rss={best.rss:.3e}, r2={best.r_squared}, "
                f"iter={best.iterations}, starts={best.starts_attempted}")
    return best


def fit_saturating_power_law(data, config: FitConfig = None,
                             variable: str = "rank") -> FitResult:
    """(x, q) 데이터에 q_inf - (x_c/x)^alpha 피팅 (멀티스타트, 최소 RSS 선택)"""
    config = config or FitConfig()
    data_sorted, order = _canonical_order(data, 1)
    inputs, q = _split_data(data_sorted, 1)
    starts = _saturating_starts(inputs, q, config, config.bounds_for(SATURATING))
    best = _best_of_starts(SATURATING, data_sorted, starts, config, variable)
    return _finish(SATURATING, order, data_sorted, best, config, variable)


def fit_joint_law(data, config: FitConfig = None) -> FitResult:
    """(n, d, q) 데이터에 결합 법칙 피팅"""
    config = config or FitConfig()
    data_sorted, order = _canonical_order(data, 2)
    inputs, q = _split_data(data_sorted, 2)
    starts = _joint_starts(inputs, q, config, config.bounds_for(JOINT))
    best = _best_of_starts(JOINT, data_sorted, starts, config, None)
    return _finish(JOINT, order, data_sorted, best, config, None)


# ===================================================================
# compute 효율 frontier
# ===================================================================

def pareto_frontier(points) -> List[Tuple[float, float]]:
    """
    지배되지 않는 (c, q) 점들 (c 오름차순, q 강증가)

    다른 점이 c <= c_i, q >= q_i (하나 이상 strict) 이면 지배됨. 중복 점은 하나로 합침.
    """
    unique = set()
    for c, q in points:
        c, q = float(c), float(q)
        if not (math.isfinite(c) and math.isfinite(q)):
            raise InvalidInputError(f"유한하지 않은 점: ({c}, {q})")
        if c <= 0:
            raise DomainError(f"compute 값은 양수여야 합니다: {c}")
        unique.add((c, q))

    frontier = []
    best_q = -math.inf
    for c, q in sorted(unique, key=lambda p: (p[0], -p[1])):
        if q > best_q:
            frontier.append((c, q))
            best_q = q
    return frontier


def fit_compute_frontier(points, config: FitConfig = None) -> FitResult:
    """frontier 추출 후 포화 멱법칙 피팅, frontier 가 모든 점을 덮는지 확인"""
    config = config or FitConfig()
    frontier = pareto_frontier(points)
    if len(frontier) < 3:
        raise InsufficientFrontierDataError(
            f"frontier 포인트가 3개 미만입니다 (n={len(frontier)})"
        )

    result = fit_saturating_power_law(frontier, config, variable="compute")
    result.frontier = frontier

    all_points = np.asarray([(float(c), float(q)) for c, q in points])
    predicted = SATURATING.predict(np.asarray(result.params), all_points[:, :1])
    scale = 3.0 * math.sqrt(result.rss / len(frontier)) + 1e-9
    above = int(np.sum(all_points[:, 1] > predicted + scale))
    if above:
        result.warnings.append("frontier_envelope")
        logger.warning(f"⚠️ frontier 곡선 위에 있는 점이 {above}개 있습니다")
    return result
