"""
스케일링 법칙 정의 / 평가 / 역함수 / 파라미터 미분

  포화 멱법칙:  Q(x) = q_inf - (x_c / x)^alpha       (x = rank | data | params | compute)
  결합 법칙:    Q(N, D) = [q_inf^(1/a) + (n_c/N)^(a_n/a) + (d_c/D)^(a_d/a)]^a

결합 법칙 부호 규약: a, a_n, a_d 는 음수, n_c, d_c 는 양수, q_inf 는 (0, 1].
이 규약에서 Q 는 N, D 가 커질수록 q_inf 로 증가합니다.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Tuple, Union

import numpy as np

from .errors import DomainError, InvalidLawError, UnreachableTargetError

logger = logging.getLogger(__name__)

VARIABLES = ("rank", "data", "params", "compute")

# 밑(ratio)이 이 범위를 벗어나면 로그 공간에서 거듭제곱 계산
LOG_SPACE_LOW = 1e-6
LOG_SPACE_HIGH = 1e6


def _ratio_power(c, x, a):
    """(c / x)^a, 극단적인 비율은 exp(a * (log c - log x)) 로 계산"""
    ratio = np.asarray(c / np.asarray(x, dtype=np.float64), dtype=np.float64)
    with np.errstate(over='ignore', under='ignore', divide='ignore', invalid='ignore'):
        direct = np.power(ratio, a)
        logged = np.exp(a * (np.log(c) - np.log(x)))
    extreme = (ratio > LOG_SPACE_HIGH) | (ratio < LOG_SPACE_LOW)
    return np.where(extreme, logged, direct)


def _positive(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} 는 양수여야 합니다")
    return arr


@dataclass(frozen=True)
class SaturatingPowerLaw:
    """Q = q_inf - (x_c/x)^alpha"""
    x_c: float
    alpha: float
    q_inf: float
    variable: str = "rank"

    PARAM_NAMES = ("x_c", "alpha", "q_inf")

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise InvalidLawError(f"알 수 없는 변수 태그: {self.variable}")
        if not (math.isfinite(self.x_c) and self.x_c > 0):
            raise InvalidLawError(f"x_c 는 양수여야 합니다: {self.x_c}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidLawError(f"alpha 는 양수여야 합니다: {self.alpha}")
        if not 0 <= self.q_inf <= 1:
            raise InvalidLawError(f"q_inf 는 [0, 1] 범위여야 합니다: {self.q_inf}")

    @property
    def params(self) -> Tuple[float, float, float]:
        return (self.x_c, self.alpha, self.q_inf)

    def to_dict(self) -> Dict[str, float]:
        return dict(zip(self.PARAM_NAMES, self.params))


@dataclass(frozen=True)
class JointDataModelLaw:
    """모델 크기 N 과 데이터 양 D 의 결합 법칙"""
    q_inf: float
    alpha: float
    n_c: float
    alpha_n: float
    d_c: float
    alpha_d: float

    PARAM_NAMES = ("q_inf", "alpha", "n_c", "alpha_n", "d_c", "alpha_d")

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.params):
            raise InvalidLawError("결합 법칙 파라미터에 NaN/Inf 가 있습니다")
        if not 0 < self.q_inf <= 1:
            raise InvalidLawError(f"q_inf 는 (0, 1] 범위여야 합니다: {self.q_inf}")
        if self.alpha == 0:
            raise InvalidLawError("alpha 는 0 이 아니어야 합니다")
        if self.n_c <= 0 or self.d_c <= 0:
            raise InvalidLawError(f"n_c, d_c 는 양수여야 합니다: {self.n_c}, {self.d_c}")
        # N, D -> inf 에서 보정항이 사라지려면 지수 비율이 양수여야 함
        if self.alpha_n / self.alpha <= 0 or self.alpha_d / self.alpha <= 0:
            raise InvalidLawError(
                "alpha_n/alpha, alpha_d/alpha 는 양수여야 합니다 "
                f"(alpha={self.alpha}, alpha_n={self.alpha_n}, alpha_d={self.alpha_d})"
            )

    @property
    def params(self) -> Tuple[float, ...]:
        return (self.q_inf, self.alpha, self.n_c, self.alpha_n, self.d_c, self.alpha_d)

    def to_dict(self) -> Dict[str, float]:
        return dict(zip(self.PARAM_NAMES, self.params))


Law = Union[SaturatingPowerLaw, JointDataModelLaw]


# ===================================================================
# 평가
# ===================================================================

def _saturating_value(theta, x):
    x_c, alpha, q_inf = theta
    return q_inf - _ratio_power(x_c, x, alpha)


def _joint_log_terms(theta, n, d):
    """브래킷 세 항의 로그값과 log-bracket (logsumexp)"""
    q_inf, alpha, n_c, alpha_n, d_c, alpha_d = theta
    log_n_ratio = np.log(n_c) - np.log(n)
    log_d_ratio = np.log(d_c) - np.log(d)
    log_a = np.full(np.shape(log_n_ratio), np.log(q_inf) / alpha)
    log_u = (alpha_n / alpha) * log_n_ratio
    log_v = (alpha_d / alpha) * log_d_ratio
    log_bracket = np.logaddexp(np.logaddexp(log_a, log_u), log_v)
    return log_a, log_u, log_v, log_bracket, log_n_ratio, log_d_ratio


def _joint_value(theta, n, d):
    alpha = theta[1]
    *_, log_bracket, _, _ = _joint_log_terms(theta, n, d)
    with np.errstate(over='ignore', under='ignore'):
        return np.exp(alpha * log_bracket)


def evaluate(law: SaturatingPowerLaw, x):
    """q_inf - (x_c/x)^alpha (x 는 스칼라 또는 배열, 양수)"""
    arr = _positive(x, "x")
    value = _saturating_value(law.params, arr)
    return float(value) if np.ndim(x) == 0 else value


def evaluate_joint(law: JointDataModelLaw, n, d):
    """결합 법칙 평가 (로그 공간)"""
    n_arr = _positive(n, "n")
    d_arr = _positive(d, "d")
    n_arr, d_arr = np.broadcast_arrays(n_arr, d_arr)
    value = _joint_value(law.params, n_arr, d_arr)
    return float(value) if np.ndim(n) == 0 and np.ndim(d) == 0 else value


def invert(law: SaturatingPowerLaw, q_target: float) -> float:
    """목표 품질에 필요한 x = x_c * (q_inf - q)^(-1/alpha)"""
    if not q_target < law.q_inf:
        raise UnreachableTargetError(
            f"unreachable: exceeds fitted ceiling Q∞ (target={q_target}, q_inf={law.q_inf})"
        )
    gap = law.q_inf - q_target
    return float(law.x_c * math.exp(-math.log(gap) / law.alpha))


# ===================================================================
# 파라미터 미분 (피팅용 해석적 Jacobian)
# ===================================================================

def _saturating_jacobian(theta, x):
    """d(value)/d(x_c, alpha, q_inf), shape (N, 3)"""
    x_c, alpha, q_inf = theta
    x = np.asarray(x, dtype=np.float64)
    term = _ratio_power(x_c, x, alpha)
    log_ratio = np.log(x_c) - np.log(x)
    jac = np.empty(x.shape + (3,))
    jac[..., 0] = -alpha * term / x_c
    jac[..., 1] = -term * log_ratio
    jac[..., 2] = 1.0
    return jac


def _joint_jacobian(theta, n, d):
    """d(value)/d(q_inf, alpha, n_c, alpha_n, d_c, alpha_d), shape (N, 6)"""
    q_inf, alpha, n_c, alpha_n, d_c, alpha_d = theta
    log_a, log_u, log_v, log_bracket, log_n_ratio, log_d_ratio = _joint_log_terms(theta, n, d)
    with np.errstate(over='ignore', under='ignore'):
        value = np.exp(alpha * log_bracket)
        share_a = np.exp(log_a - log_bracket)
        share_u = np.exp(log_u - log_bracket)
        share_v = np.exp(log_v - log_bracket)

    jac = np.empty(np.shape(value) + (6,))
    jac[..., 0] = value * share_a / q_inf
    jac[..., 1] = value * (log_bracket - (share_a * np.log(q_inf)
                                          + share_u * alpha_n * log_n_ratio
                                          + share_v * alpha_d * log_d_ratio) / alpha)
    jac[..., 2] = value * alpha_n * share_u / n_c
    jac[..., 3] = value * share_u * log_n_ratio
    jac[..., 4] = value * alpha_d * share_v / d_c
    jac[..., 5] = value * share_v * log_d_ratio
    return jac


def param_gradient(law: Law, point) -> np.ndarray:
    """
    법칙 값의 파라미터별 편미분 (PARAM_NAMES 순서)

    포화 법칙은 point = x, 결합 법칙은 point = (n, d).
    스칼라 point 는 (P,) 벡터, 배열 point 는 (N, P) 행렬을 반환합니다.
    """
    if isinstance(law, SaturatingPowerLaw):
        x = _positive(point, "x")
        return _saturating_jacobian(law.params, x)
    if isinstance(law, JointDataModelLaw):
        n, d = point
        n_arr, d_arr = np.broadcast_arrays(_positive(n, "n"), _positive(d, "d"))
        return _joint_jacobian(law.params, n_arr, d_arr)
    raise InvalidLawError(f"지원하지 않는 법칙 타입: {type(law).__name__}")


# ===================================================================
# 법칙 패밀리 디스크립터 (fit 모듈에서 사용)
# ===================================================================

INF = float("inf")


@dataclass(frozen=True)
class LawFamily:
    """피팅용 법칙 패밀리: 파라미터 이름, 기본 bounds, 평가/미분 함수"""
    name: str
    param_names: Tuple[str, ...]
    default_bounds: Tuple[Tuple[float, float], ...]
    n_inputs: int
    value: Callable
    jacobian: Callable
    build: Callable

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def predict(self, theta, inputs: np.ndarray) -> np.ndarray:
        return self.value(theta, *self._columns(inputs))

    def jac(self, theta, inputs: np.ndarray) -> np.ndarray:
        return self.jacobian(theta, *self._columns(inputs))

    def _columns(self, inputs: np.ndarray):
        inputs = np.asarray(inputs, dtype=np.float64)
        if self.n_inputs == 1:
            return (inputs.reshape(-1),)
        return tuple(inputs[:, i] for i in range(self.n_inputs))


SATURATING = LawFamily(
    name="saturating",
    param_names=SaturatingPowerLaw.PARAM_NAMES,
    default_bounds=((0.0, INF), (0.0, INF), (0.0, 1.0)),
    n_inputs=1,
    value=_saturating_value,
    jacobian=_saturating_jacobian,
    build=lambda theta, variable="rank": SaturatingPowerLaw(*map(float, theta), variable=variable),
)

JOINT = LawFamily(
    name="joint",
    param_names=JointDataModelLaw.PARAM_NAMES,
    default_bounds=((0.0, 1.0), (-INF, 0.0), (0.0, INF), (-INF, 0.0), (0.0, INF), (-INF, 0.0)),
    n_inputs=2,
    value=_joint_value,
    jacobian=_joint_jacobian,
    build=lambda theta, variable=None: JointDataModelLaw(*map(float, theta)),
)

FAMILIES = {family.name: family for family in (SATURATING, JOINT)}


def law_from_dict(family: str, params: Dict[str, float], variable: str = "rank") -> Law:
    """JSON 리포트의 파라미터 딕셔너리에서 법칙 복원"""
    if family not in FAMILIES:
        raise InvalidLawError(f"알 수 없는 법칙 패밀리: {family}")
    spec = FAMILIES[family]
    missing = [name for name in spec.param_names if name not in params]
    if missing:
        raise InvalidLawError(f"법칙 파라미터 누락: {missing}")
    theta = [float(params[name]) for name in spec.param_names]
    return spec.build(theta, variable) if family == "saturating" else spec.build(theta)
