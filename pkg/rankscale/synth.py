"""
지정한 singular spectrum 을 갖는 임베딩 행렬 생성 (RankMe / 피팅 테스트용 정답 오라클)
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError

logger = logging.getLogger(__name__)

PROFILES = ("explicit", "uniform", "geometric", "power")


@dataclass(frozen=True)
class SpectrumSpec:
    """목표 특이값 프로파일 (내림차순, 최소 하나는 양수)"""
    values: Tuple[float, ...]
    profile: str = "explicit"
    parameter: Optional[float] = None

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if self.profile not in PROFILES:
            raise InvalidInputError(f"알 수 없는 spectrum 프로파일: {self.profile}")
        if len(values) < 1:
            raise InvalidInputError("spectrum 길이는 1 이상이어야 합니다")
        arr = np.asarray(values)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidInputError("spectrum 값은 유한한 음이 아닌 실수여야 합니다")
        if np.any(np.diff(arr) > 0):
            raise InvalidInputError("spectrum 값은 내림차순이어야 합니다")
        if not np.any(arr > 0):
            raise InvalidInputError("spectrum 에 양수 값이 최소 하나 있어야 합니다")

    @property
    def k(self) -> int:
        return len(self.values)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "SpectrumSpec":
        return cls(tuple(values), "explicit")

    @classmethod
    def uniform(cls, k: int, value: float = 1.0) -> "SpectrumSpec":
        return cls(tuple([value] * k), "uniform", value)

    @classmethod
    def geometric(cls, ratio: float, k: int) -> "SpectrumSpec":
        """sigma_k = ratio^k (k = 1..K)"""
        if not 0 < ratio <= 1:
            raise InvalidInputError(f"geometric ratio 는 (0, 1] 이어야 합니다: {ratio}")
        return cls(tuple(ratio ** i for i in range(1, k + 1)), "geometric", ratio)

    @classmethod
    def power(cls, exponent: float, k: int) -> "SpectrumSpec":
        """sigma_k = k^(-exponent) (k = 1..K)"""
        if exponent < 0:
            raise InvalidInputError(f"power exponent 는 0 이상이어야 합니다: {exponent}")
        return cls(tuple(i ** (-exponent) for i in range(1, k + 1)), "power", exponent)


def parse_profile(text: str, cols: Optional[int] = None) -> SpectrumSpec:
    """
    CLI 프로파일 문자열 파싱

      uniform:K            geometric:RATIO:K
      power:EXPONENT:K     explicit:v1,v2,...
    K 가 생략되면 cols 를 사용합니다.
    """
    parts = text.split(":")
    kind = parts[0].strip().lower()

    def _count(token: Optional[str]) -> int:
        if token is None:
            if cols is None:
                raise InvalidInputError(f"'{text}': 차원 수(K)나 --cols 가 필요합니다")
            return int(cols)
        return int(token)

    try:
        if kind == "explicit":
            if len(parts) != 2:
                raise InvalidInputError(f"explicit 프로파일 형식 오류: {text}")
            return SpectrumSpec.explicit([float(v) for v in parts[1].split(",")])
        if kind == "uniform":
            return SpectrumSpec.uniform(_count(parts[1] if len(parts) > 1 else None))
        if kind in ("geometric", "power"):
            if len(parts) < 2:
                raise InvalidInputError(f"{kind} 프로파일에 파라미터가 필요합니다: {text}")
            k = _count(parts[2] if len(parts) > 2 else None)
            factory = SpectrumSpec.geometric if kind == "geometric" else SpectrumSpec.power
            return factory(float(parts[1]), k)
    except ValueError as e:
        if isinstance(e, InvalidInputError):
            raise
        raise InvalidInputError(f"프로파일 숫자 파싱 실패 '{text}': {e}")

    raise InvalidInputError(f"알 수 없는 spectrum 프로파일: {text}")


def _orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Gaussian 행렬의 Householder QR (대각 부호 보정으로 분포 고정)"""
    gaussian = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_orthogonal(n: int, seed: int) -> np.ndarray:
    """시드 고정 n x n 직교 행렬 (Q^T Q = I)"""
    if n < 1:
        raise InvalidInputError(f"n 은 1 이상이어야 합니다: {n}")
    rng = np.random.default_rng(seed)
    return _orthonormal_columns(rng, n, n)


def synth_embeddings(spec: SpectrumSpec, rows: int, seed: int) -> np.ndarray:
    """
    U diag(spec) V^T 형태의 rows x K 임베딩 행렬 생성

    U 는 rows x K 직교 열, V 는 K x K 직교 행렬 (모두 seed 에서 파생).
    같은 (spec, rows, seed) 는 비트 단위로 같은 행렬을 만듭니다.
    """
    k = spec.k
    if rows < k:
        raise InvalidInputError(f"rows({rows}) 는 spectrum 길이({k}) 이상이어야 합니다")

    u_seed, v_seed = np.random.SeedSequence(seed).spawn(2)
    u = _orthonormal_columns(np.random.default_rng(u_seed), rows, k)
    v = _orthonormal_columns(np.random.default_rng(v_seed), k, k)

    matrix = (u * np.asarray(spec.values)) @ v.T
    logger.debug(f"synth_embeddings: {rows}x{k}, profile={spec.profile}")
    return matrix
