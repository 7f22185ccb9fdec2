"""
임베딩 effective rank (RankMe)

  p_k = sigma_k / ||sigma||_1 + epsilon
  RankMe = exp(-sum_k p_k log p_k)

epsilon 은 L1 정규화 뒤에 더하고 재정규화하지 않습니다 (sum p_k 가 1 을 약간 넘음).
로그는 자연로그. 서브샘플은 비복원 추출이며 평균 중심화는 하지 않습니다.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DegenerateSpectrumError, InvalidInputError
from .numerics import as_matrix, singular_values

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-7


@dataclass(frozen=True)
class RankMeScore:
    """RankMe 계산 결과"""
    value: float
    sample_rows: int
    embed_dim: int
    epsilon: float

    def to_dict(self) -> dict:
        return {
            'value': self.value,
            'sample_rows': self.sample_rows,
            'embed_dim': self.embed_dim,
            'epsilon': self.epsilon,
        }


@dataclass(frozen=True)
class StabilityEntry:
    """서브샘플 크기 하나에 대한 RankMe 통계"""
    size: int
    trials: int
    mean: float
    std: float
    relative_deviation: float
    values: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class StabilityReport:
    full: RankMeScore
    entries: List[StabilityEntry]
    seed: int


def rankme_from_spectrum(s: Sequence[float], epsilon: float = DEFAULT_EPSILON,
                         sample_rows: Optional[int] = None,
                         embed_dim: Optional[int] = None) -> RankMeScore:
    """spectrum 에서 RankMe 계산"""
    sigma = np.asarray(s, dtype=np.float64).ravel()
    if sigma.size == 0:
        raise InvalidInputError("빈 spectrum 입니다")
    if not np.all(np.isfinite(sigma)):
        raise InvalidInputError("spectrum 에 NaN/Inf 값이 있습니다")
    if np.any(sigma < 0):
        raise InvalidInputError("spectrum 값은 음수일 수 없습니다")
    if not epsilon > 0:
        raise InvalidInputError(f"epsilon 은 양수여야 합니다: {epsilon}")

    total = float(np.sum(sigma))
    if total == 0.0:
        raise DegenerateSpectrumError("모든 특이값이 0 입니다 (degenerate spectrum)")

    p = sigma / total + epsilon
    entropy = -float(np.sum(p * np.log(p)))

    return RankMeScore(
        value=float(np.exp(entropy)),
        sample_rows=int(sample_rows) if sample_rows is not None else sigma.size,
        embed_dim=int(embed_dim) if embed_dim is not None else sigma.size,
        epsilon=float(epsilon),
    )


def rankme(z, epsilon: float = DEFAULT_EPSILON) -> RankMeScore:
    """임베딩 행렬(D x K)의 RankMe"""
    arr = as_matrix(z)
    if arr.shape[0] < 2:
        raise InvalidInputError(f"RankMe 계산에는 2개 이상의 행이 필요합니다 (rows={arr.shape[0]})")
    return rankme_from_spectrum(singular_values(arr), epsilon,
                                sample_rows=arr.shape[0], embed_dim=arr.shape[1])


def subsample_rows(z, n: int, seed: int) -> np.ndarray:
    """
    비복원 균등 추출로 n 개 행 선택

    선택된 인덱스는 원래 행 순서대로 정렬합니다 (n = rows 이면 원본 그대로).
    """
    arr = as_matrix(z)
    rows = arr.shape[0]
    if not 1 <= n <= rows:
        raise InvalidInputError(f"서브샘플 크기 n 은 1..{rows} 범위여야 합니다 (n={n})")
    rng = np.random.default_rng(seed)
    index = np.sort(rng.choice(rows, size=n, replace=False))
    return arr[index]


def subsample_stability_sweep(z, sizes: Sequence[int], trials: int, seed: int,
                              epsilon: float = DEFAULT_EPSILON) -> StabilityReport:
    """크기별로 trials 번 서브샘플 RankMe 를 구해 전체 행렬 값과 비교"""
    arr = as_matrix(z)
    rows = arr.shape[0]
    if trials < 1:
        raise InvalidInputError(f"trials 는 1 이상이어야 합니다: {trials}")
    for size in sizes:
        if not 2 <= size <= rows:
            raise InvalidInputError(f"sweep 크기 {size} 가 행 수 {rows} 범위를 벗어납니다")

    full = rankme(arr, epsilon)
    # (size, trial) 마다 독립 시드 -> 실행 순서와 무관하게 결정적
    size_seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    entries = []
    for size, size_seed in zip(sizes, size_seeds):
        trial_seeds = size_seed.generate_state(trials)
        values = [
            rankme(subsample_rows(arr, size, int(trial_seed)), epsilon).value
            for trial_seed in trial_seeds
        ]
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if trials > 1 else 0.0
        entries.append(StabilityEntry(
            size=int(size),
            trials=trials,
            mean=mean,
            std=std,
            relative_deviation=abs(mean - full.value) / full.value,
            values=[float(v) for v in values],
        ))
        logger.info(f"✅ sweep size={size}: mean={mean:.4f}, std={std:.4f}, "
                    f"rel_dev={entries[-1].relative_deviation:.2e}")

    return StabilityReport(full=full, entries=entries, seed=seed)
