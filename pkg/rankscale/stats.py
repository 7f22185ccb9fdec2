"""
적합도 / 상관 통계

  - r_squared: 1 - RSS/TSS
  - pearson: 모집단 모멘트 기반 상관계수 (n vs n-1 인자는 상쇄됨)
  - early_late_correlation / selection_agreement: 초기 스텝 RankMe 로 후기 품질 예측

모든 모멘트 누적은 math.fsum (보정 합산) 으로 합니다.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .errors import (AmbiguousRecordError, DegenerateVarianceError,
                     InsufficientPairsError, InvalidInputError)
from .registry import CheckpointRecord, config_key

logger = logging.getLogger(__name__)


def _as_floats(values: Sequence[float], name: str) -> List[float]:
    result = [float(v) for v in values]
    if not all(math.isfinite(v) for v in result):
        raise InvalidInputError(f"{name} 에 NaN/Inf 값이 있습니다")
    return result


def _check_pair(a: Sequence[float], b: Sequence[float], names=("x", "y")):
    a = _as_floats(a, names[0])
    b = _as_floats(b, names[1])
    if len(a) != len(b):
        raise InvalidInputError(f"길이가 다릅니다: {len(a)} != {len(b)}")
    if len(a) < 2:
        raise InvalidInputError(f"2개 이상의 값이 필요합니다 (n={len(a)})")
    return a, b


def _mean(values: List[float]) -> float:
    return math.fsum(values) / len(values)


def r_squared(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """결정계수 R^2 = 1 - sum(y - y_hat)^2 / sum(y - y_bar)^2 (음수 가능)"""
    y, y_hat = _check_pair(actual, predicted, ("actual", "predicted"))
    y_bar = _mean(y)
    tss = math.fsum((v - y_bar) ** 2 for v in y)
    if tss == 0.0:
        raise DegenerateVarianceError("actual 값이 모두 같습니다 (TSS = 0)")
    rss = math.fsum((a - b) ** 2 for a, b in zip(y, y_hat))
    return 1.0 - rss / tss


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson 상관계수, 반올림 대비 [-1, 1] 로 clamp"""
    x, y = _check_pair(x, y)
    x_bar = _mean(x)
    y_bar = _mean(y)
    dx = [v - x_bar for v in x]
    dy = [v - y_bar for v in y]
    sxx = math.fsum(v * v for v in dx)
    syy = math.fsum(v * v for v in dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateVarianceError("분산이 0 인 입력이 있습니다")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


# ===================================================================
# 초기 RankMe -> 후기 품질 분석
# ===================================================================

@dataclass(frozen=True)
class CheckpointPair:
    """한 설정의 (초기 RankMe, 후기 품질) 쌍"""
    key: Tuple
    name: str
    rankme: float
    quality: float


@dataclass(frozen=True)
class CorrelationReport:
    early_step: int
    late_step: int
    pcc: float
    n_pairs: int
    pairs: List[CheckpointPair] = field(default_factory=list)


@dataclass(frozen=True)
class SelectionAgreement:
    """RankMe 기준 선택과 품질 기준 선택의 일치 여부 (+ Spearman footrule 확장)"""
    early_step: int
    late_step: int
    agreement: bool
    selected_by_rankme: str
    selected_by_quality: str
    rankme_order: List[str]
    quality_order: List[str]
    footrule_distance: int
    footrule_max: int
    extension: str = "spearman_footrule"


def _index_by_config(records: Sequence[CheckpointRecord], step: int,
                     attribute: str) -> Dict[Tuple, CheckpointRecord]:
    """step 에서 attribute 값이 있는 레코드를 설정 키로 색인 (중복은 오류)"""
    index = {}
    for record in records:
        if record.step_of_measurement != step or getattr(record, attribute) is None:
            continue
        key = config_key(record)
        if key in index:
            raise AmbiguousRecordError(
                f"설정 {record.config.name} 에 step {step} 의 {attribute} 레코드가 중복됩니다"
            )
        index[key] = record
    return index


def pair_checkpoints(records: Sequence[CheckpointRecord], early_step: int,
                     late_step: int) -> List[CheckpointPair]:
    """설정 키 기준으로 RankMe@early 와 quality@late 를 짝지음 (키 순서로 정렬)"""
    early = _index_by_config(records, early_step, "rankme")
    late = _index_by_config(records, late_step, "quality")
    return [
        CheckpointPair(key=key, name=early[key].config.name,
                       rankme=float(early[key].rankme), quality=float(late[key].quality))
        for key in sorted(set(early) & set(late))
    ]


def early_late_correlation(records: Sequence[CheckpointRecord], early_step: int,
                           late_step: int) -> CorrelationReport:
    """초기 스텝 RankMe 와 후기 스텝 품질의 PCC"""
    pairs = pair_checkpoints(records, early_step, late_step)
    if len(pairs) < 2:
        raise InsufficientPairsError(
            f"step {early_step} RankMe / step {late_step} quality 쌍이 2개 미만입니다 "
            f"(n={len(pairs)})"
        )
    pcc = pearson([p.rankme for p in pairs], [p.quality for p in pairs])
    logger.info(f"✅ PCC(RankMe@{early_step}, quality@{late_step}) = {pcc:.4f} "
                f"({len(pairs)} pairs)")
    return CorrelationReport(early_step=early_step, late_step=late_step,
                             pcc=pcc, n_pairs=len(pairs), pairs=pairs)


def _order(pairs: List[CheckpointPair], attribute: str) -> List[CheckpointPair]:
    # 내림차순, 동점은 키 순서 유지 (sorted 는 stable)
    return sorted(pairs, key=lambda p: -getattr(p, attribute))


def selection_agreement(records: Sequence[CheckpointRecord], early_step: int,
                        late_step: int) -> SelectionAgreement:
    """argmax RankMe@early 와 argmax quality@late 가 같은 설정인지 확인"""
    pairs = pair_checkpoints(records, early_step, late_step)
    if not pairs:
        raise InsufficientPairsError(
            f"step {early_step} RankMe / step {late_step} quality 쌍이 없습니다"
        )

    by_rankme = _order(pairs, "rankme")
    by_quality = _order(pairs, "quality")
    rank_of = {p.key: i for i, p in enumerate(by_quality)}
    footrule = sum(abs(i - rank_of[p.key]) for i, p in enumerate(by_rankme))
    n = len(pairs)

    return SelectionAgreement(
        early_step=early_step,
        late_step=late_step,
        agreement=by_rankme[0].key == by_quality[0].key,
        selected_by_rankme=by_rankme[0].name,
        selected_by_quality=by_quality[0].name,
        rankme_order=[p.name for p in by_rankme],
        quality_order=[p.name for p in by_quality],
        footrule_distance=footrule,
        footrule_max=(n * n) // 2,
    )
