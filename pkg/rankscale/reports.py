"""
CLI JSON 리포트 스키마 (pydantic)

모든 리포트는 최상위 "schema": 1 필드를 가집니다.
실수는 repr 로 직렬화되므로 다시 읽으면 비트 단위로 같은 값이 됩니다.
"""
import json
import logging
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ReportFileError
from .fit import FitResult
from .rankme import RankMeScore, StabilityReport
from .stats import CorrelationReport, SelectionAgreement

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class Report(BaseModel):
    """리포트 공통 베이스"""
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    command: str

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True),
                          ensure_ascii=False, indent=2)


class InputDigest(BaseModel):
    path: str
    rows: int
    sha256: str


# ===================================================================
# rank / synth
# ===================================================================

class StabilityEntryModel(BaseModel):
    size: int
    trials: int
    mean: float
    std: float
    relative_deviation: float
    values: List[float]


class RankReport(Report):
    command: str = "rank"
    input: InputDigest
    value: float
    sample_rows: int
    embed_dim: int
    epsilon: float
    seed: int
    samples_requested: int
    stability: Optional[List[StabilityEntryModel]] = None
    warnings: List[str] = Field(default_factory=list)


class SynthReport(Report):
    command: str = "synth"
    out: str
    profile: str
    spectrum: List[float]
    rows: int
    cols: int
    seed: int
    rankme: float


def build_rank_report(score: RankMeScore, digest: InputDigest, seed: int,
                      samples_requested: int, sweep: Optional[StabilityReport] = None,
                      warnings: Optional[List[str]] = None) -> RankReport:
    stability = None
    if sweep is not None:
        stability = [StabilityEntryModel(**vars(entry)) for entry in sweep.entries]
    return RankReport(
        input=digest,
        value=score.value,
        sample_rows=score.sample_rows,
        embed_dim=score.embed_dim,
        epsilon=score.epsilon,
        seed=seed,
        samples_requested=samples_requested,
        stability=stability,
        warnings=list(warnings or []),
    )


# ===================================================================
# fit / predict
# ===================================================================

class SaturatingPoint(BaseModel):
    x: float
    observed: float
    predicted: float
    residual: float


class JointPoint(BaseModel):
    n: float
    d: float
    observed: float
    predicted: float
    residual: float


class GroupFit(BaseModel):
    """--per-group / --group-by 피팅 결과 한 건 (architecture 그룹은 mask_rate, data_hours 없음)"""
    group_by: str = "config"
    name: str
    configs: int = 1
    mask_rate: Optional[float] = None
    data_hours: Optional[float] = None
    points: int
    parameters: Dict[str, float]
    rss: float
    r_squared: Optional[float]
    converged: bool
    warnings: List[str] = Field(default_factory=list)


class FittedLaw(BaseModel):
    """predict 가 읽는 최소 필드 (fit 리포트의 부분집합)"""
    model_config = ConfigDict(extra="ignore", populate_by_name=True)

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    family: str
    variable: Optional[str] = None
    parameters: Dict[str, float]


class FitReport(Report):
    command: str = "fit"
    input: InputDigest
    law: str
    family: str
    variable: Optional[str]
    x_column: Optional[str] = None
    q_column: str
    parameters: Dict[str, float]
    rss: float
    r_squared: Optional[float]
    iterations: int
    converged: bool
    starts: int
    non_identifiable: bool
    underdetermined: bool
    points: List[Union[SaturatingPoint, JointPoint]]
    frontier: Optional[List[List[float]]] = None
    groups: Optional[List[GroupFit]] = None
    warnings: List[str] = Field(default_factory=list)


def _points(result: FitResult) -> List[Union[SaturatingPoint, JointPoint]]:
    points = []
    for inputs, observed, predicted, residual in zip(result.inputs, result.observed,
                                                     result.predicted, result.residuals):
        if len(inputs) == 1:
            points.append(SaturatingPoint(x=inputs[0], observed=observed,
                                          predicted=predicted, residual=residual))
        else:
            points.append(JointPoint(n=inputs[0], d=inputs[1], observed=observed,
                                     predicted=predicted, residual=residual))
    return points


def build_fit_report(result: FitResult, digest: InputDigest, law: str, q_column: str,
                     x_column: Optional[str] = None,
                     extra_warnings: Optional[List[str]] = None,
                     groups: Optional[List[GroupFit]] = None) -> FitReport:
    warnings = list(result.warnings)
    warnings.extend(w for w in (extra_warnings or []) if w not in warnings)
    frontier = None
    if result.frontier is not None:
        frontier = [[c, q] for c, q in result.frontier]
    return FitReport(
        input=digest,
        law=law,
        family=result.family,
        variable=result.variable,
        x_column=x_column,
        q_column=q_column,
        parameters=result.parameters,
        rss=result.rss,
        r_squared=result.r_squared,
        iterations=result.iterations,
        converged=result.converged,
        starts=result.starts_attempted,
        non_identifiable=result.non_identifiable,
        underdetermined=result.underdetermined,
        points=_points(result),
        frontier=frontier,
        groups=groups,
        warnings=warnings,
    )


class PredictReport(Report):
    command: str = "predict"
    family: str
    variable: Optional[str]
    parameters: Dict[str, float]
    mode: str
    at: Optional[List[float]] = None
    target: Optional[float] = None
    value: float
    reachable: bool


def load_fitted_law(path: str) -> FittedLaw:
    """fit 리포트 파일에서 법칙 정보 읽기"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except OSError as e:
        raise ReportFileError(f"리포트 파일을 읽을 수 없습니다: {path} ({e})") from e
    except json.JSONDecodeError as e:
        raise ReportFileError(f"리포트 JSON 파싱 실패: {path} ({e})") from e
    try:
        law = FittedLaw.model_validate(payload)
    except ValidationError as e:
        raise ReportFileError(f"fit 리포트 형식이 아닙니다: {path} ({e.error_count()}개 오류)") from e
    if law.schema_version != SCHEMA_VERSION:
        raise ReportFileError(f"지원하지 않는 리포트 schema: {law.schema_version}")
    return law


# ===================================================================
# correlate / params
# ===================================================================

class PairModel(BaseModel):
    name: str
    rankme: float
    quality: float


class AgreementModel(BaseModel):
    agreement: bool
    selected_by_rankme: str
    selected_by_quality: str
    rankme_order: List[str]
    quality_order: List[str]
    footrule_distance: int
    footrule_max: int
    extension: str


class CorrelateReport(Report):
    command: str = "correlate"
    rows: int
    early_step: int
    late_step: int
    pcc: float
    n_pairs: int
    pairs: List[PairModel]
    selection: AgreementModel


def build_correlate_report(correlation: CorrelationReport, agreement: SelectionAgreement,
                           rows: int) -> CorrelateReport:
    return CorrelateReport(
        rows=rows,
        early_step=correlation.early_step,
        late_step=correlation.late_step,
        pcc=correlation.pcc,
        n_pairs=correlation.n_pairs,
        pairs=[PairModel(name=p.name, rankme=p.rankme, quality=p.quality)
               for p in correlation.pairs],
        selection=AgreementModel(
            agreement=agreement.agreement,
            selected_by_rankme=agreement.selected_by_rankme,
            selected_by_quality=agreement.selected_by_quality,
            rankme_order=agreement.rankme_order,
            quality_order=agreement.quality_order,
            footrule_distance=agreement.footrule_distance,
            footrule_max=agreement.footrule_max,
            extension=agreement.extension,
        ),
    )


class ParamsReport(Report):
    command: str = "params"
    name: str
    depth: int
    embed: int
    mlp: int
    heads: int
    block_params: int
    param_count: int
    param_count_millions: float
