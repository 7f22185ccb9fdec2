"""
체크포인트 메타데이터 레지스트리

[주요 기능]
1. ModelConfig / CheckpointRecord 모델 (pydantic 검증)
2. 체크포인트 CSV/JSON 로드/저장 (오류 시 행/컬럼 정보 포함)
3. 임베딩 행렬 파일 포맷 (EMBR 바이너리, CSV 폴백)
4. 마스크드 오토인코더 패밀리 파라미터 수 추정기
5. compute budget (6 * N * steps * batch * tokens)
6. 설정별 그룹핑
"""
import hashlib
import json
import logging
import math
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import (CheckpointFileError, EmbeddingFileError, InvalidRecordError,
                     UnsupportedConfigError)

logger = logging.getLogger(__name__)

FAMILY_ARCHITECTURE = "mae"
DEFAULT_BATCH_SIZE = 256
DEFAULT_TOKENS_PER_SAMPLE = 250  # 25 Hz x 10 s

# fit --group-by
GROUP_BY = ("config", "architecture")

# CSV 스키마 (헤더 필수, UTF-8, 콤마 구분)
CHECKPOINT_COLUMNS = [
    'name', 'depth', 'embed', 'mlp', 'heads', 'data_hours', 'steps', 'batch_size',
    'mask_rate', 'param_count', 'step_of_measurement', 'rankme', 'quality',
]
REQUIRED_COLUMNS = ['name', 'depth', 'embed', 'data_hours', 'steps', 'mask_rate']
OPTIONAL_COLUMNS = ['architecture']

# pydantic 필드 경로 -> CSV 컬럼명 (검증 오류 보고용)
FIELD_TO_COLUMN = {
    ('config', 'name'): 'name',
    ('config', 'encoder_depth'): 'depth',
    ('config', 'embed_dim'): 'embed',
    ('config', 'mlp_dim'): 'mlp',
    ('config', 'num_heads'): 'heads',
    ('config', 'architecture'): 'architecture',
}


# ===================================================================
# 데이터 모델
# ===================================================================

class ModelConfig(BaseModel):
    """인코더 아키텍처 설정"""
    model_config = ConfigDict(frozen=True)

    name: str
    encoder_depth: int = Field(ge=1)
    embed_dim: int = Field(ge=1)
    mlp_dim: int = Field(ge=1)
    num_heads: int = Field(ge=1)
    architecture: str = FAMILY_ARCHITECTURE

    @model_validator(mode='after')
    def _check_family(self):
        if self.architecture == FAMILY_ARCHITECTURE and not self.is_family:
            logger.warning(
                f"⚠️ {self.name}: 패밀리 규칙과 다릅니다 "
                f"(mlp={self.mlp_dim}, heads={self.num_heads}, embed={self.embed_dim})"
            )
        return self

    @property
    def is_family(self) -> bool:
        """mlp = 4 * embed, heads = embed / 64 인 마스크드 오토인코더 패밀리 여부"""
        return (self.architecture == FAMILY_ARCHITECTURE
                and self.mlp_dim == 4 * self.embed_dim
                and self.embed_dim % 64 == 0
                and self.num_heads == self.embed_dim // 64)

    @property
    def family_name(self) -> str:
        return f"en{self.embed_dim}-{self.encoder_depth}"

    @classmethod
    def for_family(cls, depth: int, embed: int, name: Optional[str] = None) -> "ModelConfig":
        """depth/embed 로 패밀리 설정 생성 (mlp, heads 자동 계산)"""
        return cls(
            name=name or f"en{embed}-{depth}",
            encoder_depth=depth,
            embed_dim=embed,
            mlp_dim=4 * embed,
            num_heads=max(embed // 64, 1),
        )


class CheckpointRecord(BaseModel):
    """사전학습 체크포인트 하나의 메타데이터"""
    model_config = ConfigDict(frozen=True)

    config: ModelConfig
    data_hours: float = Field(ge=0, allow_inf_nan=False)
    steps: int = Field(ge=0)
    batch_size: int = Field(DEFAULT_BATCH_SIZE, ge=1)
    mask_rate: float = Field(ge=0, le=1)
    param_count: Optional[int] = Field(None, ge=0)
    rankme: Optional[float] = Field(None, gt=0, allow_inf_nan=False)
    quality: Optional[float] = Field(None, ge=0, le=1)
    step_of_measurement: int = Field(ge=0)
    # 스키마 밖의 숫자 컬럼 (태스크별 점수 등)
    scores: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode='after')
    def _check_steps(self):
        if self.steps < self.step_of_measurement:
            raise ValueError(
                f"steps({self.steps}) 는 step_of_measurement({self.step_of_measurement}) 이상이어야 합니다"
            )
        return self


class GroupKey(NamedTuple):
    name: str
    encoder_depth: int
    embed_dim: int
    mlp_dim: int
    num_heads: int
    architecture: str
    mask_rate: float
    data_hours: float


def config_key(record: CheckpointRecord) -> GroupKey:
    """(설정, mask_rate, data_hours) 그룹 키"""
    c = record.config
    return GroupKey(c.name, c.encoder_depth, c.embed_dim, c.mlp_dim, c.num_heads,
                    c.architecture, float(record.mask_rate), float(record.data_hours))


# ===================================================================
# 체크포인트 로드 / 저장
# ===================================================================

def _parse_number(cell: str, row: int, column: str, integer: bool = False):
    """CSV 셀 -> 숫자 (빈 셀은 None)"""
    text = str(cell).strip()
    if text == "" or text.lower() in ("nan", "none", "null"):
        return None
    try:
        value = float(text)
    except ValueError:
        raise CheckpointFileError(f"숫자 파싱 실패: '{text}'", row=row, column=column)
    if not math.isfinite(value):
        raise CheckpointFileError(f"유한한 값이 아닙니다: '{text}'", row=row, column=column)
    if integer:
        if value != int(value):
            raise CheckpointFileError(f"정수가 필요합니다: '{text}'", row=row, column=column)
        return int(value)
    return value


def _column_of(loc: Tuple) -> Optional[str]:
    if loc in FIELD_TO_COLUMN:
        return FIELD_TO_COLUMN[loc]
    if loc and loc[0] == 'scores':
        return str(loc[-1])
    return str(loc[0]) if loc else None


def _record_from_row(row: Dict[str, str], row_number: int,
                     extra_columns: Sequence[str]) -> CheckpointRecord:
    def number(column, integer=False):
        return _parse_number(row.get(column, ""), row_number, column, integer)

    name = str(row.get('name', "")).strip()
    if not name:
        raise CheckpointFileError("name 이 비어 있습니다", row=row_number, column='name')

    depth = number('depth', integer=True)
    embed = number('embed', integer=True)
    for column, value in (('depth', depth), ('embed', embed)):
        if value is None:
            raise CheckpointFileError("필수 값이 비어 있습니다", row=row_number, column=column)
    mlp = number('mlp', integer=True)
    heads = number('heads', integer=True)
    steps = number('steps', integer=True)
    step_of_measurement = number('step_of_measurement', integer=True)
    batch_size = number('batch_size', integer=True)
    for column in ('data_hours', 'steps', 'mask_rate'):
        if number(column) is None:
            raise CheckpointFileError("필수 값이 비어 있습니다", row=row_number, column=column)

    scores = {}
    for column in extra_columns:
        try:
            value = number(column)
        except CheckpointFileError:
            # 숫자가 아닌 부가 컬럼 (메모 등) 은 무시
            logger.debug(f"row {row_number}: 숫자가 아닌 '{column}' 값 무시")
            continue
        if value is not None:
            scores[column] = value

    payload = {
        'config': {
            'name': name,
            'encoder_depth': depth,
            'embed_dim': embed,
            'mlp_dim': mlp if mlp is not None else 4 * embed,
            'num_heads': heads if heads is not None else max(embed // 64, 1),
            'architecture': str(row.get('architecture', "") or FAMILY_ARCHITECTURE).strip(),
        },
        'data_hours': number('data_hours'),
        'steps': steps,
        'batch_size': batch_size if batch_size is not None else DEFAULT_BATCH_SIZE,
        'mask_rate': number('mask_rate'),
        'param_count': number('param_count', integer=True),
        'rankme': number('rankme'),
        'quality': number('quality'),
        'step_of_measurement': step_of_measurement if step_of_measurement is not None else steps,
        'scores': scores,
    }

    try:
        record = CheckpointRecord.model_validate(payload)
    except ValidationError as e:
        error = e.errors()[0]
        loc = tuple(x for x in error['loc'] if x != '__root__')
        column = _column_of(loc) if loc else None
        raise CheckpointFileError(error['msg'], row=row_number, column=column)

    # param_count 가 비어 있으면 패밀리 추정치로 채움
    if record.param_count is None and record.config.is_family:
        record = record.model_copy(update={'param_count': estimate_param_count(record.config)})
    return record


def _read_rows(path: str) -> Tuple[List[str], List[Dict[str, str]]]:
    """CSV/JSON 파일을 (컬럼 목록, 문자열 행 목록) 으로 읽음"""
    if path.lower().endswith('.json'):
        with open(path, 'r', encoding='utf-8') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise CheckpointFileError(f"JSON 파싱 실패: {e}")
        if not isinstance(data, list) or not all(isinstance(item, dict) for item in data):
            raise CheckpointFileError("JSON 체크포인트 파일은 객체 배열이어야 합니다")
        columns = []
        for item in data:
            columns.extend(key for key in item if key not in columns)
        rows = [{key: ("" if value is None else str(value)) for key, value in item.items()}
                for item in data]
        return columns, rows

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise CheckpointFileError(f"CSV 파싱 실패: {e}")
    df.columns = [str(c).strip() for c in df.columns]
    return list(df.columns), df.to_dict('records')


def load_checkpoints(source: str) -> List[CheckpointRecord]:
    """체크포인트 테이블 로드 (행당 레코드 하나, 모든 불변식 검증)"""
    columns, rows = _read_rows(source)

    missing = [c for c in REQUIRED_COLUMNS if c not in columns]
    if missing:
        raise CheckpointFileError(f"필수 컬럼이 없습니다: {missing}", column=missing[0])

    known = set(CHECKPOINT_COLUMNS) | set(OPTIONAL_COLUMNS)
    extra_columns = [c for c in columns if c not in known]

    # 데이터 행 번호는 1부터
    records = [_record_from_row(row, i + 1, extra_columns) for i, row in enumerate(rows)]
    logger.info(f"✅ 체크포인트 {len(records)}개 로드 완료: {source}")
    return records


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_to_row(record: CheckpointRecord) -> Dict[str, object]:
    c = record.config
    row = {
        'name': c.name,
        'depth': c.encoder_depth,
        'embed': c.embed_dim,
        'mlp': c.mlp_dim,
        'heads': c.num_heads,
        'data_hours': record.data_hours,
        'steps': record.steps,
        'batch_size': record.batch_size,
        'mask_rate': record.mask_rate,
        'param_count': record.param_count,
        'step_of_measurement': record.step_of_measurement,
        'rankme': record.rankme,
        'quality': record.quality,
        'architecture': c.architecture,
    }
    row.update(record.scores)
    return row


def save_checkpoints(records: Sequence[CheckpointRecord], path: str) -> None:
    """체크포인트 저장 (확장자 .json 이면 JSON, 아니면 CSV). 실수는 repr 로 무손실 기록"""
    rows = [record_to_row(r) for r in records]
    columns = CHECKPOINT_COLUMNS + OPTIONAL_COLUMNS
    for row in rows:
        columns.extend(key for key in row if key not in columns)

    if path.lower().endswith('.json'):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(rows, f, ensure_ascii=False, indent=2)
    else:
        df = pd.DataFrame([{c: _cell(row.get(c)) for c in columns} for row in rows],
                          columns=columns)
        df.to_csv(path, index=False, encoding='utf-8')
    logger.info(f"✅ 체크포인트 {len(rows)}개 저장: {path}")


def records_table(records: Sequence[CheckpointRecord],
                  tokens_per_sample: int = DEFAULT_TOKENS_PER_SAMPLE) -> pd.DataFrame:
    """레코드 -> DataFrame (compute 파생 컬럼 포함, 없으면 NaN)"""
    rows = []
    for record in records:
        row = record_to_row(record)
        try:
            row['compute'] = compute_budget(record, tokens_per_sample)
        except InvalidRecordError:
            row['compute'] = None
        rows.append(row)
    df = pd.DataFrame(rows)
    numeric = [c for c in df.columns if c not in ('name', 'architecture')]
    df[numeric] = df[numeric].apply(pd.to_numeric, errors='coerce')
    return df


# ===================================================================
# 임베딩 행렬 파일 포맷
# ===================================================================

EMBEDDING_MAGIC = b"EMBR"
EMBEDDING_VERSION = 1
_HEADER_SIZE = len(EMBEDDING_MAGIC) + 3 * 4


def write_embeddings(path: str, matrix) -> None:
    """
    임베딩 행렬 저장

    바이너리: 'EMBR' + u32 version + u32 rows + u32 cols + rows*cols little-endian f32 (row-major)
    .csv 확장자면 한 줄에 임베딩 하나씩 콤마 구분
    """
    arr = np.ascontiguousarray(np.asarray(matrix), dtype='<f4')
    if arr.ndim != 2:
        raise EmbeddingFileError(f"2차원 행렬만 저장할 수 있습니다 (ndim={arr.ndim})")

    if path.lower().endswith('.csv'):
        # float32 왕복에 충분한 9 유효숫자
        np.savetxt(path, arr, delimiter=",", fmt="%.9g")
        return

    rows, cols = arr.shape
    with open(path, 'wb') as f:
        f.write(EMBEDDING_MAGIC)
        f.write(np.array([EMBEDDING_VERSION, rows, cols], dtype='<u4').tobytes())
        f.write(arr.tobytes())


def read_embeddings(path: str) -> np.ndarray:
    """임베딩 행렬 로드 (float32, rows x cols)"""
    if path.lower().endswith('.csv'):
        try:
            arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64).astype(np.float32)
        except ValueError as e:
            raise EmbeddingFileError(f"임베딩 CSV 파싱 실패: {e}")
    else:
        with open(path, 'rb') as f:
            data = f.read()
        if len(data) < _HEADER_SIZE or data[:4] != EMBEDDING_MAGIC:
            raise EmbeddingFileError(f"EMBR 헤더가 없습니다: {path}")
        version, rows, cols = np.frombuffer(data, dtype='<u4', count=3, offset=4)
        if version != EMBEDDING_VERSION:
            raise EmbeddingFileError(f"지원하지 않는 포맷 버전: {version}")
        expected = _HEADER_SIZE + 4 * int(rows) * int(cols)
        if len(data) != expected:
            raise EmbeddingFileError(
                f"파일 크기 불일치: {len(data)} bytes (예상 {expected}, {rows}x{cols})"
            )
        arr = np.frombuffer(data, dtype='<f4', offset=_HEADER_SIZE).reshape(int(rows), int(cols))

    if arr.size == 0:
        raise EmbeddingFileError(f"빈 임베딩 행렬입니다: {path}")
    if not np.all(np.isfinite(arr)):
        raise EmbeddingFileError(f"임베딩에 NaN/Inf 값이 있습니다: {path}")
    return arr


# ===================================================================
# 파라미터 수 추정 / compute budget
# ===================================================================

# 블록당 12E^2 (attention 4E^2 + MLP 8E^2) + 13E (bias, LayerNorm 2개)
BLOCK_QUADRATIC = 12
BLOCK_LINEAR = 13
# 고정 디코더 + 임베딩/프로젝션 오버헤드 (en128-12, en768-12 두 행으로 보정 후 고정)
OVERHEAD_FIXED = 25_479_776.0
OVERHEAD_PER_EMBED = 1023.125
CALIBRATION_ANCHORS = (
    (12, 128, 27_990_000),
    (12, 768, 111_320_000),
)


def encoder_block_params(embed: int) -> int:
    return BLOCK_QUADRATIC * embed * embed + BLOCK_LINEAR * embed


def calibrate_overhead(anchors: Sequence[Tuple[int, int, float]]) -> Tuple[float, float]:
    """두 개의 (depth, embed, 공개 파라미터 수) 행으로 (고정 오버헤드, embed 당 오버헤드) 계산"""
    if len(anchors) != 2:
        raise ValueError("보정에는 정확히 2개의 기준 행이 필요합니다")
    (d1, e1, p1), (d2, e2, p2) = anchors
    if e1 == e2:
        raise ValueError("기준 행의 embed 값이 달라야 합니다")
    r1 = p1 - d1 * encoder_block_params(e1)
    r2 = p2 - d2 * encoder_block_params(e2)
    per_embed = (r2 - r1) / (e2 - e1)
    return r1 - per_embed * e1, per_embed


def estimate_param_count(config: ModelConfig) -> int:
    """마스크드 오토인코더 패밀리의 전체 파라미터 수 추정"""
    if not config.is_family:
        raise UnsupportedConfigError(
            f"{config.name}: 패밀리 설정(mlp = 4*embed, heads = embed/64)만 추정할 수 있습니다"
        )
    total = (config.encoder_depth * encoder_block_params(config.embed_dim)
             + OVERHEAD_FIXED + OVERHEAD_PER_EMBED * config.embed_dim)
    return int(round(total))


def compute_budget(record: CheckpointRecord,
                   tokens_per_sample: int = DEFAULT_TOKENS_PER_SAMPLE) -> float:
    """학습 multiply-add 수 C = 6 * N * steps * batch_size * tokens_per_sample"""
    if not record.param_count:
        raise InvalidRecordError(f"{record.config.name}: param_count 가 없거나 0 입니다")
    if record.steps < 1:
        raise InvalidRecordError(f"{record.config.name}: steps 는 1 이상이어야 합니다")
    if tokens_per_sample < 1:
        raise InvalidRecordError(f"tokens_per_sample 은 1 이상이어야 합니다: {tokens_per_sample}")
    # 정수 곱으로 계산 후 float 변환
    return float(6 * record.param_count * record.steps * record.batch_size * tokens_per_sample)


# ===================================================================
# 그룹핑
# ===================================================================

def group_by_config(records: Sequence[CheckpointRecord]) -> Dict[GroupKey, List[CheckpointRecord]]:
    """(설정, mask_rate, data_hours) 별 그룹. 키 순서로 정렬, 그룹 내부는 측정 스텝 순"""
    groups: Dict[GroupKey, List[CheckpointRecord]] = {}
    for record in records:
        groups.setdefault(config_key(record), []).append(record)
    return {
        key: sorted(groups[key], key=lambda r: r.step_of_measurement)
        for key in sorted(groups)
    }


def group_by_architecture(records: Sequence[CheckpointRecord]) -> Dict[str, List[CheckpointRecord]]:
    """
    아키텍처 별 그룹 (여러 설정을 한 곡선으로 피팅할 때)

    아키텍처 이름순, 그룹 내부는 (설정 키, 측정 스텝) 순
    """
    groups: Dict[str, List[CheckpointRecord]] = {}
    for record in records:
        groups.setdefault(record.config.architecture, []).append(record)
    return {
        name: sorted(groups[name], key=lambda r: (config_key(r), r.step_of_measurement))
        for name in sorted(groups)
    }


def latest_per_group(records: Sequence[CheckpointRecord]) -> List[CheckpointRecord]:
    """그룹별 마지막 측정 스텝 레코드만 (수렴 체크포인트 뷰)"""
    return [group[-1] for group in group_by_config(records).values()]


def file_digest(path: str) -> str:
    """입력 파일 sha256"""
    sha = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()
