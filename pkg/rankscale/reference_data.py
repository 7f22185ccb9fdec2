"""
패키지에 포함된 참조 데이터 로더

  - model_setups.json          : 마스크드 오토인코더 패밀리 16개 설정과 공개된 전체 파라미터 수
  - early_late_checkpoints.csv : 5개 설정의 100k / 700k 스텝 (RankMe, quality) 값
  - architecture_scale.csv     : 아키텍처별 base / large 규모의 (RankMe, quality) 값
"""
import json
import logging
import os
from dataclasses import dataclass
from typing import Dict, List

import pandas as pd

from .errors import CheckpointFileError, InvalidInputError
from .registry import CheckpointRecord, ModelConfig, load_checkpoints

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

EARLY_STEP = 100_000
LATE_STEP = 700_000
ARCHITECTURE_SCALE_COLUMNS = ("architecture", "scale", "rankme", "quality")


@dataclass(frozen=True)
class ReferenceSetup:
    """공개 설정 한 행"""
    config: ModelConfig
    param_count: int


@dataclass(frozen=True)
class ArchitectureScaleRow:
    architecture: str
    scale: str
    rankme: float
    quality: float


class ReferenceDataLoader:
    def __init__(self, data_dir: str = DATA_DIR):
        self.data_dir = data_dir

    @property
    def early_late_path(self) -> str:
        return os.path.join(self.data_dir, "early_late_checkpoints.csv")

    def load_model_setups(self) -> List[ReferenceSetup]:
        """설정 테이블 로드 (파라미터 수는 백만 단위 표기를 정수로 변환)"""
        path = os.path.join(self.data_dir, "model_setups.json")
        try:
            with open(path, "r", encoding="utf-8") as f:
                rows = json.load(f)
        except FileNotFoundError as e:
            raise CheckpointFileError(f"참조 설정 파일을 찾을 수 없습니다: {path}") from e

        setups = []
        for row in rows:
            config = ModelConfig(
                name=row["name"],
                encoder_depth=row["depth"],
                embed_dim=row["embed"],
                mlp_dim=row["mlp"],
                num_heads=row["heads"],
            )
            setups.append(ReferenceSetup(config=config,
                                         param_count=int(round(row["param_count_millions"] * 1e6))))
        logger.info(f"✅ 참조 설정 {len(setups)}개 로드")
        return setups

    def load_early_late_records(self) -> List[CheckpointRecord]:
        """초기/후기 스텝 (RankMe, quality) 체크포인트 레코드"""
        return load_checkpoints(self.early_late_path)

    def load_architecture_scale(self) -> List[ArchitectureScaleRow]:
        """아키텍처 x 규모 (RankMe, quality) 테이블"""
        path = os.path.join(self.data_dir, "architecture_scale.csv")
        try:
            df = pd.read_csv(path, encoding="utf-8")
        except FileNotFoundError as e:
            raise CheckpointFileError(f"아키텍처 테이블을 찾을 수 없습니다: {path}") from e
        missing = [c for c in ARCHITECTURE_SCALE_COLUMNS if c not in df.columns]
        if missing:
            raise InvalidInputError(f"{path}: 누락된 컬럼 {missing}")

        rows = [
            ArchitectureScaleRow(architecture=str(r.architecture), scale=str(r.scale),
                                 rankme=float(r.rankme), quality=float(r.quality))
            for r in df.itertuples(index=False)
        ]
        logger.info(f"✅ 아키텍처 테이블 {len(rows)}행 로드")
        return rows

    def architecture_table(self) -> Dict[str, Dict[str, ArchitectureScaleRow]]:
        """architecture -> scale -> 행"""
        table: Dict[str, Dict[str, ArchitectureScaleRow]] = {}
        for row in self.load_architecture_scale():
            table.setdefault(row.architecture, {})[row.scale] = row
        return table
