"""
rankscale 예외 정의

라이브러리 함수는 예외를 던지고, CLI(`cli.main`)만 exit_code로 변환합니다.
  - 2: 파일 I/O / 파싱 오류
  - 3: 수치적 퇴화 (spectrum, 분산, 발산)
  - 4: 데이터 부족 / 잘못된 입력
  - 5: 도달 불가능한 목표 품질
"""


class RankScaleError(Exception):
    """모든 rankscale 오류의 기본 클래스"""
    exit_code = 1


# ===== 파일 / 파싱 (exit 2) =====
class CheckpointFileError(RankScaleError, ValueError):
    """체크포인트 테이블 파싱/검증 실패 (행, 컬럼 정보 포함)"""
    exit_code = 2

    def __init__(self, message: str, row: int = None, column: str = None):
        self.row = row
        self.column = column
        context = []
        if row is not None:
            context.append(f"row {row}")
        if column is not None:
            context.append(f"column '{column}'")
        prefix = f"[{', '.join(context)}] " if context else ""
        super().__init__(f"{prefix}{message}")


class EmbeddingFileError(RankScaleError, ValueError):
    exit_code = 2


class ReportFileError(RankScaleError, ValueError):
    exit_code = 2


# ===== 수치 퇴화 (exit 3) =====
class DegenerateSpectrumError(RankScaleError, ValueError):
    exit_code = 3


class DegenerateVarianceError(RankScaleError, ValueError):
    exit_code = 3


class DivergentStartError(RankScaleError):
    exit_code = 3


# ===== 입력 / 데이터 (exit 4) =====
class InvalidInputError(RankScaleError, ValueError):
    exit_code = 4


class DomainError(RankScaleError, ValueError):
    exit_code = 4


class InvalidLawError(RankScaleError, ValueError):
    exit_code = 4


class InvalidConfigError(RankScaleError, ValueError):
    exit_code = 4


class UnsupportedConfigError(RankScaleError, ValueError):
    exit_code = 4


class InsufficientDataError(RankScaleError, ValueError):
    exit_code = 4


class InsufficientFrontierDataError(InsufficientDataError):
    pass


class InsufficientPairsError(InsufficientDataError):
    pass


class AmbiguousRecordError(RankScaleError, ValueError):
    exit_code = 4


# ===== 목표 도달 불가 (exit 5) =====
class UnreachableTargetError(RankScaleError, ValueError):
    exit_code = 5


class InvalidRecordError(RankScaleError, ValueError):
    """compute budget 등 파생 계산에 필요한 레코드 값이 없거나 잘못됨"""
    exit_code = 4
