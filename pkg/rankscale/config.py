"""
rankscale 설정

.env → 환경변수 → 기본값 순서로 읽습니다. CLI에서는 플래그와 --config JSON이
이 값보다 우선합니다.
"""
import os
from dataclasses import dataclass

from dotenv import load_dotenv

# 환경변수 로드
load_dotenv()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass(frozen=True)
class Settings:
    """실행 설정 (환경변수 기반)"""
    seed: int = 0
    log_level: str = "INFO"
    samples: int = 30000
    epsilon: float = 1e-7
    multi_start: int = 16
    max_iterations: int = 5000
    tokens_per_sample: int = 250


def load_settings() -> Settings:
    """호출 시점의 환경변수로 Settings 생성"""
    return Settings(
        seed=int(os.getenv("RANKSCALE_SEED", "0")),
        log_level=os.getenv("RANKSCALE_LOG_LEVEL", "INFO").upper(),
        samples=int(os.getenv("RANKSCALE_SAMPLES", "30000")),
        epsilon=float(os.getenv("RANKSCALE_EPSILON", "1e-7")),
        multi_start=int(os.getenv("RANKSCALE_MULTI_START", "16")),
        max_iterations=int(os.getenv("RANKSCALE_MAX_ITERATIONS", "5000")),
        tokens_per_sample=int(os.getenv("RANKSCALE_TOKENS_PER_SAMPLE", "250")),
    )
