"""공용 pytest fixture"""
import numpy as np
import pytest

from rankscale.laws import SaturatingPowerLaw
from rankscale.reference_data import ReferenceDataLoader
from rankscale.sample_data import SampleDataGenerator


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def reference_loader():
    return ReferenceDataLoader()


@pytest.fixture(scope="session")
def model_setups(reference_loader):
    return reference_loader.load_model_setups()


@pytest.fixture(scope="session")
def early_late_records(reference_loader):
    return reference_loader.load_early_late_records()


@pytest.fixture
def planted_rank_law():
    return SaturatingPowerLaw(x_c=20.0, alpha=0.5, q_inf=0.85, variable="rank")


@pytest.fixture
def rank_checkpoint_csv(tmp_path, planted_rank_law):
    """정답 rank 법칙에서 만든 20행 체크포인트 CSV"""
    generator = SampleDataGenerator(seed=0)
    records = generator.generate_saturating_table(planted_rank_law, np.geomspace(50, 700, 20))
    path = tmp_path / "rank_checkpoints.csv"
    generator.save(records, str(path))
    return path


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    """테스트가 로컬 .env / 환경변수에 영향받지 않도록"""
    for name in ("RANKSCALE_SEED", "RANKSCALE_LOG_LEVEL", "RANKSCALE_SAMPLES",
                 "RANKSCALE_EPSILON", "RANKSCALE_MULTI_START", "RANKSCALE_MAX_ITERATIONS",
                 "RANKSCALE_TOKENS_PER_SAMPLE"):
        monkeypatch.delenv(name, raising=False)
