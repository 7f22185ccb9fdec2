"""
샘플 체크포인트 테이블 생성기

정답 법칙(planted law)을 알고 있는 체크포인트 테이블을 만들어
피팅 / CLI 테스트와 데모 스크립트에서 사용합니다.

사용 예:
    python -m rankscale.sample_data --law rank --out sample_rank.csv
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np

from .config import LOG_FORMAT
from .laws import JointDataModelLaw, SaturatingPowerLaw, evaluate, evaluate_joint
from .registry import (DEFAULT_BATCH_SIZE, DEFAULT_TOKENS_PER_SAMPLE, CheckpointRecord,
                       ModelConfig, save_checkpoints)

logger = logging.getLogger(__name__)

TRAIN_STEPS = 746_000
DATA_HOURS = 10_666.0
MASK_RATE = 0.75


class SampleDataGenerator:
    def __init__(self, seed: int = 0, noise: float = 0.0):
        self.seed = seed
        self.noise = noise
        self.rng = np.random.default_rng(seed)
        self.base_config = ModelConfig.for_family(12, 768)

    def _quality(self, value: float) -> float:
        """관측 품질 (선택적 Gaussian 노이즈, [0, 1] 로 clip)"""
        if self.noise > 0:
            value = value + self.rng.normal(0.0, self.noise)
        return float(min(max(value, 0.0), 1.0))

    def _record(self, name: str, quality: float, **fields) -> CheckpointRecord:
        values = dict(
            config=self.base_config.model_copy(update={"name": name}),
            data_hours=DATA_HOURS,
            steps=TRAIN_STEPS,
            batch_size=DEFAULT_BATCH_SIZE,
            mask_rate=MASK_RATE,
            step_of_measurement=TRAIN_STEPS,
            quality=quality,
        )
        values.update(fields)
        if 'steps' in fields and 'step_of_measurement' not in fields:
            values['step_of_measurement'] = fields['steps']
        return CheckpointRecord(**values)

    def generate_saturating_table(self, law: SaturatingPowerLaw,
                                  xs: Sequence[float]) -> List[CheckpointRecord]:
        """law.variable 에 해당하는 컬럼에 x 를, quality 에 law(x) 를 기록"""
        records = []
        for i, x in enumerate(xs):
            name = f"{law.variable}-{i:02d}"
            if law.variable == "rank":
                records.append(self._record(name, self._quality(evaluate(law, x)),
                                            rankme=float(x)))
            elif law.variable == "data":
                records.append(self._record(name, self._quality(evaluate(law, x)),
                                            data_hours=float(x)))
            elif law.variable == "params":
                count = int(round(x))
                records.append(self._record(name, self._quality(evaluate(law, count)),
                                            param_count=count))
            else:
                records.extend(self.generate_compute_table(law, [x]))
        logger.info(f"✅ {law.variable} 법칙 샘플 {len(records)}개 생성")
        return records

    def generate_compute_table(self, law: SaturatingPowerLaw, budgets: Sequence[float],
                               decoys: int = 0, param_count: int = 111_320_000,
                               tokens_per_sample: int = DEFAULT_TOKENS_PER_SAMPLE
                               ) -> List[CheckpointRecord]:
        """
        효율 frontier 위의 체크포인트 + frontier 아래 decoy

        frontier 점: compute = 6 * N * steps * batch * tokens 가 budget 에 가장 가까운 steps.
        decoy: 같은 steps 에서 N 을 1~30% 키우고 quality 는 frontier 점보다 낮게 (항상 지배됨).
        """
        per_step = 6 * param_count * DEFAULT_BATCH_SIZE * tokens_per_sample
        records = []
        for i, budget in enumerate(budgets):
            steps = max(1, int(round(budget / per_step)))
            compute = float(per_step * steps)
            frontier_q = evaluate(law, compute)
            records.append(self._record(f"frontier-{i:02d}", self._quality(frontier_q),
                                        param_count=param_count, steps=steps))
            for j in range(decoys):
                bigger = int(round(param_count * (1.0 + self.rng.uniform(0.01, 0.3))))
                drop = self.rng.uniform(0.01, 0.1)
                records.append(self._record(f"decoy-{i:02d}-{j}",
                                            self._quality(frontier_q - drop),
                                            param_count=bigger, steps=steps))
        return records

    def generate_joint_grid(self, law: JointDataModelLaw, param_counts: Sequence[float],
                            data_hours: Sequence[float]) -> List[CheckpointRecord]:
        """(N, D) 격자 위 결합 법칙 품질"""
        records = []
        for i, n in enumerate(param_counts):
            count = int(round(n))
            for j, d in enumerate(data_hours):
                q = evaluate_joint(law, count, float(d))
                records.append(self._record(f"grid-{i}-{j}", self._quality(q),
                                            param_count=count, data_hours=float(d)))
        logger.info(f"✅ 결합 법칙 격자 {len(records)}개 생성")
        return records

    def save(self, records: Sequence[CheckpointRecord], path: str) -> None:
        save_checkpoints(records, path)


# 데모용 기본 법칙
DEMO_LAWS = {
    "rank": (SaturatingPowerLaw(x_c=20.0, alpha=0.5, q_inf=0.85, variable="rank"),
             np.geomspace(50, 700, 20)),
    "data": (SaturatingPowerLaw(x_c=20.0, alpha=0.4, q_inf=0.82, variable="data"),
             np.geomspace(55, 277_000, 20)),
    "params": (SaturatingPowerLaw(x_c=5e6, alpha=0.6, q_inf=0.81, variable="params"),
               np.geomspace(2.6e7, 7.1e8, 16)),
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT, stream=sys.stderr)
    parser = argparse.ArgumentParser(description="샘플 체크포인트 테이블 생성")
    parser.add_argument("--law", choices=sorted(DEMO_LAWS), default="rank")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--noise", type=float, default=0.0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    law, xs = DEMO_LAWS[args.law]
    generator = SampleDataGenerator(seed=args.seed, noise=args.noise)
    generator.save(generator.generate_saturating_table(law, xs), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
