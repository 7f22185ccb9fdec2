import math

import numpy as np
import pytest

from rankscale.errors import (AmbiguousRecordError, DegenerateVarianceError, InsufficientPairsError,
                              InvalidInputError)
from rankscale.reference_data import EARLY_STEP, LATE_STEP
from rankscale.registry import CheckpointRecord, ModelConfig
from rankscale.stats import (early_late_correlation, pair_checkpoints, pearson, r_squared,
                             selection_agreement)

TABLE_PCC = 0.918216841635


def _brute_force_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


class TestRSquared:

    def test_perfect(self):
        assert r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    def test_mean_prediction(self):
        assert r_squared([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]) == 0.0

    def test_hand_case(self):
        assert r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]) == 0.5

    def test_can_be_negative(self):
        assert r_squared([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) < 0

    def test_constant_actual(self):
        with pytest.raises(DegenerateVarianceError):
            r_squared([2.0, 2.0], [1.0, 3.0])

    @pytest.mark.parametrize("a, b", [([1.0], [1.0]), ([1.0, 2.0], [1.0]),
                                      ([1.0, float("nan")], [1.0, 2.0])])
    def test_invalid(self, a, b):
        with pytest.raises(InvalidInputError):
            r_squared(a, b)


class TestPearson:

    def test_affine(self):
        x = [0.3, 1.2, 2.5, 4.0]
        assert pearson(x, [2 * v + 1 for v in x]) == pytest.approx(1.0, abs=1e-15)
        assert pearson(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-15)

    def test_hand_case(self):
        assert pearson([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-15)

    @pytest.mark.parametrize("seed", range(50))
    def test_affine_invariance_and_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(20)
        y = 0.5 * x + rng.standard_normal(20)
        a, b = rng.uniform(0.1, 10.0), rng.uniform(-5.0, 5.0)
        r = pearson(x, y)
        assert pearson(y, x) == pytest.approx(r, abs=1e-12)
        assert pearson(a * x + b, y) == pytest.approx(r, abs=1e-12)
        assert pearson(-a * x + b, y) == pytest.approx(-r, abs=1e-12)
        assert r == pytest.approx(_brute_force_pearson(list(x), list(y)), abs=1e-12)

    def test_zero_variance(self):
        with pytest.raises(DegenerateVarianceError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


class TestEarlyLateAnalysis:

    def test_reference_table_correlation(self, early_late_records):
        report = early_late_correlation(early_late_records, EARLY_STEP, LATE_STEP)
        pairs = report.pairs
        expected = _brute_force_pearson([p.rankme for p in pairs], [p.quality for p in pairs])
        assert report.n_pairs == 5
        assert report.pcc == pytest.approx(expected, abs=1e-12)
        assert report.pcc == pytest.approx(TABLE_PCC, abs=1e-11)

    def test_reference_table_selection(self, early_late_records):
        agreement = selection_agreement(early_late_records, EARLY_STEP, LATE_STEP)
        assert agreement.agreement
        assert agreement.selected_by_rankme == "en1024-12"
        assert agreement.selected_by_quality == "en1024-12"
        assert agreement.footrule_distance == 0
        assert agreement.rankme_order == ["en1024-12", "en768-12", "en512-12", "en256-12",
                                          "en128-12"]

    def test_order_invariance(self, early_late_records):
        shuffled = [early_late_records[i]
                    for i in np.random.default_rng(3).permutation(len(early_late_records))]
        assert (early_late_correlation(shuffled, EARLY_STEP, LATE_STEP)
                == early_late_correlation(early_late_records, EARLY_STEP, LATE_STEP))

    def test_monotone_nonlinear_relation(self):
        records = []
        for i, embed in enumerate([128, 256, 512, 768, 1024]):
            config = ModelConfig.for_family(12, embed)
            rank = 10.0 * (i + 1)
            records.append(_record(config, 100, rankme=rank))
            records.append(_record(config, 700, quality=1 - 1 / rank))
        pcc = early_late_correlation(records, 100, 700).pcc
        assert 0 < pcc <= 1

    def test_single_configuration(self, early_late_records):
        single = [r for r in early_late_records if r.config.name == "en768-12"]
        with pytest.raises(InsufficientPairsError):
            early_late_correlation(single, EARLY_STEP, LATE_STEP)
        assert selection_agreement(single, EARLY_STEP, LATE_STEP).agreement

    def test_no_pairs(self, early_late_records):
        with pytest.raises(InsufficientPairsError):
            selection_agreement(early_late_records, 5, 6)

    def test_duplicate_configuration(self, early_late_records):
        with pytest.raises(AmbiguousRecordError):
            pair_checkpoints(list(early_late_records) + [early_late_records[0]],
                             EARLY_STEP, LATE_STEP)


def _record(config, step, rankme=None, quality=None):
    return CheckpointRecord(config=config, data_hours=100.0, steps=step, mask_rate=0.75,
                            step_of_measurement=step, rankme=rankme, quality=quality)


def _early_late_table(rankmes, qualities):
    records = []
    for depth, (rank, quality) in enumerate(zip(rankmes, qualities), start=1):
        config = ModelConfig.for_family(depth, 768)
        records.append(_record(config, 100, rankme=float(rank)))
        records.append(_record(config, 700, quality=float(quality)))
    return records


class TestSelectionAgreement:

    @pytest.mark.parametrize("n, footrule_max", [(2, 2), (4, 8), (5, 12), (7, 24)])
    def test_reversed_ordering_is_maximally_distant(self, n, footrule_max):
        rankmes = np.linspace(10.0, 50.0, n)
        qualities = np.linspace(0.9, 0.5, n)
        result = selection_agreement(_early_late_table(rankmes, qualities), 100, 700)
        assert not result.agreement
        assert result.rankme_order == list(reversed(result.quality_order))
        assert result.footrule_max == footrule_max
        assert result.footrule_distance == result.footrule_max

    @pytest.mark.parametrize("seed", range(10))
    def test_identical_ordering_agrees(self, seed):
        rng = np.random.default_rng(seed)
        rankmes = np.sort(rng.uniform(10.0, 500.0, size=6))
        qualities = np.sort(rng.uniform(0.3, 0.9, size=6))
        result = selection_agreement(_early_late_table(rankmes, qualities), 100, 700)
        assert result.agreement
        assert result.footrule_distance == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_selection_unchanged_by_monotone_transform(self, seed):
        rng = np.random.default_rng(seed)
        rankmes = rng.uniform(10.0, 500.0, size=6)
        qualities = rng.uniform(0.3, 0.9, size=6)
        base = selection_agreement(_early_late_table(rankmes, qualities), 100, 700)
        transformed = selection_agreement(
            _early_late_table(np.log(rankmes) ** 3, np.sqrt(qualities)), 100, 700)
        assert transformed.selected_by_rankme == base.selected_by_rankme
        assert transformed.selected_by_quality == base.selected_by_quality
        assert transformed.agreement == base.agreement
        assert transformed.rankme_order == base.rankme_order
        assert transformed.footrule_distance == base.footrule_distance
