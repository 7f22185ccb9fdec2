import math

import numpy as np
import pytest

from rankscale.errors import DegenerateSpectrumError, InvalidInputError
from rankscale.rankme import (DEFAULT_EPSILON, rankme, rankme_from_spectrum, subsample_rows,
                              subsample_stability_sweep)
from rankscale.synth import SpectrumSpec, random_orthogonal, synth_embeddings


class TestAnalyticSpectra:

    def test_hand_oracle_spectrum(self):
        score = rankme_from_spectrum([4.0, 2.0, 1.0, 1.0])
        assert score.value == pytest.approx(3.3636, abs=1e-3)
        assert score.value == pytest.approx(3.3635856610, rel=1e-6)

    def test_rank_one_matrix_is_one(self):
        z = synth_embeddings(SpectrumSpec.explicit([1.0] + [0.0] * 31), rows=200, seed=3)
        assert rankme(z).value == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("k", [4, 16, 128])
    def test_uniform_spectrum_gives_k(self, k):
        z = synth_embeddings(SpectrumSpec.uniform(k), rows=4 * k, seed=k)
        assert rankme(z).value == pytest.approx(k, rel=5e-3)

    def test_epsilon_added_after_normalisation(self):
        p = 0.5 + DEFAULT_EPSILON
        expected = math.exp(-2 * p * math.log(p))
        assert rankme_from_spectrum([3.0, 3.0]).value == pytest.approx(expected, rel=1e-14)

    def test_value_bounded_by_dimension(self, rng):
        z = rng.standard_normal((300, 40))
        assert 1.0 <= rankme(z).value <= 40.0 * (1 + 1e-5)

    def test_score_metadata(self, rng):
        score = rankme(rng.standard_normal((30, 5)), epsilon=1e-6)
        assert (score.sample_rows, score.embed_dim, score.epsilon) == (30, 5, 1e-6)
        assert score.to_dict()['value'] == score.value

    @pytest.mark.parametrize("k", [1, 2, 4, 8, 16, 32])
    def test_uniform_within_dimension_bound_for_small_k(self, k):
        assert rankme_from_spectrum(np.ones(k)).value <= k + 1e-3

    @pytest.mark.parametrize("k, expected, tol", [(128, 128.0063, 1e-3), (1536, 1537.4958, 1e-2)])
    def test_uniform_epsilon_overshoot_for_large_k(self, k, expected, tol):
        # epsilon 은 정규화 뒤에 더하고 재정규화하지 않으므로 K 가 크면 K 를 넘습니다
        value = rankme_from_spectrum(np.ones(k)).value
        assert value > k + 1e-3
        assert value == pytest.approx(expected, abs=tol)


class TestSpread:

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("k", [8, 32])
    def test_uniform_beats_perturbed_spectrum(self, k, seed):
        perturbed = np.random.default_rng(seed).uniform(0.5, 1.5, size=k)
        perturbed *= k / perturbed.sum()
        assert rankme_from_spectrum(np.ones(k)).value > rankme_from_spectrum(perturbed).value

    def test_flatter_geometric_spectrum_scores_higher(self):
        values = [rankme_from_spectrum(SpectrumSpec.geometric(r, 64).values).value
                  for r in (0.5, 0.7, 0.9, 0.99)]
        assert values == sorted(values)
        assert len(set(values)) == 4

    @pytest.mark.parametrize("seed", range(10))
    def test_epsilon_sensitivity_is_small(self, seed):
        s = np.random.default_rng(seed).uniform(0.5, 2.0, size=64)
        coarse = rankme_from_spectrum(s, epsilon=1e-7).value
        fine = rankme_from_spectrum(s, epsilon=1e-8).value
        assert abs(coarse - fine) / coarse < 1e-3


class TestInvariances:

    @pytest.mark.parametrize("seed", range(20))
    def test_scale_invariance(self, seed):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((64, 16)) * rng.uniform(0.1, 3.0, size=16)
        c = rng.uniform(1e-3, 1e3)
        assert rankme(c * z).value == pytest.approx(rankme(z).value, rel=1e-9)

    @pytest.mark.parametrize("seed", range(20))
    def test_orthogonal_invariance(self, seed):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((64, 16)) * rng.uniform(0.1, 3.0, size=16)
        q = random_orthogonal(16, seed + 100)
        assert rankme(z @ q).value == pytest.approx(rankme(z).value, rel=1e-9)


class TestErrors:

    def test_zero_spectrum_is_degenerate(self):
        with pytest.raises(DegenerateSpectrumError):
            rankme_from_spectrum([0.0, 0.0, 0.0])

    def test_zero_matrix_is_degenerate(self):
        with pytest.raises(DegenerateSpectrumError):
            rankme(np.zeros((10, 4)))

    def test_single_row_rejected(self):
        with pytest.raises(InvalidInputError):
            rankme(np.ones((1, 4)))

    @pytest.mark.parametrize("spectrum", [[], [1.0, -0.1], [1.0, np.nan]])
    def test_invalid_spectrum(self, spectrum):
        with pytest.raises(InvalidInputError):
            rankme_from_spectrum(spectrum)

    def test_non_positive_epsilon(self):
        with pytest.raises(InvalidInputError):
            rankme_from_spectrum([1.0, 1.0], epsilon=0.0)


class TestSubsampling:

    def test_full_size_subsample_is_identity(self, rng):
        z = rng.standard_normal((25, 6))
        np.testing.assert_array_equal(subsample_rows(z, 25, seed=9), z)

    def test_subsample_is_deterministic_and_without_replacement(self, rng):
        z = np.arange(100.0).reshape(50, 2)
        a = subsample_rows(z, 20, seed=5)
        b = subsample_rows(z, 20, seed=5)
        np.testing.assert_array_equal(a, b)
        assert len(np.unique(a[:, 0])) == 20
        assert np.all(np.diff(a[:, 0]) > 0)

    @pytest.mark.parametrize("n", [0, 51])
    def test_subsample_size_out_of_range(self, n):
        with pytest.raises(InvalidInputError):
            subsample_rows(np.ones((50, 2)), n, seed=0)

    def test_sweep_is_deterministic(self, rng):
        z = synth_embeddings(SpectrumSpec.geometric(0.9, 32), rows=2000, seed=1)
        first = subsample_stability_sweep(z, [200, 500], trials=3, seed=11)
        second = subsample_stability_sweep(z, [200, 500], trials=3, seed=11)
        assert first == second
        assert [e.size for e in first.entries] == [200, 500]
        assert all(len(e.values) == 3 for e in first.entries)

    @pytest.mark.parametrize("seed", range(3))
    def test_full_size_sweep_has_zero_deviation(self, rng, seed):
        z = rng.standard_normal((40, 8))
        entry = subsample_stability_sweep(z, [40], trials=1, seed=seed).entries[0]
        assert entry.relative_deviation == 0.0
        assert entry.std == 0.0

    def test_sweep_rejects_oversized_request(self, rng):
        with pytest.raises(InvalidInputError):
            subsample_stability_sweep(rng.standard_normal((10, 3)), [11], trials=1, seed=0)

    def test_desk_scale_stability(self):
        """50,000 x 256 geometric spectrum: 5k/8k/20k 서브샘플이 전체값과 2% 이내"""
        z = synth_embeddings(SpectrumSpec.geometric(0.9, 256), rows=50_000, seed=2024)
        report = subsample_stability_sweep(z, [5_000, 8_000, 20_000], trials=2, seed=0)
        for entry in report.entries:
            assert entry.relative_deviation < 0.02
