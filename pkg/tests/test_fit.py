import dataclasses
import itertools
import warnings

import numpy as np
import pytest

from rankscale.errors import (DivergentStartError, DomainError, InsufficientFrontierDataError,
                              InvalidConfigError)
from rankscale.fit import (FitConfig, fit_compute_frontier, fit_joint_law,
                           fit_saturating_power_law, pareto_frontier,
                           solve_bounded_least_squares)
from rankscale.laws import (SATURATING, JointDataModelLaw, SaturatingPowerLaw, evaluate,
                            evaluate_joint)
from rankscale.stats import r_squared


def _saturating_data(law, xs, noise=0.0, seed=0):
    q = evaluate(law, np.asarray(xs))
    if noise:
        q = q + np.random.default_rng(seed).normal(0.0, noise, size=q.shape)
    return np.column_stack([xs, q])


def _assert_recovered(result, truth, rel):
    np.testing.assert_allclose(result.params, truth, rtol=rel)


def _stalled_family(jump=0.0):
    """Jacobian 은 0 이 아니지만 어떤 step 도 RSS 를 줄이지 못하는 패밀리"""
    first = []

    def value(theta, x):
        if not first:
            first.append(float(theta[0]))
        return 0.5 + jump * (theta[0] - first[0]) + 0.0 * x

    return dataclasses.replace(SATURATING, value=value,
                               jacobian=lambda theta, x: np.ones((x.size, 3)))


class TestFitConfig:

    @pytest.mark.parametrize("kwargs", [
        dict(max_iterations=0),
        dict(rss_tolerance=0.0),
        dict(gradient_tolerance=-1.0),
        dict(multi_start=0),
        dict(bounds={"alpha": (2.0, 1.0)}),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfigError):
            FitConfig(**kwargs)

    def test_unknown_bound_name(self):
        with pytest.raises(InvalidConfigError):
            FitConfig(bounds={"beta": (0.0, 1.0)}).bounds_for(SATURATING)

    def test_bounds_override(self):
        bounds = FitConfig(bounds={"q_inf": (0.5, 0.9)}).bounds_for(SATURATING)
        assert bounds[2] == (0.5, 0.9)
        assert bounds[0] == SATURATING.default_bounds[0]


class TestSolver:

    def test_init_outside_bounds(self):
        data = _saturating_data(SaturatingPowerLaw(100.0, 0.5, 0.85), np.geomspace(50, 700, 5))
        with pytest.raises(InvalidConfigError):
            solve_bounded_least_squares(SATURATING, data, [100.0, 0.5, 1.5], FitConfig())

    def test_divergent_start(self):
        data = np.array([[1.0, 0.5], [2.0, 0.6]])
        with pytest.raises(DivergentStartError):
            solve_bounded_least_squares(SATURATING, data, [1e300, 1e3, 0.5], FitConfig())

    def test_domain(self):
        with pytest.raises(DomainError):
            solve_bounded_least_squares(SATURATING, [[0.0, 0.5]], [1.0, 0.5, 0.9], FitConfig())

    def test_rss_trace_never_increases(self):
        law = SaturatingPowerLaw(100.0, 0.5, 0.85)
        data = _saturating_data(law, np.geomspace(50, 700, 20), noise=0.01, seed=3)
        result = solve_bounded_least_squares(SATURATING, data, [300.0, 1.5, 0.99], FitConfig())
        assert np.all(np.diff(result.rss_trace) <= 0)
        assert result.rss == pytest.approx(sum(r * r for r in result.residuals), rel=1e-12)

    def test_single_point_fits_exactly(self):
        result = fit_saturating_power_law([(100.0, 0.5)])
        assert result.converged
        assert abs(result.residuals[0]) < 1e-10
        assert result.underdetermined
        assert "underdetermined" in result.warnings
        assert result.r_squared is None

    def test_single_point_joint(self):
        result = fit_joint_law([(1e8, 1000.0, 0.6)])
        assert result.converged
        assert abs(result.residuals[0]) < 1e-10

    def test_stalled_start_is_not_converged(self):
        data = np.column_stack([np.geomspace(10, 100, 5), np.linspace(0.6, 0.9, 5)])
        result = solve_bounded_least_squares(_stalled_family(), data, [50.0, 0.5, 0.8], FitConfig())
        assert not result.converged
        assert result.rss == pytest.approx(float(np.sum((data[:, 1] - 0.5) ** 2)))
        assert result.rss_trace == [result.rss]

    def test_overflowing_trials_are_silent_and_not_converged(self):
        data = np.column_stack([np.geomspace(10, 100, 5), np.linspace(0.6, 0.9, 5)])
        with warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            result = solve_bounded_least_squares(_stalled_family(jump=1e200), data,
                                                 [50.0, 0.5, 0.8], FitConfig())
        assert not result.converged
        assert result.params[0] == pytest.approx(50.0)


class TestSaturatingFit:

    def test_reference_law_recovery(self):
        truth = (100.0, 0.5, 0.85)
        data = _saturating_data(SaturatingPowerLaw(*truth), np.geomspace(50, 700, 20))
        result = fit_saturating_power_law(data)
        _assert_recovered(result, truth, 0.01)
        assert result.r_squared >= 0.9999
        assert result.converged

    @pytest.mark.parametrize("seed", range(50))
    def test_seeded_recovery(self, seed):
        rng = np.random.default_rng(seed)
        truth = (float(np.exp(rng.uniform(np.log(10), np.log(1000)))),
                 float(rng.uniform(0.2, 1.5)),
                 float(rng.uniform(0.5, 0.95)))
        xs = truth[0] * np.geomspace(0.5, 50, 20)
        data = _saturating_data(SaturatingPowerLaw(*truth), xs)
        result = fit_saturating_power_law(data, FitConfig(seed=seed))

        _assert_recovered(result, truth, 0.01)
        assert result.r_squared >= 0.9999
        assert result.rss < 1e-12 * float(np.sum(data[:, 1] ** 2))
        assert np.all(np.diff(result.rss_trace) <= 0)
        x_c, alpha, q_inf = result.params
        assert x_c > 0 and alpha > 0 and 0 < q_inf < 1

    def test_noisy_recovery(self):
        truth = SaturatingPowerLaw(100.0, 0.8, 0.85)
        data = _saturating_data(truth, np.geomspace(50, 1e5, 30), noise=0.005, seed=42)
        result = fit_saturating_power_law(data)
        assert result.r_squared >= 0.98
        assert result.parameters["q_inf"] == pytest.approx(0.85, abs=0.02)

    def test_not_worse_than_brute_force_grid(self):
        truth = SaturatingPowerLaw(80.0, 0.7, 0.8)
        data = _saturating_data(truth, np.geomspace(30, 3000, 12), noise=0.01, seed=5)
        result = fit_saturating_power_law(data)

        x, q = data[:, 0], data[:, 1]
        best = np.inf
        for theta in itertools.product(np.geomspace(1, 1e4, 20), np.linspace(0.05, 3.0, 20),
                                       np.linspace(0.01, 0.99, 20)):
            best = min(best, float(np.sum((q - SATURATING.predict(theta, x)) ** 2)))
        assert result.rss <= best

    def test_order_invariance(self):
        data = _saturating_data(SaturatingPowerLaw(100.0, 0.5, 0.85), np.geomspace(50, 700, 20),
                                noise=0.01, seed=1)
        shuffled = data[np.random.default_rng(0).permutation(len(data))]
        a = fit_saturating_power_law(data)
        b = fit_saturating_power_law(shuffled)
        np.testing.assert_allclose(a.params, b.params, rtol=1e-9)

    def test_residuals_follow_input_order(self):
        data = _saturating_data(SaturatingPowerLaw(100.0, 0.5, 0.85), np.geomspace(700, 50, 8),
                                noise=0.01, seed=2)
        result = fit_saturating_power_law(data)
        np.testing.assert_allclose([row[0] for row in result.inputs], data[:, 0])
        np.testing.assert_allclose(np.asarray(result.observed) - result.predicted,
                                   result.residuals, atol=1e-15)

    def test_r_squared_consistent_with_stats(self):
        data = _saturating_data(SaturatingPowerLaw(100.0, 0.5, 0.85), np.geomspace(50, 700, 15),
                                noise=0.02, seed=7)
        result = fit_saturating_power_law(data)
        assert result.r_squared == pytest.approx(r_squared(result.observed, result.predicted),
                                                 abs=1e-12)

    def test_constant_quality_is_non_identifiable(self):
        data = [(x, 0.7) for x in np.geomspace(10, 1000, 10)]
        result = fit_saturating_power_law(data)
        assert result.non_identifiable
        assert "non_identifiable" in result.warnings
        assert result.r_squared is None

    def test_law_property_reproduces_predictions(self):
        data = _saturating_data(SaturatingPowerLaw(100.0, 0.5, 0.85), np.geomspace(50, 700, 10),
                                noise=0.01, seed=4)
        result = fit_saturating_power_law(data, variable="data")
        law = result.law
        assert law.variable == "data"
        np.testing.assert_allclose(evaluate(law, data[:, 0]), result.predicted, rtol=0, atol=1e-12)


def _joint_instance(seed):
    rng = np.random.default_rng(seed)
    alpha = -float(rng.uniform(0.6, 1.2))
    truth = JointDataModelLaw(
        q_inf=float(rng.uniform(0.7, 0.9)),
        alpha=alpha,
        n_c=float(np.exp(rng.uniform(np.log(1e7), np.log(1e8)))),
        alpha_n=alpha * float(rng.uniform(0.3, 0.7)),
        d_c=float(np.exp(rng.uniform(np.log(100), np.log(5000)))),
        alpha_d=alpha * float(rng.uniform(0.3, 0.7)),
    )
    ns = truth.n_c * np.geomspace(0.1, 10, 5)
    ds = truth.d_c * np.geomspace(0.1, 10, 5)
    data = np.array([(n, d, evaluate_joint(truth, n, d)) for n in ns for d in ds])
    return truth, data


class TestJointFit:

    @pytest.mark.parametrize("seed", range(10))
    def test_grid_recovery(self, seed):
        truth, data = _joint_instance(seed)
        result = fit_joint_law(data, FitConfig(seed=seed))

        _assert_recovered(result, truth.params, 0.05)
        assert result.r_squared >= 0.999

        ns, ds = np.unique(data[:, 0]), np.unique(data[:, 1])
        nn, dd = np.meshgrid(ns, ds, indexing="ij")
        grid = evaluate_joint(result.law, nn, dd)
        assert np.all(np.diff(grid, axis=0) >= -1e-12)
        assert np.all(np.diff(grid, axis=1) >= -1e-12)

    def test_pure_model_size_law(self):
        truth = JointDataModelLaw(q_inf=0.8, alpha=-0.9, n_c=3e7, alpha_n=-0.45,
                                  d_c=1.0, alpha_d=-0.4)
        ns = np.geomspace(3e6, 3e9, 12)
        data = np.array([(n, 1e12, evaluate_joint(truth, n, 1e12)) for n in ns])
        result = fit_joint_law(data)
        assert np.max(np.abs(result.residuals)) < 1e-3

    def test_constant_quality_is_non_identifiable(self):
        data = [(n, d, 0.6) for n in (1e7, 1e8, 1e9) for d in (10.0, 100.0, 1000.0)]
        result = fit_joint_law(data)
        assert result.non_identifiable


class TestParetoFrontier:

    def test_dominated_point_removed(self):
        assert pareto_frontier([(1, 0.5), (2, 0.4)]) == [(1.0, 0.5)]

    def test_strictly_improving_kept(self):
        points = [(1, 0.3), (2, 0.5), (3, 0.6)]
        assert pareto_frontier(points) == [(1.0, 0.3), (2.0, 0.5), (3.0, 0.6)]

    def test_duplicates_collapse(self):
        assert pareto_frontier([(1, 0.5), (1, 0.5), (2, 0.7)]) == [(1.0, 0.5), (2.0, 0.7)]

    def test_empty(self):
        assert pareto_frontier([]) == []

    def test_non_positive_compute(self):
        with pytest.raises(DomainError):
            pareto_frontier([(0.0, 0.5)])

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_brute_force_domination(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 201))
        # 작은 정수 격자로 동점을 자주 만든다
        points = [(float(c), float(q)) for c, q in
                  zip(rng.integers(1, 30, n), rng.integers(0, 30, n) / 30.0)]

        def dominated(p):
            return any(o[0] <= p[0] and o[1] >= p[1] and o != p for o in points)

        expected = sorted({p for p in points if not dominated(p)})
        frontier = pareto_frontier(points)
        assert frontier == expected
        assert all(b[0] > a[0] and b[1] > a[1] for a, b in zip(frontier, frontier[1:]))


class TestComputeFrontier:

    def test_recovers_planted_frontier_with_decoys(self):
        truth = SaturatingPowerLaw(x_c=1e16, alpha=0.3, q_inf=0.8, variable="compute")
        rng = np.random.default_rng(11)
        budgets = np.geomspace(1e17, 1e21, 15)
        points = [(c, evaluate(truth, c)) for c in budgets]
        for c in budgets:
            for _ in range(3):
                points.append((c * (1 + rng.uniform(0.01, 2.0)),
                               evaluate(truth, c) - rng.uniform(0.01, 0.2)))
        points = [points[i] for i in rng.permutation(len(points))]

        result = fit_compute_frontier(points)
        _assert_recovered(result, truth.params, 0.02)
        assert result.variable == "compute"
        assert len(result.frontier) == len(budgets)
        assert "frontier_envelope" not in result.warnings

    def test_identical_points_insufficient(self):
        with pytest.raises(InsufficientFrontierDataError):
            fit_compute_frontier([(1e18, 0.5)] * 10)

    def test_two_frontier_points_insufficient(self):
        with pytest.raises(InsufficientFrontierDataError):
            fit_compute_frontier([(1e18, 0.5), (2e18, 0.6), (3e18, 0.55)])
