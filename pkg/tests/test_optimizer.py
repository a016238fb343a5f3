"""
Tests for the bee colony optimizers and the benchmark registry.
"""
from dataclasses import fields

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.benchmarks import BenchmarkFunction, BenchmarkRegistry, benchmark_registry, benchmark_suite, sphere
from src.core.optimizer import (
    RunConfig,
    SearchSpace,
    Sense,
    SubRegion,
    _Colony,
    fitness_map,
    neighborhood_move,
    partition,
    region_probs,
    run,
    run_abc,
    run_iabc,
    selection_probs,
)


def box(lower=-5.12, upper=5.12, dimension=2, objective=sphere, sense=Sense.MINIMIZE):
    return SearchSpace(
        lower=np.full(dimension, lower),
        upper=np.full(dimension, upper),
        objective=objective,
        sense=sense,
        vectorized=True,
    )


class TestMoves:
    """Test cases for the neighborhood move and probability helpers."""

    def test_identical_partner_is_fixed_point(self):
        rng = np.random.default_rng(0)
        x = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(neighborhood_move(x, x, 1, rng), x)

    def test_zero_step(self):
        x = np.array([1.0, 2.0])
        moved = neighborhood_move(x, np.array([4.0, 4.0]), 0, np.random.default_rng(0), phi=0.0)
        np.testing.assert_array_equal(moved, x)

    def test_clamped_to_bounds(self):
        moved = neighborhood_move(np.array([5.0]), np.array([1.0]), 0, np.random.default_rng(0),
                                  lower=np.array([0.0]), upper=np.array([6.0]), phi=0.5)
        assert moved[0] == 6.0
        unclamped = neighborhood_move(np.array([5.0]), np.array([1.0]), 0, np.random.default_rng(0), phi=0.5)
        assert unclamped[0] == 7.0

    def test_only_one_coordinate_changes(self):
        x, partner = np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.0, 0.0])
        moved = neighborhood_move(x, partner, 2, np.random.default_rng(5))
        np.testing.assert_array_equal(moved[:2], x[:2])

    def test_dimension_out_of_range(self):
        with pytest.raises(ValueError):
            neighborhood_move(np.zeros(2), np.ones(2), 2, np.random.default_rng(0))

    def test_selection_probs(self):
        np.testing.assert_allclose(selection_probs([1, 1, 2]), [0.25, 0.25, 0.5])
        np.testing.assert_allclose(selection_probs([3.0]), [1.0])
        np.testing.assert_allclose(selection_probs([10, 10, 20]), selection_probs([1, 1, 2]), atol=1e-12)

    def test_region_probs(self):
        np.testing.assert_allclose(region_probs([2.0, 2.0, 2.0, 2.0]), 0.25)
        np.testing.assert_allclose(region_probs([1, 3]), [0.25, 0.75])
        weights = np.array([0.2, 0.5, 0.9])
        permutation = np.array([2, 0, 1])
        np.testing.assert_allclose(region_probs(weights[permutation]), region_probs(weights)[permutation])
        assert abs(region_probs(np.random.default_rng(1).random(7) + 0.1).sum() - 1.0) <= 1e-12

    @pytest.mark.parametrize("helper", [selection_probs, region_probs])
    def test_non_positive_rejected(self, helper):
        with pytest.raises(ValueError):
            helper([1.0, 0.0])
        with pytest.raises(ValueError):
            helper([1.0, -2.0])

    def test_fitness_map_positive_and_ordered(self):
        values = np.array([3.0, -1.0, 10.0])
        minimize = fitness_map(values, Sense.MINIMIZE)
        maximize = fitness_map(values, Sense.MAXIMIZE)
        assert np.all(minimize > 0) and np.all(maximize > 0)
        assert np.argmax(minimize) == 1
        assert np.argmax(maximize) == 2


class TestPartition:
    """Test cases for sub-region layouts."""

    @pytest.mark.parametrize("v,layout", [(1, "slices"), (4, "slices"), (7, "slices"), (4, "grid"), (9, "grid")])
    def test_regions_cover_box_exactly_once(self, v, layout):
        space = box()
        regions = partition(space, v, layout)
        assert len(regions) == v
        rng = np.random.default_rng(v)
        points = rng.uniform(-5.12, 5.12, size=(1000, 2))
        corners = np.array([[-5.12, -5.12], [5.12, 5.12], [-5.12, 5.12], [5.12, -5.12], [0.0, 0.0]])
        points = np.vstack([points, corners])
        membership = np.column_stack([region.contains(points) for region in regions])
        np.testing.assert_array_equal(membership.sum(axis=1), 1)

    def test_regions_hold_geometry_and_run_holds_weights(self):
        assert {f.name for f in fields(SubRegion)} == {"lower", "upper", "closed_upper"}
        trace = run_iabc(box(), RunConfig(colony_size=10, max_iterations=5, v=4, seed=0))
        assert len(trace.region_weights) == 5
        assert all(weights.shape == (4,) and np.all(weights > 0) for weights in trace.region_weights)

    def test_grid_needs_perfect_power(self):
        with pytest.raises(ValueError):
            partition(box(), 3, "grid")

    def test_unknown_layout(self):
        with pytest.raises(ValueError):
            partition(box(), 2, "spiral")


class TestRunConfig:
    """Test cases for RunConfig validation."""

    def test_defaults(self):
        config = RunConfig()
        assert config.colony_size == 200
        assert config.source_count == 100
        assert config.scout_limit(2) == 400

    def test_explicit_limit(self):
        assert RunConfig(limit=7).scout_limit(2) == 7

    def test_invalid(self):
        with pytest.raises(ValidationError):
            RunConfig(max_iterations=0)
        with pytest.raises(ValidationError):
            RunConfig(colony_size=1)
        with pytest.raises(ValidationError):
            RunConfig(theta_min=10.0, theta_max=1.0)


class TestRuns:
    """Test cases for run_abc / run_iabc behavior."""

    @pytest.fixture
    def small(self):
        return RunConfig(colony_size=20, max_iterations=40, seed=3)

    @pytest.mark.parametrize("algorithm", ["abc", "iabc"])
    def test_trace_is_monotone(self, small, algorithm):
        minimized = run(box(), small, algorithm)
        assert np.all(np.diff(minimized.best_values) <= 0)
        maximized = run(benchmark_registry.require("f2").search_space(), small, algorithm)
        assert np.all(np.diff(maximized.best_values) >= 0)

    @pytest.mark.parametrize("algorithm", ["abc", "iabc"])
    def test_deterministic(self, small, algorithm):
        first = run(box(), small, algorithm)
        second = run(box(), small, algorithm)
        np.testing.assert_array_equal(first.best_values, second.best_values)
        np.testing.assert_array_equal(first.best.position, second.best.position)

    @pytest.mark.parametrize("algorithm", ["abc", "iabc"])
    def test_positions_stay_in_box(self, small, algorithm):
        seen = []

        def recording_sphere(positions):
            seen.append(np.array(positions))
            return sphere(positions)

        run(box(-2.0, 3.0, objective=recording_sphere), small, algorithm)
        evaluated = np.vstack(seen)
        assert evaluated.min() >= -2.0 and evaluated.max() <= 3.0

    def test_one_iteration(self):
        trace = run_abc(box(), RunConfig(colony_size=20, max_iterations=1, seed=1))
        assert trace.best_values.size == 1
        assert trace.best_values[0] <= trace.initial_best
        assert trace.convergence_iteration == 1

    def test_evaluation_count_without_scouts(self):
        config = RunConfig(colony_size=10, max_iterations=3, seed=0)
        trace = run_abc(box(), config)
        assert trace.evaluations == 5 + 3 * (5 + 5)

    def test_scouts_replace_exhausted_sources(self):
        flat = SearchSpace(lower=[-1.0], upper=[1.0], objective=lambda x: 0.0)
        trace = run_abc(flat, RunConfig(colony_size=10, max_iterations=3, limit=1, seed=0))
        assert trace.evaluations > 5 + 3 * (5 + 5)

    @pytest.mark.parametrize("algorithm", ["abc", "iabc"])
    @pytest.mark.parametrize("objective", [lambda x: np.zeros(len(x)), sphere])
    def test_trial_counters_within_limit_after_each_iteration(self, monkeypatch, algorithm, objective):
        counters, scouts = [], []
        original = _Colony.scout_phase

        def recording_scout_phase(colony):
            scouts.append(original(colony))
            counters.append(colony.trials.copy())
            return scouts[-1]

        monkeypatch.setattr(_Colony, "scout_phase", recording_scout_phase)
        config = RunConfig(colony_size=12, max_iterations=25, limit=2, v=3, seed=5)
        run(box(-1.0, 1.0, objective=objective), config, algorithm)

        assert len(counters) == 25
        assert all(trials.max() <= 2 for trials in counters)
        assert sum(scouts) > 0

    def test_iabc_weights_within_bounds(self):
        config = RunConfig(colony_size=20, max_iterations=30, v=4, seed=2, theta_min=0.5, theta_max=2.0)
        trace = run_iabc(box(), config)
        weights = np.vstack(trace.region_weights)
        assert weights.shape == (30, 4)
        assert weights.min() >= 0.5 and weights.max() <= 2.0

    def test_iabc_single_region(self):
        trace = run_iabc(box(), RunConfig(colony_size=20, max_iterations=50, v=1, seed=4))
        assert np.all(np.diff(trace.best_values) <= 0)
        assert len(trace.region_weights[0]) == 1

    def test_iterations_to(self, small):
        trace = run_abc(box(), small)
        assert trace.iterations_to(trace.best_values[-1], tolerance=0.0) <= small.max_iterations
        assert trace.iterations_to(-1.0) is None

    def test_summary(self, small):
        summary = run_iabc(box(), small).to_summary()
        assert set(summary) == {"algorithm", "best_f", "best_x", "iterations_to_convergence",
                                "iterations", "evaluations"}
        assert summary["iterations"] == 40

    def test_unknown_algorithm(self, small):
        with pytest.raises(ValueError):
            run(box(), small, "pso")


@pytest.mark.slow
class TestBenchmarkAcceptance:
    """Full-budget runs of the benchmark suite."""

    @pytest.fixture
    def config(self):
        return RunConfig(colony_size=200, max_iterations=1000)

    def test_abc_sphere(self, config):
        space = benchmark_registry.require("f3").search_space()
        assert run_abc(space, config).best_value <= 1e-6

    def test_abc_sinc_product(self, config):
        trace = run_abc(benchmark_registry.require("f2").search_space(), config)
        assert trace.best_value >= 1 - 1e-6
        assert np.all(np.abs(trace.best.position) < 0.1)

    @pytest.mark.parametrize("name,check", [
        ("f3", lambda f: f <= 1e-6),
        ("f5", lambda f: f <= 1e-6),
        ("f2", lambda f: f >= 1 - 1e-6),
    ])
    def test_iabc_optima_over_ten_seeds(self, config, name, check):
        space = benchmark_registry.require(name).search_space()
        hits = sum(check(run_iabc(space, config.model_copy(update={"seed": seed})).best_value)
                   for seed in range(10))
        assert hits >= 9

    def test_iabc_converges_faster_on_sinc_product(self):
        space = benchmark_registry.require("f2").search_space()
        config = RunConfig(colony_size=200, max_iterations=300)
        fallback = config.max_iterations + 1

        def median_iterations(runner):
            counts = []
            for seed in range(30):
                reached = runner(space, config.model_copy(update={"seed": seed})).iterations_to(1.0, 1e-6)
                counts.append(fallback if reached is None else reached)
            return np.median(counts)

        assert median_iterations(run_iabc) < median_iterations(run_abc)


class TestBenchmarks:
    """Test cases for the benchmark registry."""

    def test_known_optima(self):
        origin = np.array([[0.0, 0.0]])
        assert benchmark_registry.require("f3")(origin)[0] == 0.0
        assert benchmark_registry.require("f2")(origin)[0] == 1.0
        assert benchmark_registry.require("f5")(origin)[0] == pytest.approx(0.0, abs=1e-12)

    def test_boxes_and_senses(self):
        f4 = benchmark_registry.require("f4")
        assert (f4.lower, f4.upper, f4.sense) == (-1.0, 2.0, Sense.MINIMIZE)
        assert not f4.target_attainable
        maximized = {name for name, f in benchmark_registry.list_available().items() if f.sense is Sense.MAXIMIZE}
        assert maximized == {"f1", "f2"}
        assert sorted(benchmark_registry.list_available()) == ["f1", "f2", "f3", "f4", "f5"]

    def test_search_space(self):
        space = benchmark_registry.require("f1").search_space()
        assert space.dimension == 2
        assert space.sense is Sense.MAXIMIZE
        np.testing.assert_array_equal(space.lower, [-5.12, -5.12])

    def test_unknown_and_duplicate(self):
        assert benchmark_registry.get("f9") is None
        assert not benchmark_registry.is_available("f9")
        with pytest.raises(ValueError):
            benchmark_registry.require("f9")
        registry = BenchmarkRegistry()
        function = BenchmarkFunction("g", sphere, -1.0, 1.0, Sense.MINIMIZE, 0.0)
        registry.register(function)
        with pytest.raises(ValueError):
            registry.register(function)

    def test_suite_is_fresh(self):
        assert benchmark_suite() is not benchmark_registry
