import numpy as np
import pytest

from modules.adcg.index import (
    REASON_GAP, AdcgParams, AtomicSolution, FourierMotionModel, solve_adcg,
)
from modules.datagen.index import measure, rejection_sample_dataset, single_particle_spec
from modules.measures.index import DiscreteMeasure, ParticleConfig
from modules.metrics.index import match_configs

TIMES = (-1.0, 0.0, 1.0)
SINGLE_PARTICLES = rejection_sample_dataset(single_particle_spec(20, TIMES, seed=8))


@pytest.fixture
def model():
    return FourierMotionModel(TIMES, 2)


class TestParams:
    def test_from_config(self):
        params = AdcgParams.from_config(0.01, max_outer=5)
        assert params.alpha == 0.01 and params.max_outer == 5 and params.init_grid == 20

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            AdcgParams(alpha=0.0)
        with pytest.raises(ValueError):
            AdcgParams.from_config(0.01, init_grid=0)


class TestMotionModel:
    def test_size(self, model):
        assert model.size == 3 * 2 * 25
        assert model.forward(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0)).tolist() == [0.0] * 150

    def test_rejects_empty_times(self):
        with pytest.raises(ValueError):
            FourierMotionModel((), 2)

    def test_gradients_match_finite_differences(self, model, rng):
        X = rng.uniform(0.2, 0.8, (2, 2))
        V = rng.uniform(-0.2, 0.2, (2, 2))
        w = np.array([1.0, 0.7])
        r = rng.normal(size=model.size)
        gx, gv = model.gradients(X, V, w, r)
        h = 1e-6
        for a in range(2):
            for k in range(2):
                step = np.zeros((2, 2))
                step[a, k] = h
                fd_x = (model.forward(X + step, V, w) - model.forward(X - step, V, w)) @ r / (2 * h)
                fd_v = (model.forward(X, V + step, w) - model.forward(X, V - step, w)) @ r / (2 * h)
                assert gx[a, k] == pytest.approx(fd_x, rel=1e-5, abs=1e-6)
                assert gv[a, k] == pytest.approx(fd_v, rel=1e-5, abs=1e-6)

    def test_correlation_grid(self, model, rng):
        r = rng.normal(size=model.size)
        positions = rng.uniform(0, 1, (4, 2))
        velocities = rng.uniform(-0.5, 0.5, (3, 2))
        grid = model.correlation_grid(r, positions, velocities)
        assert grid.shape == (4, 3)
        for p in range(4):
            for q in range(3):
                direct = model.features(positions[p], velocities[q])[0] @ r
                assert grid[p, q] == pytest.approx(direct, abs=1e-9)


class TestSolve:
    def test_zero_data(self, model):
        solution = solve_adcg(model, np.zeros(model.size), AdcgParams.from_config(0.01))
        assert len(solution) == 0
        assert solution.reason == REASON_GAP
        assert solution.objective == 0.0

    def test_data_length_checked(self, model):
        with pytest.raises(ValueError):
            solve_adcg(model, np.zeros(10), AdcgParams.from_config(0.01))
        bad = np.zeros(model.size)
        bad[0] = np.nan
        with pytest.raises(ValueError):
            solve_adcg(model, bad, AdcgParams.from_config(0.01))

    @pytest.mark.parametrize("truth", SINGLE_PARTICLES, ids=[f"particle{i}" for i in range(len(SINGLE_PARTICLES))])
    def test_single_particle_recovery(self, model, truth):
        data = measure(truth, TIMES, 2)
        solution = solve_adcg(model, data, AdcgParams.from_config(1e-3))
        trace = solution.objective_trace
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
        assert solution.objective == trace[-1]
        recovered = solution.snapshot(0.0, w_min=0.1)
        assert match_configs(recovered, DiscreteMeasure(truth.positions, truth.masses), radius=0.01)
        assert match_configs(solution.snapshot(1.0, w_min=0.1),
                             DiscreteMeasure(truth.positions + truth.velocities, truth.masses), radius=0.01)

    def test_two_particles_monotone(self, model):
        truth = ParticleConfig([[0.3, 0.3], [0.7, 0.6]], [[0.1, 0.0], [-0.1, 0.1]], [1.0, 0.9])
        solution = solve_adcg(model, measure(truth, TIMES, 2), AdcgParams.from_config(1e-2, max_outer=6))
        trace = solution.objective_trace
        assert solution.iterations <= 6
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))
        assert np.all(solution.masses > 0)


class TestAtomicSolution:
    def test_snapshot_and_config(self):
        solution = AtomicSolution(
            positions=np.array([[0.2, 0.2], [0.5, 0.5]]),
            velocities=np.array([[0.1, 0.0], [0.0, 0.0]]),
            masses=np.array([1.0, 0.05]),
            objective=0.0,
            reason=REASON_GAP,
        )
        moved = solution.snapshot(1.0, w_min=0.1)
        assert len(moved) == 1
        np.testing.assert_allclose(moved.points, [[0.3, 0.2]])
        assert len(solution.to_config()) == 2
