import numpy as np
import pytest
from scipy import sparse
from scipy.sparse.linalg import aslinearoperator

from modules.datagen.index import DatasetSpec, measure, sample_config
from modules.discretize.index import assemble_fourier_matrix
from modules.experiments.placement import place_directions
from modules.geometry.index import Box, TimeGrid, make_grid
from modules.measures.index import ParticleConfig
from modules.solver.index import operator_norm_estimate, solve_reduced, solve_static
from modules.solver.problem import (
    ReducedProblem, assemble_reduced_problem, assemble_static_problem, consistency_residual, solution_objective,
)


def _spike_data(grid, cutoff, cells, masses):
    A = assemble_fourier_matrix(grid, cutoff)
    weights = np.zeros(grid.num_cells)
    weights[list(cells)] = masses
    return A, A.apply(weights)


def _zero_reduced(M=8, n_directions=2):
    time_grid = TimeGrid.from_k(1)
    data = [np.zeros(50) for _ in time_grid.measurement_times]
    return assemble_reduced_problem(time_grid, place_directions(n_directions), M, 2, data, alpha=0.01, tau=0.001,
                                    cache_dir="")


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm_estimate(np.eye(10)) == pytest.approx(1.01)

    def test_zero(self):
        assert operator_norm_estimate(np.zeros((4, 6))) == 0.0
        assert operator_norm_estimate(np.zeros((0, 3))) == 0.0

    def test_matches_largest_singular_value(self, rng):
        U, _ = np.linalg.qr(rng.normal(size=(30, 20)))
        V, _ = np.linalg.qr(rng.normal(size=(20, 20)))
        singular = np.linspace(3.0, 0.1, 20)
        A = U @ np.diag(singular) @ V.T
        for operator in (A, sparse.csr_matrix(A), aslinearoperator(A)):
            estimate = operator_norm_estimate(operator, safety=1.0)
            assert estimate == pytest.approx(3.0, rel=0.01)
        assert operator_norm_estimate(A) >= 3.0


class TestProblem:
    def test_validation(self):
        A = np.ones((2, 3))
        base = dict(directions=(), times=(0.0,), measured=(0,), observation=(A,), data=(np.zeros(2),),
                    move={}, radon={}, alpha=1.0, tau=0.0)
        ReducedProblem(**base)
        with pytest.raises(ValueError):
            ReducedProblem(**{**base, "alpha": 0.0})
        with pytest.raises(ValueError):
            ReducedProblem(**{**base, "tau": -1.0})
        with pytest.raises(ValueError):
            ReducedProblem(**{**base, "data": (np.zeros(3),)})
        with pytest.raises(ValueError):
            ReducedProblem(**{**base, "data": (np.array([np.nan, 0.0]),)})
        with pytest.raises(ValueError):
            ReducedProblem(**{**base, "measured": (1,)})

    def test_reduced_shapes(self):
        prob = _zero_reduced(M=6, n_directions=3)
        assert prob.times == (-1.0, 0.0, 1.0)
        assert prob.u_sizes == (36, 36, 36)
        assert prob.gamma_sizes == (36, 36, 36)
        assert len(prob.move) == 9 and prob.consistency_rows == 9 * 6
        assert prob.time_index(0.0) == 1
        with pytest.raises(ValueError):
            prob.time_index(0.5)

    def test_extra_times_are_unmeasured(self):
        time_grid = TimeGrid.from_k(1, extra_times=(0.5,))
        data = [np.zeros(50) for _ in time_grid.measurement_times]
        prob = assemble_reduced_problem(time_grid, place_directions(2), 5, 2, data, 0.01, 0.001, cache_dir="")
        assert prob.times == (-1.0, 0.0, 0.5, 1.0)
        assert prob.measured == (0, 1, 3)

    def test_wrong_data_count(self):
        with pytest.raises(ValueError):
            assemble_reduced_problem(TimeGrid.from_k(1), place_directions(2), 5, 2, [np.zeros(50)], 0.01, 0.001,
                                     cache_dir="")

    def test_cached_assembly_matches(self, tmp_path):
        time_grid = TimeGrid.from_k(1)
        data = [np.zeros(50) for _ in time_grid.measurement_times]
        args = (time_grid, place_directions(2), 5, 2, data, 0.01, 0.001)
        fresh = assemble_reduced_problem(*args, cache_dir="")
        first = assemble_reduced_problem(*args, cache_dir=str(tmp_path))
        assert any(tmp_path.iterdir())
        second = assemble_reduced_problem(*args, cache_dir=str(tmp_path))
        for key in fresh.move:
            np.testing.assert_array_equal(second.move[key], fresh.move[key])
            np.testing.assert_array_equal(second.radon[key], first.radon[key])
        for a, b in zip(second.observation, fresh.observation):
            np.testing.assert_array_equal(a, b)

    def test_static_problem(self):
        prob = assemble_static_problem(6, 2, np.zeros(50), alpha=0.1, cache_dir="")
        assert prob.directions == () and prob.u_sizes == (36,) and prob.tau == 0.0


class TestSolver:
    def test_zero_data_static(self):
        grid = make_grid(Box((0.0, 0.0), (1.0, 1.0)), 8)
        A = assemble_fourier_matrix(grid, 2)
        u, report = solve_static(A, np.zeros(A.shape[0]), alpha=0.01)
        assert np.all(u == 0.0)
        assert report.converged and report.objective == 0.0

    def test_zero_data_reduced(self):
        u, gamma, report = solve_reduced(_zero_reduced())
        assert all(np.all(v == 0.0) for v in u)
        assert all(np.all(g == 0.0) for g in gamma)
        assert report.converged
        assert report.consistency_residual == 0.0
        assert report.data_residuals == [0.0, 0.0, 0.0]

    def test_static_spike(self):
        grid = make_grid(Box((0.0, 0.0), (1.0, 1.0)), 10)
        j = 4 * 10 + 6
        A, f = _spike_data(grid, 2, [j], [1.0])
        u, report = solve_static(A, f, alpha=1e-3, max_iters=20000)
        assert np.all(u >= 0.0)
        # truth has objective 1 with a perfect fit
        assert report.objective <= 1.02
        assert report.gap >= -1e-8
        centers = grid.cell_centers()
        centroid = (u @ centers) / u.sum()
        assert np.linalg.norm(centroid - centers[j]) <= 0.1
        assert u.sum() == pytest.approx(1.0, abs=0.05)

    def test_report_fields(self):
        grid = make_grid(Box((0.0, 0.0), (1.0, 1.0)), 6)
        A, f = _spike_data(grid, 2, [3, 20], [1.0, 0.5])
        _, report = solve_static(A, f, alpha=0.01, max_iters=100)
        assert not report.converged
        assert report.iterations == 100
        assert report.objective_trace[-1] == report.objective
        assert report.primal_step > 0 and report.dual_steps["consistency"] == 0.0
        assert report.wall_time >= 0.0

    def test_options_override(self):
        grid = make_grid(Box((0.0, 0.0), (1.0, 1.0)), 6)
        A, f = _spike_data(grid, 2, [3], [1.0])
        _, report = solve_static(A, f, alpha=0.01, options={"max_iters": 30}, log_every=0)
        assert report.iterations == 30

    def test_reduced_single_particle(self):
        config = ParticleConfig([[0.45, 0.55]], [[0.1, -0.05]], [1.0])
        time_grid = TimeGrid.from_k(1)
        data = measure(config, time_grid.measurement_times, 2)
        prob = assemble_reduced_problem(time_grid, place_directions(3), 12, 2, data, alpha=1e-3, tau=1e-3,
                                        cache_dir="")
        u, gamma, report = solve_reduced(prob, max_iters=5000)
        assert all(np.all(v >= 0.0) for v in u)
        assert all(np.all(g >= 0.0) for g in gamma)
        assert report.consistency_residual == pytest.approx(consistency_residual(prob, u, gamma))
        assert report.objective == pytest.approx(solution_objective(prob, u, gamma))
        for l, residual in zip(prob.measured, report.data_residuals):
            assert residual <= 0.5 * np.linalg.norm(data[prob.measured.index(l)])
        assert u[prob.time_index(0.0)].sum() == pytest.approx(1.0, abs=0.25)


@pytest.mark.slow
class TestAgainstReference:
    def test_static_objective(self, rng):
        cp = pytest.importorskip("cvxpy")
        grid = make_grid(Box((0.0, 0.0), (1.0, 1.0)), 10)
        A, f = _spike_data(grid, 2, [12, 47, 81], [1.0, 0.9, 1.1])
        f = f + rng.normal(0.0, 0.05, size=f.shape)
        alpha = 0.05
        u, report = solve_static(A, f, alpha=alpha, max_iters=100000, obj_tol=1e-10)

        var = cp.Variable(grid.num_cells, nonneg=True)
        reference = cp.Problem(cp.Minimize(cp.sum(var) + cp.sum_squares(A.values @ var - f) / (2 * alpha)))
        reference.solve()
        assert report.objective == pytest.approx(reference.value, rel=1e-2)

    @pytest.mark.parametrize("seed", range(10))
    def test_reduced_objective(self, seed):
        cp = pytest.importorskip("cvxpy")
        time_grid = TimeGrid.from_k(1)
        spec = DatasetSpec(count=1, times=time_grid.measurement_times, n_min=2, n_max=4)
        config = sample_config(spec, np.random.default_rng(seed))
        data = measure(config, time_grid.measurement_times, 2)
        prob = assemble_reduced_problem(time_grid, place_directions(3), 20, 2, data, alpha=0.01, tau=0.01,
                                        cache_dir="")
        u, gamma, report = solve_reduced(prob, max_iters=200000, gap_tol=2e-4, feas_tol=1e-6)

        us = [cp.Variable(size, nonneg=True) for size in prob.u_sizes]
        gs = [cp.Variable(size, nonneg=True) for size in prob.gamma_sizes]
        fit = sum(cp.sum_squares(A @ us[l] - f) for l, A, f in zip(prob.measured, prob.observation, prob.data))
        blocks = [prob.move[key] @ gs[key[0]] - prob.radon[key] @ us[key[1]] for key in sorted(prob.move)]
        objective = sum(cp.sum(v) for v in us) + sum(cp.sum(g) for g in gs) + fit / (2 * prob.alpha)
        reference = cp.Problem(cp.Minimize(objective), [cp.norm(cp.hstack(blocks), 2) <= prob.tau])
        reference.solve()
        assert report.consistency_residual <= prob.tau + 1e-5
        assert report.objective == pytest.approx(reference.value, rel=1e-3)

    def test_gap_tolerance_stops_with_certificate(self):
        config = ParticleConfig([[0.3, 0.6], [0.7, 0.4]], [[0.1, 0.0], [-0.05, 0.1]], [1.0, 0.8])
        time_grid = TimeGrid.from_k(1)
        data = measure(config, time_grid.measurement_times, 2)
        prob = assemble_reduced_problem(time_grid, place_directions(2), 6, 2, data, alpha=0.01, tau=0.01,
                                        cache_dir="")
        u, gamma, report = solve_reduced(prob, max_iters=200000, gap_tol=1e-3)
        assert report.converged
        assert report.consistency_residual <= prob.tau + report.feas_tol
        assert report.gap <= 1e-3 * max(report.objective, 1.0) + 1e-9
