import numpy as np
import pytest
from scipy.optimize import linprog
from scipy.spatial.distance import cdist

from modules.geometry.index import Box, make_grid
from modules.measures.index import DiscreteMeasure
from modules.metrics.index import (
    cluster_extract, grid_measure, match_configs, unbalanced_wasserstein, uw_bound, uw_mass_terms,
)

R = 0.05
RANDOM_PAIRS = 200


def _random_measure(rng, n, spread=0.1):
    return DiscreteMeasure(rng.uniform(0.5 - spread, 0.5 + spread, (n, 2)), rng.uniform(0.2, 1.5, n))


def _lp_reference(nu1: DiscreteMeasure, nu2: DiscreteMeasure, R: float, p: float = 2) -> float:
    """Direct LP over pi_ij >= 0 with row sums <= m_i and column sums <= n_j"""
    m, n = nu1.weights, nu2.weights
    cost = cdist(nu1.points, nu2.points) ** p - R ** p
    rows, cols = len(m), len(n)
    A_ub = np.zeros((rows + cols, rows * cols))
    for i in range(rows):
        A_ub[i, i * cols:(i + 1) * cols] = 1.0
    for j in range(cols):
        A_ub[rows + j, j::cols] = 1.0
    result = linprog(cost.ravel(), A_ub=A_ub, b_ub=np.concatenate([m, n]), bounds=(0, None), method='highs')
    return float(result.fun + 0.5 * R ** p * (m.sum() + n.sum()))


class TestUnbalancedWasserstein:
    def test_identity(self, rng):
        nu = _random_measure(rng, 5)
        assert unbalanced_wasserstein(nu, nu, R).value == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("d", [0.0, 0.01, 0.049, 0.05, 0.2])
    def test_two_diracs(self, d):
        result = unbalanced_wasserstein(DiscreteMeasure([[0.3, 0.3]], [1.0]), DiscreteMeasure([[0.3 + d, 0.3]], [1.0]), R)
        assert result.value == pytest.approx(min(d * d, R * R), abs=1e-15)

    def test_surplus_removed(self):
        result = unbalanced_wasserstein(DiscreteMeasure([[0.4, 0.4]], [2.0]), DiscreteMeasure([[0.4, 0.4]], [1.0]), 0.05)
        assert result.value == pytest.approx(0.00125)
        assert result.removed == pytest.approx(1.0) and result.created == pytest.approx(0.0)
        assert result.plan == [(0, 0, pytest.approx(1.0))]

    def test_empty_measures(self):
        nu = DiscreteMeasure([[0.1, 0.1], [0.2, 0.2]], [1.0, 0.5])
        empty = DiscreteMeasure.empty(2)
        assert unbalanced_wasserstein(nu, empty, R).value == pytest.approx(0.5 * R * R * 1.5)
        assert unbalanced_wasserstein(empty, nu, R).created == pytest.approx(1.5)
        assert unbalanced_wasserstein(empty, empty, R).value == 0.0

    def test_rejects_nonpositive_radius(self):
        nu = DiscreteMeasure([[0.1, 0.1]], [1.0])
        with pytest.raises(ValueError):
            unbalanced_wasserstein(nu, nu, 0.0)

    def test_matches_lp_and_is_symmetric(self, rng):
        for _ in range(RANDOM_PAIRS):
            nu1 = _random_measure(rng, int(rng.integers(1, 4)))
            nu2 = _random_measure(rng, int(rng.integers(1, 4)))
            forward = unbalanced_wasserstein(nu1, nu2, R)
            backward = unbalanced_wasserstein(nu2, nu1, R)
            assert forward.value == pytest.approx(_lp_reference(nu1, nu2, R), abs=1e-6)
            assert abs(forward.value - backward.value) <= 1e-9

    def test_plan_accounting(self, rng):
        dist_cap = R + 1e-12
        for _ in range(50):
            nu1, nu2 = _random_measure(rng, 4, 0.05), _random_measure(rng, 3, 0.05)
            result = unbalanced_wasserstein(nu1, nu2, R)
            cost = cdist(nu1.points, nu2.points) ** 2
            recomputed = sum(w * cost[i, j] for i, j, w in result.plan)
            recomputed += 0.5 * R * R * (result.removed + result.created)
            assert result.value >= 0.0
            assert result.value == pytest.approx(recomputed, abs=1e-10)
            assert result.transported + result.removed == pytest.approx(nu1.total_mass)
            assert result.transported + result.created == pytest.approx(nu2.total_mass)
            for i, j, _ in result.plan:
                assert np.linalg.norm(nu1.points[i] - nu2.points[j]) <= dist_cap


class TestMassTerms:
    def test_examples(self):
        nu1 = DiscreteMeasure([[0.2, 0.2], [0.6, 0.7]], [1.0, 0.8])
        assert uw_mass_terms(nu1, nu1, R) == (0.0, 0.0, 0.0)
        shifted = DiscreteMeasure(nu1.points + [R / 2, 0.0], nu1.weights)
        A, B, C = uw_mass_terms(nu1, shifted, R)
        assert (A, B) == (0.0, pytest.approx(0.0))
        assert C == pytest.approx(1.8 * (R / 2) ** 2)
        far = DiscreteMeasure(np.vstack([nu1.points, [[0.9, 0.1]]]), [1.0, 0.8, 0.3])
        assert uw_mass_terms(nu1, far, R)[0] == pytest.approx(0.3)

    def test_empty_sides(self):
        nu = DiscreteMeasure([[0.2, 0.2]], [1.5])
        empty = DiscreteMeasure.empty(2)
        assert uw_mass_terms(empty, nu, R) == (1.5, 0.0, 0.0)
        assert uw_mass_terms(nu, empty, R) == (0.0, 1.5, 0.0)

    def test_bound_holds_for_separated_truth(self, rng):
        lattice = np.array([[x, y] for x in (0.2, 0.4, 0.6, 0.8) for y in (0.2, 0.4, 0.6, 0.8)])
        for _ in range(RANDOM_PAIRS):
            n = int(rng.integers(1, 6))
            truth = DiscreteMeasure(lattice[rng.choice(len(lattice), n, replace=False)], rng.uniform(0.9, 1.1, n))
            near = truth.points[rng.integers(0, n, 4)] + rng.uniform(-1.5 * R, 1.5 * R, (4, 2))
            recon = DiscreteMeasure(np.vstack([near, rng.uniform(0, 1, (1, 2))]), rng.uniform(0.0, 1.0, 5))
            A, B, C = uw_mass_terms(truth, recon, R)
            value = unbalanced_wasserstein(truth, recon, R).value
            assert value <= uw_bound(A, B, C, R) + 1e-12

    def test_bound_orders(self):
        assert uw_bound(1.0, 2.0, 0.01, 0.1) == pytest.approx(0.5 * 0.01 * 3 + 0.01)
        assert uw_bound(1.0, 0.0, 0.01, 0.1, p=2, q=3) == pytest.approx(0.5 * 0.001 + 0.1 * 0.01)
        with pytest.raises(ValueError):
            uw_bound(0.0, 0.0, 0.01, 0.1, p=2, q=1)
        assert uw_bound(0.0, 0.0, 0.0, 0.1, p=2, q=1, total_mass=2.0) == 0.0
        # factor p / (p - q) * ((p - q) / q)^(q / p) is 2 for p = 2, q = 1
        assert uw_bound(0.0, 0.0, 0.04, 0.1, p=2, q=1, total_mass=1.0) == pytest.approx(2 * 0.2)


class TestClusterExtract:
    grid = make_grid(Box((0.0, 0.0), (1.0, 1.0)), 10)

    def test_single_cell(self):
        weights = np.zeros(100)
        weights[34] = 1.0
        result = cluster_extract(weights, self.grid)
        assert len(result) == 1 and result.weights[0] == 1.0
        np.testing.assert_allclose(result.points[0], self.grid.cell_centers()[34])

    def test_adjacent_cells_merge(self):
        weights = np.zeros(100)
        weights[[34, 35]] = 0.5
        result = cluster_extract(weights, self.grid)
        assert len(result) == 1 and result.weights[0] == pytest.approx(1.0)
        np.testing.assert_allclose(result.points[0], [0.5, 0.35])

    def test_diagonal_neighbours_merge(self):
        weights = np.zeros(100)
        weights[[34, 45]] = 1.0
        assert len(cluster_extract(weights, self.grid)) == 1

    def test_separate_groups(self):
        weights = np.zeros(100)
        weights[[0, 1, 99]] = [0.3, 0.6, 1.2]
        result = cluster_extract(weights, self.grid)
        assert sorted(result.weights.tolist()) == pytest.approx([0.9, 1.2])

    def test_threshold(self):
        assert len(cluster_extract(np.full(100, 0.05), self.grid)) == 0
        weights = np.zeros(100)
        weights[[34, 35]] = [1.0, 0.05]
        result = cluster_extract(weights, self.grid)
        assert result.weights.tolist() == [1.0]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            cluster_extract(np.zeros(99), self.grid)

    def test_grid_measure(self):
        weights = np.zeros(100)
        weights[[3, 50]] = [0.5, 0.01]
        nu = grid_measure(weights, self.grid)
        assert len(nu) == 2 and nu.total_mass == pytest.approx(0.51)


class TestMatchConfigs:
    def test_identical(self, rng):
        nu = _random_measure(rng, 6, 0.4)
        assert match_configs(nu, nu)

    def test_spurious_cluster(self):
        truth = DiscreteMeasure([[0.2, 0.2]], [1.0])
        recon = DiscreteMeasure([[0.2, 0.2], [0.7, 0.7]], [1.0, 0.2])
        assert not match_configs(recon, truth)

    def test_permuted_close_pair(self):
        truth = DiscreteMeasure([[0.5, 0.5], [0.505, 0.5]], [1.0, 1.0])
        recon = DiscreteMeasure([[0.5049, 0.5], [0.5001, 0.5]], [1.0, 1.0])
        assert match_configs(recon, truth)

    def test_needs_perfect_matching(self):
        truth = DiscreteMeasure([[0.2, 0.2], [0.8, 0.8]], [1.0, 1.0])
        recon = DiscreteMeasure([[0.2, 0.201], [0.2, 0.199]], [1.0, 1.0])
        assert not match_configs(recon, truth)

    def test_radius_is_strict(self):
        truth = DiscreteMeasure([[0.25, 0.5]], [1.0])
        assert not match_configs(DiscreteMeasure([[0.25, 0.75]], [1.0]), truth, radius=0.25)
        assert match_configs(DiscreteMeasure.empty(2), DiscreteMeasure.empty(2))
