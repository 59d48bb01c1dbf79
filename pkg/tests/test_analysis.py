import json
import logging
import math

import numpy as np
import pytest

from modules.analysis.index import (
    DIRECTION_MODE, TIME_MODE, _chebyshev_lp, _time_incidence, direction_report, find_coincidences,
    find_direction_ghosts, find_ghosts, ghost_report, min_coincidence_delta, min_direction_ghost_delta,
    min_ghost_delta, projected_degeneracy,
)
from modules.geometry.index import Direction
from modules.measures.index import DiscreteMeasure, ParticleConfig

GHOST_PAIR = (np.array([0.0, 1.0]), np.array([0.0, 0.0]))
AXES = [Direction((1.0, 0.0)), Direction((0.0, 1.0))]


def _ghost_set(ghosts):
    return {(round(g.position[0], 9), round(g.velocity[0], 9)) for g in ghosts}


def _grid_oracle(x, v, times, step=1e-3, vmax=3.0):
    """
    min over non-constant assignments of min_(x,v) max_t |x + t v - b_t|, 1-D.

    For fixed v the best x is the midpoint of the range of b_t - t v, so
    only v is searched on a grid.
    """
    times = np.asarray(times, dtype=float)
    targets = x[None, :] + times[:, None] * v[None, :]
    velocities = np.arange(-vmax, vmax + step / 2, step)
    n, slots = len(x), len(times)
    best = math.inf
    for flat in range(n ** slots):
        assignment = np.unravel_index(flat, (n,) * slots)
        if len(set(assignment)) == 1:
            continue
        b = targets[np.arange(slots), assignment]
        shifted = b[None, :] - velocities[:, None] * times[None, :]
        best = min(best, float(((shifted.max(axis=1) - shifted.min(axis=1)) / 2).min()))
    return best


class TestCoincidences:
    def test_examples(self):
        S = (np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        found = find_coincidences(S, [1.0])
        assert len(found) == 1
        assert (found[0].t, found[0].i, found[0].j, found[0].distance) == (1.0, 0, 1, 0.0)
        assert find_coincidences(S, [0.0]) == []
        relaxed = find_coincidences(S, [0.6], delta=0.5)
        assert len(relaxed) == 1 and relaxed[0].distance == pytest.approx(0.4)

    def test_min_coincidence_delta(self):
        S = (np.array([0.0, 1.0]), np.array([1.0, 0.0]))
        assert min_coincidence_delta(S, [0.6]) == pytest.approx(0.4)
        assert min_coincidence_delta(S, [0.0, 1.0]) == pytest.approx(0.0)
        assert min_coincidence_delta((np.array([0.3]), np.array([0.1])), [0.0]) == math.inf

    def test_config_input(self):
        config = ParticleConfig([[0.2, 0.5], [0.4, 0.5]], [[0.1, 0.0], [-0.1, 0.0]], [1.0, 1.0])
        found = find_coincidences(config, [-1.0, 0.0, 1.0], delta=1e-12)
        assert [(c.t, c.i, c.j) for c in found] == [(1.0, 0, 1)]


class TestGhosts:
    def test_two_time_ghosts(self):
        ghosts = find_ghosts(GHOST_PAIR, [-1.0, 1.0])
        assert _ghost_set(ghosts) == {(0.5, 0.5), (0.5, -0.5)}
        for ghost in ghosts:
            assert sorted(ghost.assignment) == [0, 1]

    def test_middle_time_removes_ghosts(self):
        assert find_ghosts(GHOST_PAIR, [-1.0, 0.0, 1.0]) == []

    def test_single_particle(self):
        assert find_ghosts((np.array([0.4]), np.array([0.1])), [-1.0, 1.0]) == []

    def test_needs_two_times(self):
        with pytest.raises(ValueError):
            find_ghosts(GHOST_PAIR, [0.0])

    def test_constructed_ghost(self):
        # three particles passing 0.5 at t = -1, 0, 1 respectively
        S = (np.array([0.6, 0.5, 0.3]), np.array([0.1, 0.3, 0.2]))
        ghosts = find_ghosts(S, [-1.0, 0.0, 1.0])
        assert (0.5, 0.0) in _ghost_set(ghosts)
        times = [-1.0, 0.0, 1.0]
        for ghost in ghosts:
            for t, i in zip(times, ghost.assignment):
                assert ghost.position[0] + t * ghost.velocity[0] == pytest.approx(S[0][i] + t * S[1][i], abs=1e-9)
            assert len(set(ghost.assignment)) == 3
        assert min_ghost_delta(S, times) == pytest.approx(0.0, abs=1e-12)

    def test_relabeling_invariance(self, rng):
        S = (np.array([0.6, 0.5, 0.3, 0.9]), np.array([0.1, 0.3, 0.2, -0.05]))
        order = rng.permutation(4)
        times = [-1.0, 0.0, 1.0]
        assert _ghost_set(find_ghosts(S, times)) == _ghost_set(find_ghosts((S[0][order], S[1][order]), times))

    def test_time_shift_invariance(self):
        S = (np.array([0.6, 0.5, 0.3]), np.array([0.1, 0.3, 0.2]))
        shift = 0.5
        shifted = (S[0] + shift * S[1], S[1])
        original = {(x + shift * v, v) for x, v in _ghost_set(find_ghosts(S, [-1.0, 0.0, 1.0]))}
        moved = _ghost_set(find_ghosts(shifted, [-1.5, -0.5, 0.5]))
        assert {(round(x, 6), round(v, 6)) for x, v in original} == {(round(x, 6), round(v, 6)) for x, v in moved}

    def test_random_configs_have_no_ghosts(self, rng):
        times = [-1.0, 0.0, 1.0]
        for _ in range(1000):
            S = (rng.uniform(0, 1, 4), rng.uniform(-0.5, 0.5, 4))
            assert find_ghosts(S, times) == []
            assert not find_coincidences(S, times)


class TestMinGhostDelta:
    def test_two_times_is_zero(self):
        assert min_ghost_delta(GHOST_PAIR, [-1.0, 1.0]) == 0.0
        assert find_ghosts(GHOST_PAIR, [-1.0, 1.0])

    def test_single_assignment(self):
        inc = _time_incidence(GHOST_PAIR, [-1.0, 0.0, 1.0])
        assert _chebyshev_lp(inc, (1, 0, 1)) == pytest.approx(0.5)

    def test_example_minimum(self):
        times = [-1.0, 0.0, 1.0]
        closed = min_ghost_delta(GHOST_PAIR, times, method="closed")
        assert closed == pytest.approx(0.25)
        assert min_ghost_delta(GHOST_PAIR, times, method="lp") == pytest.approx(0.25, abs=1e-9)
        assert _grid_oracle(*GHOST_PAIR, times) == pytest.approx(0.25, abs=2e-3)

    def test_single_particle_is_infinite(self):
        assert min_ghost_delta((np.array([0.4]), np.array([0.1])), [-1.0, 0.0, 1.0]) == math.inf

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            min_ghost_delta(GHOST_PAIR, [-1.0, 0.0, 1.0], method="simplex")

    def test_closed_form_matches_grid_oracle(self, rng):
        times = [-1.0, -0.5, 0.0, 0.5, 1.0]
        for _ in range(100):
            x, v = rng.uniform(0, 1, 3), rng.uniform(-0.5, 0.5, 3)
            assert min_ghost_delta((x, v), times) == pytest.approx(_grid_oracle(x, v, times), abs=2e-3)

    def test_closed_form_matches_lp(self, rng):
        for times in ([-1.0, 0.0, 1.0], [-1.0, -0.5, 0.0, 0.5, 1.0]):
            for _ in range(10):
                S = (rng.uniform(0, 1, 3), rng.uniform(-0.5, 0.5, 3))
                closed = min_ghost_delta(S, times, method="closed")
                assert min_ghost_delta(S, times, method="lp") == pytest.approx(closed, abs=1e-7)

    def test_two_dimensional_uses_max_norm(self, rng):
        config = ParticleConfig(rng.uniform(0.2, 0.8, (3, 2)), rng.uniform(-0.2, 0.2, (3, 2)), np.ones(3))
        times = [-1.0, 0.0, 1.0]
        closed = min_ghost_delta(config, times, method="closed")
        assert min_ghost_delta(config, times, method="lp") == pytest.approx(closed, abs=1e-7)
        per_axis = [min_ghost_delta((config.positions[:, k], config.velocities[:, k]), times) for k in range(2)]
        assert closed >= max(per_axis) - 1e-12

    def test_zero_iff_ghosts(self, rng):
        times = [-1.0, 0.0, 1.0]
        for _ in range(50):
            S = (rng.uniform(0, 1, 3), rng.uniform(-0.5, 0.5, 3))
            assert (min_ghost_delta(S, times) <= 1e-9) == bool(find_ghosts(S, times))

    def test_cap_gives_upper_bound(self, rng, caplog):
        S = (rng.uniform(0, 1, 4), rng.uniform(-0.5, 0.5, 4))
        times = [-1.0, -0.5, 0.0, 0.5, 1.0]
        full = min_ghost_delta(S, times)
        with caplog.at_level(logging.WARNING):
            capped = min_ghost_delta(S, times, cap=100)
        assert capped >= full
        assert "enumeration cap" in caplog.text


class TestDirections:
    def test_axis_ghosts(self):
        positions = np.array([[0.2, 0.2], [0.8, 0.8]])
        ghosts = find_direction_ghosts(positions, AXES)
        assert {tuple(np.round(g.position, 9)) for g in ghosts} == {(0.2, 0.8), (0.8, 0.2)}
        assert all(g.velocity is None for g in ghosts)
        assert min_direction_ghost_delta(positions, AXES) == 0.0

    def test_third_direction_removes_ghosts(self):
        positions = np.array([[0.2, 0.2], [0.8, 0.8]])
        directions = AXES + [Direction.normalized((1.0, 1.0))]
        assert find_direction_ghosts(positions, directions) == []
        assert min_direction_ghost_delta(positions, directions) > 0.0

    def test_parallel_directions_fall_back_to_lp(self):
        positions = np.array([[0.2, 0.3], [0.7, 0.6], [0.4, 0.9]])
        directions = AXES + [Direction((-1.0, 0.0))]
        with pytest.raises(ValueError):
            min_direction_ghost_delta(positions, directions, method="closed")
        assert math.isfinite(min_direction_ghost_delta(positions, directions))

    def test_report_serialization(self):
        report = direction_report(DiscreteMeasure([[0.2, 0.2], [0.8, 0.8]], [1.0, 1.0]), AXES)
        data = json.loads(report.to_json())
        assert len(data["ghosts"]) == 2 and data["coincidences"] == []
        assert data["min_ghost_delta"] == 0.0
        assert data["min_coincidence_delta"] == pytest.approx(0.6)


class TestProjectedDegeneracy:
    def test_collapse_along_one_direction(self):
        lam = ParticleConfig([[0.3, 0.2], [0.3, 0.7]], [[0.1, 0.0], [0.1, 0.05]], [1.0, 1.0])
        reports = projected_degeneracy(lam, AXES, times=[-1.0, 0.0, 1.0], mode=TIME_MODE)
        assert len(reports) == 2
        assert [c.t for c in reports[0].coincidences] == [-1.0, 0.0, 1.0]
        assert reports[1].coincidences == []

    def test_lifted_ghost_example(self):
        lam = ParticleConfig([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]], [1.0, 1.0])
        report = projected_degeneracy(lam, [AXES[0]], times=[-1.0, 1.0])[0]
        assert _ghost_set(report.ghosts) == {(0.5, 0.5), (0.5, -0.5)}
        assert report.min_ghost_delta == 0.0

    def test_generic_configs(self, rng):
        directions = [Direction.from_angle(a) for a in (0.3, 1.1, -0.8)]
        failures = 0
        for _ in range(100):
            lam = ParticleConfig(rng.uniform(0, 1, (5, 2)), rng.uniform(-0.5, 0.5, (5, 2)), np.ones(5))
            reports = projected_degeneracy(lam, directions, times=[-1.0, 0.0, 1.0])
            failures += sum(bool(r.ghosts or r.coincidences) for r in reports)
        assert failures == 0

    def test_direction_mode(self):
        lam = ParticleConfig([[0.2, 0.2], [0.8, 0.8]], [[0.1, 0.0], [0.0, -0.1]], [1.0, 1.0])
        report, = projected_degeneracy(lam, AXES, mode=DIRECTION_MODE, t=0.0)
        assert len(report.ghosts) == 2

    def test_ghost_report_defaults(self):
        report = ghost_report(GHOST_PAIR, [0.0])
        assert report.ghosts == [] and report.min_ghost_delta == math.inf

    def test_unknown_mode(self):
        lam = ParticleConfig([[0.2, 0.2]], [[0.0, 0.0]], [1.0])
        with pytest.raises(ValueError):
            projected_degeneracy(lam, AXES, mode="frequency")
