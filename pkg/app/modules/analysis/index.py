"""
Degeneracy analysis: coincidences, ghost particles and their
Delta-relaxations, over a set of times or a set of projection directions.

Both settings are instances of one incidence problem. Each slot s (a time,
or a direction) carries a linear functional a_s on an unknown z in R^2
and per-particle targets b_{s,i}:

    time mode       z = (x, v) per coordinate,  a_t = (1, t),   b_{t,i} = x_i + t v_i
    direction mode  z = x in R^2,               a_theta = theta, b_{theta,i} = theta.x_i

A ghost is a z hitting some target at every slot with pairwise distinct
particle indices, other than a particle itself. In time mode every space
coordinate is an independent channel sharing the same assignment.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
import itertools
import json
import logging
import math

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.sparse.csgraph import maximum_bipartite_matching

from modules.geometry.index import Direction
from modules.measures.index import DiscreteMeasure, ParticleConfig

logger = logging.getLogger(__name__)

# Exact incidence tolerance
INCIDENCE_TOL = 1e-9

# Assignment enumeration cap; beyond it the minimum is an upper bound
MAX_ASSIGNMENTS = 10 ** 6

# Assignments evaluated per vectorized batch
BATCH_SIZE = 50000

TIME_MODE = "time"
DIRECTION_MODE = "direction"


@dataclass
class Coincidence:
    i: int
    j: int
    distance: float
    t: Optional[float] = None
    direction: Optional[int] = None


@dataclass
class Ghost:
    position: Tuple[float, ...]
    velocity: Optional[Tuple[float, ...]]
    assignment: Tuple[int, ...]


@dataclass
class GhostReport:
    ghosts: List[Ghost] = field(default_factory=list)
    coincidences: List[Coincidence] = field(default_factory=list)
    min_coincidence_delta: float = math.inf
    min_ghost_delta: float = math.inf

    def to_dict(self) -> dict:
        def finite(value):
            return value if math.isfinite(value) else None
        return {
            "ghosts": [
                {"position": list(g.position), "velocity": None if g.velocity is None else list(g.velocity),
                 "assignment": list(g.assignment)}
                for g in self.ghosts
            ],
            "coincidences": [
                {"t": c.t, "direction": c.direction, "i": c.i, "j": c.j, "distance": c.distance}
                for c in self.coincidences
            ],
            "min_coincidence_delta": finite(self.min_coincidence_delta),
            "min_ghost_delta": finite(self.min_ghost_delta),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class _Incidence:
    functionals: np.ndarray   # (slots, 2)
    targets: np.ndarray       # (slots, particles, channels)
    particles: np.ndarray     # (particles, 2, channels), each particle's own z

    @property
    def slots(self) -> int:
        return len(self.functionals)

    @property
    def size(self) -> int:
        return self.targets.shape[1]


def _phase_arrays(S) -> Tuple[np.ndarray, np.ndarray]:
    """(positions, velocities) of shape (n, d) from a config, a 2-D phase measure or a pair"""
    if isinstance(S, ParticleConfig):
        return S.positions, S.velocities
    if isinstance(S, DiscreteMeasure):
        if S.dim != 2:
            raise ValueError(f"a projected configuration needs 2-D atoms (position, velocity), got {S.dim}")
        return S.points[:, :1], S.points[:, 1:]
    x, v = S
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.ndim == 1:
        x, v = x[:, None], v[:, None]
    if x.shape != v.shape:
        raise ValueError(f"positions {x.shape} and velocities {v.shape} differ in shape")
    return x, v


def _time_incidence(S, times: Sequence[float]) -> _Incidence:
    x, v = _phase_arrays(S)
    times = np.asarray(sorted(float(t) for t in times))
    functionals = np.column_stack([np.ones_like(times), times])
    targets = x[None, :, :] + times[:, None, None] * v[None, :, :]
    particles = np.stack([x, v], axis=1)
    return _Incidence(functionals, targets, particles)


def _direction_incidence(positions, directions: Sequence[Direction]) -> _Incidence:
    if isinstance(positions, DiscreteMeasure):
        positions = positions.points
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if positions.shape[1] != 2:
        raise ValueError(f"direction analysis is implemented for 2-D positions, got dimension {positions.shape[1]}")
    functionals = np.array([theta.as_array() for theta in directions])
    targets = (functionals @ positions.T)[:, :, None]
    particles = positions[:, :, None]
    return _Incidence(functionals, targets, particles)


def _coincidences(inc: _Incidence, delta: float, labels, as_time: bool, distance_fn) -> List[Coincidence]:
    found = []
    n = inc.size
    for s, label in enumerate(labels):
        for i, j in itertools.combinations(range(n), 2):
            dist = distance_fn(inc.targets[s, i] - inc.targets[s, j])
            if dist <= delta:
                if as_time:
                    found.append(Coincidence(i=i, j=j, distance=dist, t=label))
                else:
                    found.append(Coincidence(i=i, j=j, distance=dist, direction=label))
    return found


def find_coincidences(S, times: Sequence[float], delta: float = 0.0) -> List[Coincidence]:
    """All (t, i, j) with |(x_i - x_j) + t (v_i - v_j)| <= delta, i < j"""
    inc = _time_incidence(S, times)
    return _coincidences(inc, delta, sorted(float(t) for t in times), True,
                         lambda d: float(np.linalg.norm(d)))


def find_direction_coincidences(positions, directions: Sequence[Direction], delta: float = 0.0) -> List[Coincidence]:
    """All (theta, i, j) with |theta.(x_i - x_j)| <= delta, i < j; direction given by index"""
    inc = _direction_incidence(positions, directions)
    return _coincidences(inc, delta, list(range(len(directions))), False,
                         lambda d: float(np.abs(d).max()))


def min_coincidence_delta(S, times: Sequence[float]) -> float:
    inc = _time_incidence(S, times)
    if inc.size < 2:
        return math.inf
    best = math.inf
    for s in range(inc.slots):
        pts = inc.targets[s]
        diffs = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        best = min(best, float(diffs[np.triu_indices(inc.size, k=1)].min()))
    return best


def _ghosts(inc: _Incidence) -> List[Tuple[np.ndarray, Tuple[int, ...]]]:
    if inc.slots < 2:
        raise ValueError(f"ghost analysis needs at least two slots, got {inc.slots}")
    n = inc.size
    base = inc.functionals[:2]
    if abs(np.linalg.det(base)) <= 1e-14:
        raise ValueError("the first two slots do not determine a unique intersection")
    found = []
    for i, j in itertools.permutations(range(n), 2):
        rhs = np.stack([inc.targets[0, i], inc.targets[1, j]])
        z = np.linalg.solve(base, rhs)          # (2, channels)
        if np.any(np.all(np.abs(inc.particles - z[None]) <= INCIDENCE_TOL, axis=(1, 2))):
            continue
        predicted = inc.functionals @ z         # (slots, channels)
        hits = np.all(np.abs(inc.targets - predicted[:, None, :]) <= INCIDENCE_TOL, axis=2)
        if not np.all(hits.any(axis=1)):
            continue
        matching = maximum_bipartite_matching(sparse.csr_matrix(hits), perm_type='column')
        if np.any(matching < 0):
            continue
        if any(np.all(np.abs(z - other) <= INCIDENCE_TOL) for other, _ in found):
            continue
        found.append((z, tuple(int(k) for k in matching)))
    return found


def find_ghosts(S, times: Sequence[float]) -> List[Ghost]:
    """Exact ghost particles with respect to the given times (at least two)"""
    if len(times) < 2:
        raise ValueError(f"ghost analysis needs at least two times, got {len(times)}")
    inc = _time_incidence(S, times)
    return [Ghost(tuple(z[0]), tuple(z[1]), assignment) for z, assignment in _ghosts(inc)]


def find_direction_ghosts(positions, directions: Sequence[Direction]) -> List[Ghost]:
    """Exact ghosts of a snapshot with respect to a set of directions (at least two)"""
    if len(directions) < 2:
        raise ValueError(f"ghost analysis needs at least two directions, got {len(directions)}")
    inc = _direction_incidence(positions, directions)
    return [Ghost(tuple(z[:, 0]), None, assignment) for z, assignment in _ghosts(inc)]


def _reference_weights(functionals: np.ndarray):
    """
    For every triple of slots, the null vector of its 3x2 functional matrix.

    The Chebyshev residual of an overdetermined system in two unknowns equals
    the largest residual over three-slot subsystems, and a three-slot
    subsystem has residual |lambda.b| / |lambda|_1. This needs every pair of
    functionals to be independent; None is returned otherwise.
    """
    triples = list(itertools.combinations(range(len(functionals)), 3))
    weights = []
    for a, b, c in triples:
        fa, fb, fc = functionals[a], functionals[b], functionals[c]
        lam = np.array([
            fb[0] * fc[1] - fb[1] * fc[0],
            -(fa[0] * fc[1] - fa[1] * fc[0]),
            fa[0] * fb[1] - fa[1] * fb[0],
        ])
        if np.any(np.abs(lam) <= 1e-12):
            return None
        weights.append(lam / np.abs(lam).sum())
    return triples, weights


def _assignment_batches(n: int, slots: int, cap: int):
    total = n ** slots
    if total > cap:
        logger.warning(
            f"{total} index assignments exceed the enumeration cap {cap}; "
            f"the reported minimum is an upper bound"
        )
    count = min(total, cap)
    for start in range(0, count, BATCH_SIZE):
        flat = np.arange(start, min(start + BATCH_SIZE, count))
        yield np.stack(np.unravel_index(flat, (n,) * slots), axis=1)


def _chebyshev_lp(inc: _Incidence, assignment: Sequence[int]) -> float:
    """min over z of max_{s, channel} |a_s.z - b_{s, i_s}| as a linear program in epigraph form"""
    slots, channels = inc.slots, inc.targets.shape[2]
    nvar = 2 * channels + 1
    rows, rhs = [], []
    for s, i in enumerate(assignment):
        for c in range(channels):
            row = np.zeros(nvar)
            row[2 * c:2 * c + 2] = inc.functionals[s]
            row[-1] = -1.0
            rows.append(row)
            rhs.append(inc.targets[s, i, c])
            neg = -row
            neg[-1] = -1.0
            rows.append(neg)
            rhs.append(-inc.targets[s, i, c])
    cost = np.zeros(nvar)
    cost[-1] = 1.0
    bounds = [(None, None)] * (2 * channels) + [(0, None)]
    result = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method='highs')
    if result.status != 0:
        raise RuntimeError(f"Chebyshev linear program failed: {result.message}")
    return float(result.fun)


def _min_ghost_delta(inc: _Incidence, cap: int, method: str) -> float:
    n, slots = inc.size, inc.slots
    if n < 2:
        return math.inf
    if slots <= 2:
        return 0.0
    reference = _reference_weights(inc.functionals) if method != "lp" else None
    if method == "closed" and reference is None:
        raise ValueError("closed-form evaluation needs pairwise independent functionals")
    best = math.inf
    if reference is not None:
        triples, weights = reference
        for batch in _assignment_batches(n, slots, cap):
            values = np.zeros(len(batch))
            for (a, b, c), lam in zip(triples, weights):
                residual = (lam[0] * inc.targets[a, batch[:, a]]
                            + lam[1] * inc.targets[b, batch[:, b]]
                            + lam[2] * inc.targets[c, batch[:, c]])
                values = np.maximum(values, np.abs(residual).max(axis=1))
            values[np.all(batch == batch[:, :1], axis=1)] = math.inf
            best = min(best, float(values.min()))
            if best <= 0.0:
                break
        return best
    for batch in _assignment_batches(n, slots, cap):
        for assignment in batch:
            if np.all(assignment == assignment[0]):
                continue
            best = min(best, _chebyshev_lp(inc, assignment))
            if best <= 1e-12:
                return 0.0
    return best


def min_ghost_delta(S, times: Sequence[float], cap: int = MAX_ASSIGNMENTS, method: str = "auto") -> float:
    """
    Smallest Delta for which a Delta-ghost exists: the minimum over index
    assignments (i_t), not all equal, of min_(x,v) max_t |x + t v - (x_i_t + t v_i_t)|.

    Distances are Euclidean for 1-D configurations and the max-norm over
    coordinates otherwise. method is "lp" (one linear program per
    assignment), "closed" (three-slot reference formula) or "auto".
    """
    if method not in ("auto", "lp", "closed"):
        raise ValueError(f"unknown method {method!r}")
    return _min_ghost_delta(_time_incidence(S, times), cap, method)


def min_direction_ghost_delta(positions, directions: Sequence[Direction], cap: int = MAX_ASSIGNMENTS,
                              method: str = "auto") -> float:
    if method not in ("auto", "lp", "closed"):
        raise ValueError(f"unknown method {method!r}")
    return _min_ghost_delta(_direction_incidence(positions, directions), cap, method)


def ghost_report(S, times: Sequence[float], delta: float = 0.0, cap: int = MAX_ASSIGNMENTS) -> GhostReport:
    return GhostReport(
        ghosts=find_ghosts(S, times) if len(times) >= 2 else [],
        coincidences=find_coincidences(S, times, delta),
        min_coincidence_delta=min_coincidence_delta(S, times),
        min_ghost_delta=min_ghost_delta(S, times, cap) if len(times) >= 2 else math.inf,
    )


def direction_report(positions, directions: Sequence[Direction], delta: float = 0.0,
                     cap: int = MAX_ASSIGNMENTS) -> GhostReport:
    inc = _direction_incidence(positions, directions)
    distances = [
        float(abs(inc.targets[s, i, 0] - inc.targets[s, j, 0]))
        for s in range(inc.slots) for i, j in itertools.combinations(range(inc.size), 2)
    ]
    return GhostReport(
        ghosts=find_direction_ghosts(positions, directions) if len(directions) >= 2 else [],
        coincidences=find_direction_coincidences(positions, directions, delta),
        min_coincidence_delta=min(distances) if distances else math.inf,
        min_ghost_delta=min_direction_ghost_delta(positions, directions, cap) if len(directions) >= 2 else math.inf,
    )


def projected_degeneracy(lam: ParticleConfig, directions: Sequence[Direction], times: Sequence[float] = (),
                         mode: str = TIME_MODE, t: float = 0.0, delta: float = 0.0) -> List[GhostReport]:
    """
    Time mode: one report per direction for the unmerged projections
    (theta.x_i, theta.v_i) over the given times.
    Direction mode: a single report for the snapshot at time t over the direction set.
    """
    if mode == TIME_MODE:
        reports = []
        for theta in directions:
            vec = theta.as_array()
            projected = (lam.positions @ vec, lam.velocities @ vec)
            reports.append(ghost_report(projected, times, delta))
        return reports
    if mode == DIRECTION_MODE:
        snapshot = lam.positions + t * lam.velocities
        return [direction_report(snapshot, directions, delta)]
    raise ValueError(f"unknown degeneracy mode {mode!r}")
