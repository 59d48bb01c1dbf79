"""
The discretized dimension-reduced problem

    min  sum_theta |gamma_theta|_1 + sum_t |u_t|_1 + 1/(2 alpha) sum_{t measured} |A_t u_t - f_t|^2
    s.t. sqrt(sum_{theta, t} |M_theta_t gamma_theta - R_t_theta u_t|^2) <= tau,  all weights >= 0

and its assembly from time grids and directions. The static problem is
the same object without directions and with a single time.
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple
import logging

import numpy as np

import env
from modules.discretize.cache import cached_matrix, matrix_key
from modules.discretize.index import assemble_fourier_matrix, assemble_move_matrix, assemble_radon_matrix
from modules.geometry.index import (
    Direction, GridSpec, TimeGrid, bin_interval, make_grid, projected_phase_domain, snapshot_domain,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ReducedProblem:
    directions: Tuple[Direction, ...]
    times: Tuple[float, ...]
    measured: Tuple[int, ...]
    observation: Tuple[np.ndarray, ...]
    data: Tuple[np.ndarray, ...]
    move: Dict[Tuple[int, int], np.ndarray]
    radon: Dict[Tuple[int, int], np.ndarray]
    alpha: float
    tau: float
    u_grids: Tuple[GridSpec, ...] = field(default=(), repr=False)
    gamma_grids: Tuple[GridSpec, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.tau >= 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if len(self.observation) != len(self.measured) or len(self.data) != len(self.measured):
            raise ValueError(
                f"{len(self.measured)} measured times but {len(self.observation)} observation "
                f"matrices and {len(self.data)} data vectors"
            )
        if not self.measured:
            raise ValueError("at least one measured time is required")
        for l in self.measured:
            if not 0 <= l < len(self.times):
                raise ValueError(f"measured index {l} is out of range for {len(self.times)} times")
        u_sizes = {}
        for l, A, f in zip(self.measured, self.observation, self.data):
            if A.ndim != 2 or f.shape != (A.shape[0],):
                raise ValueError(f"data vector of shape {f.shape} does not match observation matrix {A.shape}")
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(f))):
                raise ValueError(f"non-finite observation data at time {self.times[l]}")
            u_sizes[l] = A.shape[1]
        gamma_sizes = {}
        for key in set(self.move) | set(self.radon):
            if key not in self.move or key not in self.radon:
                raise ValueError(f"move and radon matrices must come in pairs, missing one for {key}")
            k, l = key
            Mv, Rt = self.move[key], self.radon[key]
            if Mv.shape[0] != Rt.shape[0]:
                raise ValueError(f"bin counts differ for {key}: {Mv.shape[0]} vs {Rt.shape[0]}")
            if gamma_sizes.setdefault(k, Mv.shape[1]) != Mv.shape[1]:
                raise ValueError(f"inconsistent gamma size for direction {k}")
            if u_sizes.setdefault(l, Rt.shape[1]) != Rt.shape[1]:
                raise ValueError(f"inconsistent u size for time {self.times[l]}")
        if len(gamma_sizes) != len(self.directions):
            raise ValueError(f"{len(self.directions)} directions but consistency blocks for {len(gamma_sizes)}")
        object.__setattr__(self, '_u_sizes', tuple(u_sizes.get(l, 0) for l in range(len(self.times))))
        object.__setattr__(self, '_gamma_sizes', tuple(gamma_sizes[k] for k in range(len(self.directions))))

    @property
    def u_sizes(self) -> Tuple[int, ...]:
        return self._u_sizes

    @property
    def gamma_sizes(self) -> Tuple[int, ...]:
        return self._gamma_sizes

    @property
    def consistency_rows(self) -> int:
        return int(sum(m.shape[0] for m in self.move.values()))

    def time_index(self, t: float) -> int:
        for l, s in enumerate(self.times):
            if abs(s - t) <= 1e-12:
                return l
        raise ValueError(f"time {t} is not a reconstruction time of this problem")


def consistency_residual(prob: ReducedProblem, u: Sequence[np.ndarray], gamma: Sequence[np.ndarray]) -> float:
    total = 0.0
    for (k, l), Mv in prob.move.items():
        diff = Mv @ gamma[k] - prob.radon[(k, l)] @ u[l]
        total += float(diff @ diff)
    return float(np.sqrt(total))


def data_residuals(prob: ReducedProblem, u: Sequence[np.ndarray]):
    return [float(np.linalg.norm(A @ u[l] - f)) for l, A, f in zip(prob.measured, prob.observation, prob.data)]


def solution_objective(prob: ReducedProblem, u: Sequence[np.ndarray], gamma: Sequence[np.ndarray]) -> float:
    """Objective value of the reduced problem (the constraint is not checked here)"""
    l1 = sum(float(np.sum(g)) for g in gamma) + sum(float(np.sum(v)) for v in u)
    fit = sum(r * r for r in data_residuals(prob, u))
    return l1 + fit / (2.0 * prob.alpha)


def _cached(builder, key_parts, cache_dir):
    key = matrix_key(*key_parts)
    return cached_matrix(cache_dir, key, lambda: builder().values, header={"tag": key_parts[2]})


def assemble_reduced_problem(
    time_grid: TimeGrid,
    directions: Sequence[Direction],
    M: int,
    cutoff: int,
    data: Sequence[np.ndarray],
    alpha: float,
    tau: float,
    cache_dir: Optional[str] = None,
) -> ReducedProblem:
    """
    Build grids and matrices for every reconstruction time and direction.

    data holds one stacked observation vector per measurement time, in the
    order of time_grid.measurement_times.
    """
    cache_dir = env.MATRIX_CACHE_DIR if cache_dir is None else cache_dir
    T = time_grid.half_width
    times = time_grid.all_times
    if len(data) != len(time_grid.measurement_times):
        raise ValueError(f"{len(data)} data vectors for {len(time_grid.measurement_times)} measurement times")

    u_grids = tuple(make_grid(snapshot_domain(t, T), M) for t in times)
    gamma_grids = tuple(make_grid(projected_phase_domain(theta, T), M) for theta in directions)

    measured, observation = [], []
    for t in time_grid.measurement_times:
        l = next(i for i, s in enumerate(times) if abs(s - t) <= 1e-12)
        grid = u_grids[l]
        box = grid.domain
        A = _cached(
            lambda: assemble_fourier_matrix(grid, cutoff, t),
            ([box.lower, box.upper], M, f"fourier t={t!r}", cutoff),
            cache_dir,
        )
        measured.append(l)
        observation.append(A)

    move, radon = {}, {}
    for k, theta in enumerate(directions):
        for l, t in enumerate(times):
            bins = make_grid(bin_interval(theta, t, T), M)
            tag = f"theta={theta.vector!r} t={t!r} T={T!r}"
            move[(k, l)] = _cached(
                lambda: assemble_move_matrix(gamma_grids[k], t, bins),
                (gamma_grids[k].domain.vertices, M, "move " + tag, None),
                cache_dir,
            )
            box = u_grids[l].domain
            radon[(k, l)] = _cached(
                lambda: assemble_radon_matrix(u_grids[l], theta, bins),
                ([box.lower, box.upper], M, "radon " + tag, None),
                cache_dir,
            )
    logger.debug(f"Assembled reduced problem: {len(directions)} directions, {len(times)} times, M={M}")
    return ReducedProblem(
        directions=tuple(directions),
        times=times,
        measured=tuple(measured),
        observation=tuple(observation),
        data=tuple(np.asarray(f, dtype=float) for f in data),
        move=move,
        radon=radon,
        alpha=alpha,
        tau=tau,
        u_grids=u_grids,
        gamma_grids=gamma_grids,
    )


def assemble_static_problem(M: int, cutoff: int, f: np.ndarray, alpha: float, t: float = 0.0, T: float = 1.0,
                            cache_dir: Optional[str] = None) -> ReducedProblem:
    """Single snapshot, no directions"""
    cache_dir = env.MATRIX_CACHE_DIR if cache_dir is None else cache_dir
    grid = make_grid(snapshot_domain(t, T), M)
    box = grid.domain
    A = _cached(
        lambda: assemble_fourier_matrix(grid, cutoff, t),
        ([box.lower, box.upper], M, f"fourier t={t!r}", cutoff),
        cache_dir,
    )
    return ReducedProblem(
        directions=(),
        times=(float(t),),
        measured=(0,),
        observation=(A,),
        data=(np.asarray(f, dtype=float),),
        move={},
        radon={},
        alpha=alpha,
        tau=0.0,
        u_grids=(grid,),
    )
