"""
One reconstruction instance: synthesize data, solve with the chosen
method, evaluate the snapshot at t = 0 against the ground truth.
"""
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Tuple
import logging
import math
import time

import numpy as np

from modules.adcg.index import REASON_MAX_OUTER, AdcgParams, FourierMotionModel, solve_adcg
from modules.datagen.index import add_noise, measure
from modules.discretize.index import fourier_frequencies
from modules.experiments.config import ExperimentConfig
from modules.experiments.placement import place_directions, place_extra_times
from modules.geometry.index import TimeGrid
from modules.measures.index import ParticleConfig, dynamic_separation, move
from modules.metrics.index import cluster_extract, grid_measure, match_configs, unbalanced_wasserstein
from modules.solver.index import solve_reduced
from modules.solver.problem import ReducedProblem, assemble_reduced_problem, assemble_static_problem
from shared.constants.command_register import METHOD_ADCG, METHOD_REDUCED, METHOD_STATIC, STATUS_FAILED, STATUS_OK
from shared.utils.error_handler import handle_instance_errors

logger = logging.getLogger(__name__)

# Evaluation time
EVAL_TIME = 0.0


@dataclass(frozen=True)
class InstanceJob:
    experiment: ExperimentConfig
    config_hash: str
    instance_id: int
    truth: ParticleConfig
    times: tuple
    delta: float
    delta_index: int = 0
    method: Optional[str] = None

    def __post_init__(self):
        if self.method is None:
            object.__setattr__(self, 'method', self.experiment.method)

    @property
    def alpha(self) -> float:
        return self.experiment.alpha_for(self.delta)

    def base_row(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "method": self.method,
            "delta": float(self.delta),
            "alpha": float(self.alpha),
            "n_particles": len(self.truth),
            "dynamic_separation": dynamic_separation(self.truth, self.times),
            "config_hash": self.config_hash,
        }

    def failed_row(self) -> dict:
        row = self.base_row()
        row.update(uw=math.nan, matched=False, runtime_ms=0.0, n_detected=0, converged=False, status=STATUS_FAILED)
        return row


def _zero_data(cutoff: int, count: int):
    return [np.zeros(2 * len(fourier_frequencies(cutoff, 2)))] * count


@lru_cache(maxsize=8)
def reduced_skeleton(times: Tuple[float, ...], n_directions: int, n_extra: int, M: int, cutoff: int,
                     tau: float) -> ReducedProblem:
    """Grids and matrices for one (directions, times, M) signature, built once per process"""
    extra = place_extra_times(times, n_extra)
    time_grid = TimeGrid(times, tuple(extra))
    directions = place_directions(n_directions)
    logger.info(f"Assembling reduced problem: M={M}, {n_directions} directions, times {time_grid.all_times}")
    return assemble_reduced_problem(time_grid, directions, M, cutoff, _zero_data(cutoff, len(times)), 1.0, tau)


@lru_cache(maxsize=8)
def static_skeleton(M: int, cutoff: int, half_width: float) -> ReducedProblem:
    logger.info(f"Assembling static problem: M={M}")
    return assemble_static_problem(M, cutoff, _zero_data(cutoff, 1)[0], 1.0, t=EVAL_TIME, T=half_width)


def _eval_index(times) -> int:
    for l, t in enumerate(times):
        if abs(t - EVAL_TIME) <= 1e-12:
            return l
    raise ValueError(f"measurement times {tuple(times)} do not contain the evaluation time {EVAL_TIME}")


def _grid_solution(job: InstanceJob, data):
    """(u at t=0, its grid, converged) from the static or reduced solver"""
    exp = job.experiment
    options = exp.solver_options()
    if job.method == METHOD_STATIC:
        skeleton = static_skeleton(exp.M, exp.cutoff, max(abs(t) for t in job.times))
        prob = replace(skeleton, data=(data[_eval_index(job.times)],), alpha=job.alpha)
    else:
        skeleton = reduced_skeleton(tuple(job.times), exp.directions_count, exp.extra_count, exp.M, exp.cutoff,
                                    exp.tau)
        prob = replace(skeleton, data=tuple(data), alpha=job.alpha)
    u, _, report = solve_reduced(prob, options)
    l = prob.time_index(EVAL_TIME)
    return u[l], prob.u_grids[l], report.converged


@handle_instance_errors("reconstruction")
def reconstruct_instance(job: InstanceJob) -> dict:
    exp = job.experiment
    rng = np.random.default_rng([exp.seed, job.instance_id, job.delta_index])
    data = add_noise(measure(job.truth, job.times, exp.cutoff), job.delta, rng)
    truth = move(job.truth, EVAL_TIME)
    started = time.perf_counter()

    if job.method == METHOD_ADCG:
        model = FourierMotionModel(job.times, exp.cutoff, job.truth.dim)
        solution = solve_adcg(model, data, AdcgParams.from_config(job.alpha))
        recovered = solution.snapshot(EVAL_TIME)
        detected = solution.snapshot(EVAL_TIME, exp.w_min)
        converged = solution.reason != REASON_MAX_OUTER
    elif job.method in (METHOD_STATIC, METHOD_REDUCED):
        u, grid, converged = _grid_solution(job, data)
        recovered = grid_measure(u, grid)
        detected = cluster_extract(u, grid, exp.w_min)
    else:
        raise ValueError(f"unknown method {job.method!r}")
    runtime_ms = 1000.0 * (time.perf_counter() - started)

    uw = unbalanced_wasserstein(recovered, truth, exp.uw_radius).value
    matched = match_configs(detected, truth, exp.match_radius)
    row = job.base_row()
    row.update(
        uw=float(uw),
        matched=bool(matched),
        runtime_ms=runtime_ms,
        n_detected=len(detected),
        converged=bool(converged),
        status=STATUS_OK,
    )
    logger.debug(f"Instance {job.instance_id} ({job.method}, delta={job.delta}): uw={uw:.4e} matched={matched}")
    return row
