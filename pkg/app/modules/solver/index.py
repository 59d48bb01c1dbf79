"""
Primal-dual solver for the reduced and static problems.

The unknown x stacks every gamma_theta followed by every u_t. With
K_a the block-diagonal observation operator and K_b the consistency
operator [M_theta_t on gamma_theta, -R_t_theta on u_t], the problem reads

    min_x  1.x + i(x >= 0) + F_a(K_a x) + F_b(K_b x)

with F_a(z) = |z - f|^2 / (2 alpha) and F_b the indicator of the ball of
radius tau. Both conjugates have closed-form proximal maps, so a plain
Chambolle-Pock iteration applies. The two dual blocks get their own step
sizes scaled by the block norms.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional
import logging
import time

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import aslinearoperator

from modules.solver.config import (
    FEAS_TOL_SCALE, NORM_SAFETY, POWER_ITERS, POWER_TOL, get_solver_config,
)
from modules.solver.problem import (
    ReducedProblem, consistency_residual, data_residuals, solution_objective,
)

logger = logging.getLogger(__name__)

# Objective is evaluated every CHECK_EVERY iterations
CHECK_EVERY = 10


@dataclass
class SolverReport:
    iterations: int
    objective_trace: List[float]
    consistency_residual: float
    data_residuals: List[float]
    gap: float
    wall_time: float
    converged: bool
    feas_tol: float
    primal_step: float = 0.0
    dual_steps: Dict[str, float] = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else 0.0


def operator_norm_estimate(operator, iters: int = POWER_ITERS, tol: float = POWER_TOL,
                           safety: float = NORM_SAFETY) -> float:
    """
    Spectral norm by power iteration on A^T A, times a safety factor.

    Accepts dense arrays, sparse matrices and scipy LinearOperators.
    """
    op = aslinearoperator(operator)
    n = op.shape[1]
    if n == 0 or op.shape[0] == 0:
        return 0.0
    x = np.random.default_rng(0).standard_normal(n)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(iters):
        y = op.rmatvec(op.matvec(x))
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        previous, estimate = estimate, np.sqrt(norm)
        x = y / norm
        if previous > 0 and abs(estimate - previous) <= tol * estimate:
            break
    return float(estimate * safety)


def _block_row(prob: ReducedProblem, entries: dict, rows: int):
    """One block row of the stacked operator; entries maps block column -> matrix"""
    sizes = list(prob.gamma_sizes) + list(prob.u_sizes)
    parts = []
    for j, size in enumerate(sizes):
        if size == 0:
            continue
        block = entries.get(j)
        parts.append(sparse.csr_matrix(block) if block is not None else sparse.csr_matrix((rows, size)))
    return sparse.hstack(parts, format='csr')


def _observation_operator(prob: ReducedProblem):
    offset = len(prob.directions)
    rows = [_block_row(prob, {offset + l: A}, A.shape[0]) for A, l in zip(prob.observation, prob.measured)]
    return sparse.vstack(rows, format='csr')


def _consistency_operator(prob: ReducedProblem):
    if not prob.move:
        return None
    offset = len(prob.directions)
    rows = []
    for (k, l) in sorted(prob.move):
        Mv = prob.move[(k, l)]
        rows.append(_block_row(prob, {k: Mv, offset + l: -prob.radon[(k, l)]}, Mv.shape[0]))
    return sparse.vstack(rows, format='csr')


def _split(x: np.ndarray, prob: ReducedProblem):
    sizes = list(prob.gamma_sizes) + list(prob.u_sizes)
    parts = np.split(x, np.cumsum(sizes)[:-1])
    n_theta = len(prob.directions)
    return parts[n_theta:], parts[:n_theta]


def solve_reduced(prob: ReducedProblem, options: Optional[dict] = None, **overrides):
    """
    Approximate minimizer of the reduced problem.

    Returns (u vectors per time, gamma vectors per direction, SolverReport).
    Stops once the objective changes by less than obj_tol (relative) over
    obj_window iterations while the consistency residual is within
    tau + feas_tol; otherwise runs to max_iters and reports converged=False.
    With gap_tol set, the objective test is replaced by a relative duality
    gap of at most gap_tol.
    """
    opts = get_solver_config()
    opts.update(options or {})
    opts.update(overrides)
    started = time.perf_counter()

    K_a = _observation_operator(prob)
    K_b = _consistency_operator(prob)
    f = np.concatenate(prob.data)
    alpha, tau = prob.alpha, prob.tau
    n = K_a.shape[1]
    rows_b = K_b.shape[0] if K_b is not None else 0
    feas_tol = opts["feas_tol"]
    if feas_tol is None:
        feas_tol = FEAS_TOL_SCALE * np.sqrt(max(rows_b, 1))

    L_a = operator_norm_estimate(K_a)
    L_b = operator_norm_estimate(K_b) if K_b is not None else 0.0
    scaled_blocks = [K_a / L_a] if L_a > 0 else []
    if L_b > 0:
        scaled_blocks.append(K_b / L_b)
    L = operator_norm_estimate(sparse.vstack(scaled_blocks)) if scaled_blocks else 1.0
    rho = opts["step_ratio"]
    primal_step = rho * 0.99 / L
    dual_scale = 0.99 / (rho * L)
    sigma_a = dual_scale / L_a ** 2 if L_a > 0 else 0.0
    sigma_b = dual_scale / L_b ** 2 if L_b > 0 else 0.0
    logger.debug(f"Step sizes: primal {primal_step:.3e}, data {sigma_a:.3e}, consistency {sigma_b:.3e}")

    x = np.zeros(n)
    x_bar = x.copy()
    y_a = np.zeros(K_a.shape[0])
    y_b = np.zeros(rows_b)
    trace = []
    window = max(1, opts["obj_window"] // CHECK_EVERY)
    converged = False
    iteration = 0

    for iteration in range(1, opts["max_iters"] + 1):
        q = y_a + sigma_a * (K_a @ x_bar)
        y_a = (q - sigma_a * f) / (1.0 + sigma_a * alpha)
        if K_b is not None:
            q = y_b + sigma_b * (K_b @ x_bar)
            q_norm = np.linalg.norm(q)
            y_b = q * max(0.0, 1.0 - sigma_b * tau / q_norm) if q_norm > 0 else q
            grad = K_a.T @ y_a + K_b.T @ y_b
        else:
            grad = K_a.T @ y_a
        x_new = np.maximum(x - primal_step * grad - primal_step, 0.0)
        x_bar = 2.0 * x_new - x
        x = x_new

        if iteration % CHECK_EVERY:
            continue
        fit = K_a @ x - f
        objective = float(x.sum() + fit @ fit / (2.0 * alpha))
        trace.append(objective)
        log_every = opts["log_every"]
        if log_every and iteration % log_every == 0:
            logger.info(f"Iteration {iteration}: objective {objective:.6e}")
        if len(trace) <= window:
            continue
        if opts["gap_tol"] is not None:
            gap = objective - _dual_value(K_a, K_b, y_a, y_b, f, alpha, tau)
            settled = gap <= opts["gap_tol"] * max(abs(objective), 1.0)
        else:
            reference = trace[-1 - window]
            settled = abs(reference - objective) / max(abs(objective), 1e-12) < opts["obj_tol"]
        if settled:
            residual = float(np.linalg.norm(K_b @ x)) if K_b is not None else 0.0
            if residual <= tau + feas_tol:
                converged = True
                break

    u, gamma = _split(x, prob)
    residual = consistency_residual(prob, u, gamma)
    final_objective = solution_objective(prob, u, gamma)
    if not trace or trace[-1] != final_objective:
        trace.append(final_objective)
    gap = final_objective - _dual_value(K_a, K_b, y_a, y_b, f, alpha, tau)
    if not converged:
        logger.warning(
            f"Solver stopped at max_iters={opts['max_iters']} without converging "
            f"(objective {final_objective:.6e}, consistency residual {residual:.3e})"
        )
    report = SolverReport(
        iterations=iteration,
        objective_trace=trace,
        consistency_residual=residual,
        data_residuals=data_residuals(prob, u),
        gap=gap,
        wall_time=time.perf_counter() - started,
        converged=converged,
        feas_tol=float(feas_tol),
        primal_step=primal_step,
        dual_steps={"data": sigma_a, "consistency": sigma_b},
    )
    return u, gamma, report


def _dual_value(K_a, K_b, y_a, y_b, f, alpha, tau) -> float:
    """Dual objective at the dual iterate, rescaled into the dual feasible set"""
    adjoint = -(K_a.T @ y_a)
    if K_b is not None:
        adjoint = adjoint - K_b.T @ y_b
    worst = float(adjoint.max()) if adjoint.size else 0.0
    s = min(1.0, 1.0 / worst) if worst > 0 else 1.0
    ya, yb = s * y_a, s * y_b
    value = -(alpha / 2.0 * float(ya @ ya) + float(ya @ f))
    if K_b is not None:
        value -= tau * float(np.linalg.norm(yb))
    return value


def solve_static(A, f: np.ndarray, alpha: float, options: Optional[dict] = None, **overrides):
    """
    Static baseline: min |u|_1 + |A u - f|^2 / (2 alpha) over u >= 0.

    Returns (u, SolverReport).
    """
    values = getattr(A, "values", A)
    prob = ReducedProblem(
        directions=(),
        times=(0.0,),
        measured=(0,),
        observation=(np.asarray(values, dtype=float),),
        data=(np.asarray(f, dtype=float),),
        move={},
        radon={},
        alpha=alpha,
        tau=0.0,
        u_grids=(A.grid,) if hasattr(A, "grid") else (),
    )
    u, _, report = solve_reduced(prob, options, **overrides)
    return u[0], report
