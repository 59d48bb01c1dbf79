"""
Alternating descent conditional gradient over phase space.

Minimizes 1/2 |F(lambda) - f|^2 + alpha * mass(lambda) over nonnegative
atomic measures lambda on the phase domain, where F stacks the truncated
Fourier data of every snapshot. Each outer iteration adds the atom most
negatively correlated with the residual, refits the weights and then
descends jointly on positions, velocities and weights.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence
import logging
import math

import numpy as np

from modules.adcg.config import (
    ARMIJO, BACKTRACK, LOCAL_TOL, MAX_BACKTRACKS, get_adcg_config,
)
from modules.discretize.index import fourier_frequencies
from modules.geometry.index import phase_domain_contains, project_to_phase_domain
from modules.measures.index import DiscreteMeasure, ParticleConfig
from shared.constants.defaults import SPACE_DIM

logger = logging.getLogger(__name__)

# Slack allowed in the monotone objective check
MONOTONE_SLACK = 1e-12

REASON_GAP = "gap"
REASON_PROGRESS = "progress"
REASON_MAX_OUTER = "max_outer"
REASON_NO_DESCENT = "no_descent"


@dataclass
class AdcgParams:
    alpha: float
    max_outer: int = 100
    max_coord_descent: int = 200
    init_grid: int = 20
    min_gap: float = 1e-5
    min_progress: float = 1e-4
    max_local_steps: int = 100

    def __post_init__(self):
        for name in ("alpha", "max_outer", "max_coord_descent", "init_grid", "min_gap", "min_progress"):
            if not getattr(self, name) > 0:
                raise ValueError(f"ADCG parameter {name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_config(cls, alpha: float, **overrides) -> "AdcgParams":
        values = get_adcg_config()
        values.update(overrides)
        return cls(alpha=alpha, **values)


@dataclass
class AtomicSolution:
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    objective: float
    reason: str
    iterations: int = 0
    objective_trace: List[float] = field(default_factory=list)
    gap: float = 0.0

    def __len__(self) -> int:
        return len(self.masses)

    def snapshot(self, t: float = 0.0, w_min: float = 0.0) -> DiscreteMeasure:
        keep = self.masses >= w_min
        return DiscreteMeasure(self.positions[keep] + t * self.velocities[keep], self.masses[keep]).merged()

    def to_config(self) -> ParticleConfig:
        keep = self.masses > 0
        return ParticleConfig(self.positions[keep], self.velocities[keep], self.masses[keep])


class FourierMotionModel:
    """
    Stacked truncated Fourier data of all snapshots of a moving atom.

    The feature vector of (x, v) is the concatenation over times t of
    (Re, Im) of exp(-i 2 pi (x + t v).xi), in the frequency order of
    fourier_frequencies; this matches datagen.measure.
    """

    def __init__(self, times: Sequence[float], cutoff: int, dim: int = SPACE_DIM):
        self.times = np.asarray(times, dtype=float)
        if len(self.times) == 0:
            raise ValueError("the motion model needs at least one time")
        self.frequencies = fourier_frequencies(cutoff, dim)
        self.dim = dim
        self.half_width = float(np.abs(self.times).max())

    @property
    def size(self) -> int:
        return 2 * len(self.times) * len(self.frequencies)

    def _phases(self, X: np.ndarray, V: np.ndarray) -> np.ndarray:
        """(atoms, times, frequencies)"""
        px = 2 * np.pi * (X @ self.frequencies.T)
        pv = 2 * np.pi * (V @ self.frequencies.T)
        return px[:, None, :] + self.times[None, :, None] * pv[:, None, :]

    def features(self, X, V) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))
        phases = self._phases(X, V)
        stacked = np.concatenate([np.cos(phases), -np.sin(phases)], axis=2)
        return stacked.reshape(len(X), self.size)

    def forward(self, X, V, w) -> np.ndarray:
        if len(w) == 0:
            return np.zeros(self.size)
        return np.asarray(w) @ self.features(X, V)

    def split(self, r: np.ndarray):
        parts = r.reshape(len(self.times), 2, len(self.frequencies))
        return parts[:, 0, :], parts[:, 1, :]

    def gradients(self, X, V, w, r):
        """Gradient of <F(X, V, w), r> with respect to positions and velocities"""
        X = np.atleast_2d(X)
        V = np.atleast_2d(V)
        r_re, r_im = self.split(r)
        phases = self._phases(X, V)
        G = -np.sin(phases) * r_re[None] - np.cos(phases) * r_im[None]
        gx = 2 * np.pi * np.asarray(w)[:, None] * (G.sum(axis=1) @ self.frequencies)
        gv = 2 * np.pi * np.asarray(w)[:, None] * ((G * self.times[None, :, None]).sum(axis=1) @ self.frequencies)
        return gx, gv

    def correlation_grid(self, r: np.ndarray, positions: np.ndarray, velocities: np.ndarray) -> np.ndarray:
        """<features(x, v), r> for every pair of grid position and grid velocity, shape (P, Q)"""
        r_re, r_im = self.split(r)
        coeffs = r_re + 1j * r_im
        ex = np.exp(2j * np.pi * (positions @ self.frequencies.T))
        ev = np.exp(2j * np.pi * self.times[:, None, None] * (velocities @ self.frequencies.T)[None])
        B = np.einsum('tf,tqf->qf', coeffs, ev)
        return np.real(ex @ B.T)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise RuntimeError("ADCG produced non-finite gradients; aborting")


class _Adcg:
    def __init__(self, model: FourierMotionModel, f: np.ndarray, params: AdcgParams):
        self.model = model
        self.f = f
        self.params = params
        self.alpha = params.alpha
        ticks = (np.arange(params.init_grid) + 0.5) / params.init_grid
        vmax = 1.0 / (2.0 * model.half_width)
        vticks = -vmax + 2 * vmax * ticks
        axes = [ticks] * model.dim
        self.grid_positions = np.array(np.meshgrid(*axes, indexing='ij')).reshape(model.dim, -1).T
        self.grid_velocities = np.array(np.meshgrid(*([vticks] * model.dim), indexing='ij')).reshape(model.dim, -1).T
        # admissible (position, velocity) pairs of the search grid
        self.grid_mask = phase_domain_contains(
            self.grid_positions[:, None, :], self.grid_velocities[None, :, :], model.half_width
        )

    def objective(self, X, V, w) -> float:
        r = self.model.forward(X, V, w) - self.f
        return 0.5 * float(r @ r) + self.alpha * float(np.sum(w))

    def residual(self, X, V, w) -> np.ndarray:
        return self.model.forward(X, V, w) - self.f

    def candidate(self, r: np.ndarray):
        corr = self.model.correlation_grid(r, self.grid_positions, self.grid_velocities)
        corr = np.where(self.grid_mask, corr, np.inf)
        p, q = np.unravel_index(np.argmin(corr), corr.shape)
        x, v = self.grid_positions[p].copy(), self.grid_velocities[q].copy()
        return self.refine(x, v, r)

    def refine(self, x, v, r):
        """Projected gradient descent on the correlation <features(x, v), r>"""
        def corr(x, v):
            return float(self.model.features(x, v)[0] @ r)
        value = corr(x, v)
        step = 1e-2
        T = self.model.half_width
        for _ in range(self.params.max_local_steps):
            gx, gv = self.model.gradients(x, v, np.ones(1), r)
            _check_finite(gx, gv)
            gx, gv = gx[0], gv[0]
            norm2 = float(gx @ gx + gv @ gv)
            if norm2 == 0:
                break
            step *= 2
            for _ in range(MAX_BACKTRACKS):
                nx, nv = project_to_phase_domain(x - step * gx, v - step * gv, T)
                new = corr(nx, nv)
                if new <= value - ARMIJO * float(gx @ (x - nx) + gv @ (v - nv)):
                    break
                step *= BACKTRACK
            else:
                break
            moved = value - new
            x, v, value = nx, nv, new
            if moved <= LOCAL_TOL * max(1.0, abs(value)):
                break
        return x, v, value

    def refit_weights(self, X, V, w):
        """Nonnegative coordinate descent on the weights with atoms fixed"""
        Phi = self.model.features(X, V)
        norms = np.einsum('ij,ij->i', Phi, Phi)
        w = w.copy()
        r = w @ Phi - self.f
        for _ in range(self.params.max_coord_descent):
            largest = 0.0
            for i in range(len(w)):
                if norms[i] == 0:
                    continue
                g = float(Phi[i] @ r)
                new = max(0.0, w[i] - (g + self.alpha) / norms[i])
                if new != w[i]:
                    r += (new - w[i]) * Phi[i]
                    largest = max(largest, abs(new - w[i]))
                    w[i] = new
            if largest <= 1e-12:
                break
        return w

    def joint_descent(self, X, V, w):
        """Projected gradient descent on (positions, velocities, weights) with Armijo backtracking"""
        T = self.model.half_width
        value = self.objective(X, V, w)
        step = 1e-3
        for _ in range(self.params.max_local_steps):
            r = self.residual(X, V, w)
            gx, gv = self.model.gradients(X, V, w, r)
            gw = self.model.features(X, V) @ r + self.alpha
            _check_finite(gx, gv, gw)
            step *= 2
            for _ in range(MAX_BACKTRACKS):
                nX, nV = project_to_phase_domain(X - step * gx, V - step * gv, T)
                nw = np.maximum(w - step * gw, 0.0)
                new = self.objective(nX, nV, nw)
                decrease = float(np.sum(gx * (X - nX)) + np.sum(gv * (V - nV)) + gw @ (w - nw))
                if new <= value - ARMIJO * decrease:
                    break
                step *= BACKTRACK
            else:
                break
            moved = value - new
            X, V, w, value = nX, nV, nw, new
            if moved <= LOCAL_TOL * max(1.0, abs(value)):
                break
        return X, V, w

    def gap(self, w, r, atom_corr, best_corr) -> float:
        """Conditional gradient gap with the mass bound |f|^2 / (2 alpha)"""
        mass_bound = 0.5 * float(self.f @ self.f) / self.alpha
        inner = float(np.sum(w * (atom_corr + self.alpha))) if len(w) else 0.0
        return inner - mass_bound * min(0.0, best_corr + self.alpha)


def solve_adcg(model: FourierMotionModel, data, params: AdcgParams) -> AtomicSolution:
    """
    ADCG on the penalized problem. data is the stacked measurement vector
    (or one vector per time, concatenated in time order).
    """
    f = np.concatenate([np.asarray(d, dtype=float) for d in data]) if isinstance(data, (list, tuple)) \
        else np.asarray(data, dtype=float)
    if f.shape != (model.size,):
        raise ValueError(f"data of length {f.shape} does not match the model size {model.size}")
    if not np.all(np.isfinite(f)):
        raise ValueError("measurement data must be finite")

    solver = _Adcg(model, f, params)
    d = model.dim
    X, V, w = np.zeros((0, d)), np.zeros((0, d)), np.zeros(0)
    value = solver.objective(X, V, w)
    trace = [value]
    reason = REASON_MAX_OUTER
    gap = math.inf
    iteration = 0

    for iteration in range(1, params.max_outer + 1):
        r = solver.residual(X, V, w)
        x_new, v_new, best_corr = solver.candidate(r)
        atom_corr = model.features(X, V) @ r if len(w) else np.zeros(0)
        gap = solver.gap(w, r, atom_corr, best_corr)
        if gap < params.min_gap:
            reason = REASON_GAP
            break
        if best_corr + params.alpha >= 0 and len(w):
            # no atom can decrease the objective; settle the current support
            reason = REASON_NO_DESCENT
            break

        nX = np.vstack([X, x_new])
        nV = np.vstack([V, v_new])
        nw = solver.refit_weights(nX, nV, np.append(w, 0.0))
        nX, nV, nw = solver.joint_descent(nX, nV, nw)
        keep = nw > 0
        nX, nV, nw = nX[keep], nV[keep], nw[keep]
        new_value = solver.objective(nX, nV, nw)

        if new_value > value + MONOTONE_SLACK:
            logger.debug(f"ADCG step {iteration} would increase the objective; keeping the previous iterate")
            reason = REASON_PROGRESS
            break
        progress = value - new_value
        X, V, w, value = nX, nV, nw, new_value
        trace.append(value)
        if progress < params.min_progress:
            reason = REASON_PROGRESS
            break

    logger.debug(f"ADCG finished after {iteration} iterations ({reason}), {len(w)} atoms, objective {value:.6e}")
    return AtomicSolution(
        positions=X, velocities=V, masses=w, objective=value, reason=reason,
        iterations=iteration, objective_trace=trace, gap=float(gap),
    )
