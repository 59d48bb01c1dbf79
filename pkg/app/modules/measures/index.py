"""
Finitely supported nonnegative measures and the exact operators acting on them.

These are the analytic counterparts of the discretized matrices and are
used to synthesize ground-truth data and to test the discretization.
"""
from dataclasses import dataclass
from typing import Callable, Sequence
import json
import logging
import math

import numpy as np

from modules.geometry.index import Direction
from shared.constants.defaults import MERGE_TOL

logger = logging.getLogger(__name__)


def merge_atoms(points: np.ndarray, weights: np.ndarray, tol: float = MERGE_TOL):
    """Merge atoms whose coordinates agree within tol; weights are summed"""
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if len(points) <= 1:
        return points.copy(), weights.copy()
    # sort by first coordinate so merge candidates sit just behind each point
    order = np.lexsort(points.T[::-1])
    points, weights = points[order], weights[order]
    merged_points = [points[0]]
    merged_weights = [weights[0]]
    for p, w in zip(points[1:], weights[1:]):
        target = None
        k = len(merged_points) - 1
        while k >= 0 and merged_points[k][0] >= p[0] - tol:
            if np.all(np.abs(merged_points[k] - p) <= tol):
                target = k
                break
            k -= 1
        if target is None:
            merged_points.append(p)
            merged_weights.append(w)
        else:
            merged_weights[target] += w
    return np.array(merged_points), np.array(merged_weights)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point list in R^k"""
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(len(weights), -1) if len(weights) else points.reshape(0, 1)
        if len(points) != len(weights):
            raise ValueError(f"measure has {len(points)} points but {len(weights)} weights")
        if np.any(weights < 0):
            raise ValueError("measure weights must be nonnegative")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights))):
            raise ValueError("measure points and weights must be finite")
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'weights', weights)

    @classmethod
    def empty(cls, dim: int) -> "DiscreteMeasure":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.weights)

    def merged(self, tol: float = MERGE_TOL) -> "DiscreteMeasure":
        points, weights = merge_atoms(self.points, self.weights, tol)
        return DiscreteMeasure(points.reshape(-1, self.dim), weights)


@dataclass(frozen=True, eq=False)
class ParticleConfig:
    """Particles with positions, velocities and positive masses"""
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        positions = np.asarray(self.positions, dtype=float)
        velocities = np.asarray(self.velocities, dtype=float)
        if len(masses) == 0:
            dim = positions.shape[-1] if positions.ndim == 2 else 2
            positions = positions.reshape(0, dim)
            velocities = velocities.reshape(0, dim)
        positions = np.atleast_2d(positions)
        velocities = np.atleast_2d(velocities)
        if positions.shape != velocities.shape or len(masses) != len(positions):
            raise ValueError(
                f"inconsistent particle arrays: positions {positions.shape}, "
                f"velocities {velocities.shape}, masses {masses.shape}"
            )
        if np.any(masses <= 0):
            raise ValueError("particle masses must be positive")
        phase = np.hstack([positions, velocities])
        if len(phase) > 1 and len(np.unique(phase, axis=0)) != len(phase):
            raise ValueError("particles must have pairwise distinct (position, velocity)")
        object.__setattr__(self, 'positions', positions)
        object.__setattr__(self, 'velocities', velocities)
        object.__setattr__(self, 'masses', masses)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return len(self.masses)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def phase_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(np.hstack([self.positions, self.velocities]), self.masses)

    def to_dict(self) -> dict:
        """Field order: positions, velocities, masses"""
        return {
            "positions": self.positions.tolist(),
            "velocities": self.velocities.tolist(),
            "masses": self.masses.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ParticleConfig":
        return cls(
            np.array(data["positions"], dtype=float),
            np.array(data["velocities"], dtype=float),
            np.array(data["masses"], dtype=float),
        )

    @classmethod
    def from_json(cls, text: str) -> "ParticleConfig":
        return cls.from_dict(json.loads(text))


def pushforward(nu: DiscreteMeasure, fn: Callable[[np.ndarray], np.ndarray], merge: bool = True) -> DiscreteMeasure:
    """Pushforward of nu under a map acting row-wise on its points"""
    points = np.asarray(fn(nu.points), dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    result = DiscreteMeasure(points, nu.weights.copy())
    return result.merged() if merge else result


def radon_project(nu: DiscreteMeasure, theta: Direction) -> DiscreteMeasure:
    if nu.dim != theta.dim:
        raise ValueError(f"measure dimension {nu.dim} does not match direction dimension {theta.dim}")
    vec = theta.as_array()
    return pushforward(nu, lambda x: x @ vec)


def joint_radon(lam: ParticleConfig, theta: Direction) -> DiscreteMeasure:
    if lam.dim != theta.dim:
        raise ValueError(f"configuration dimension {lam.dim} does not match direction dimension {theta.dim}")
    vec = theta.as_array()
    points = np.column_stack([lam.positions @ vec, lam.velocities @ vec])
    return DiscreteMeasure(points, lam.masses.copy()).merged()


def move(lam: ParticleConfig, t: float) -> DiscreteMeasure:
    """Snapshot at time t: pushforward under (x, v) -> x + t v"""
    return DiscreteMeasure(lam.positions + t * lam.velocities, lam.masses.copy()).merged()


def move1d(gamma: DiscreteMeasure, t: float) -> DiscreteMeasure:
    """Move operator on position-velocity projections: (y, w) -> y + t w"""
    if gamma.dim != 2:
        raise ValueError(f"move1d expects a measure on R^2, got dimension {gamma.dim}")
    return pushforward(gamma, lambda z: z[:, 0] + t * z[:, 1])


def rescale(nu: DiscreteMeasure, factor: float) -> DiscreteMeasure:
    return pushforward(nu, lambda x: factor * x)


def fourier(nu: DiscreteMeasure, xi) -> complex | np.ndarray:
    """
    Sum of m_i exp(-i x_i . xi).

    A single frequency gives a complex number, a stack of shape (n, k) gives
    an array of n values.
    """
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim <= 1
    xi = np.atleast_2d(xi)
    if xi.shape[1] != nu.dim:
        raise ValueError(f"frequency dimension {xi.shape[1]} does not match measure dimension {nu.dim}")
    phases = nu.points @ xi.T
    values = nu.weights @ np.exp(-1j * phases)
    return complex(values[0]) if single else values


def observe(nu: DiscreteMeasure, frequencies: np.ndarray) -> np.ndarray:
    """Truncated Fourier observation, stacked as (Re, Im) over integer frequencies"""
    values = fourier(nu, 2 * np.pi * np.atleast_2d(frequencies))
    values = np.atleast_1d(values)
    return np.concatenate([values.real, values.imag])


def dynamic_separation(S: ParticleConfig, times: Sequence[float]) -> float:
    """Minimal pairwise distance over all given times (inf for fewer than two particles)"""
    if len(S) < 2:
        logger.debug("dynamic separation of a single particle is infinite")
        return math.inf
    best = math.inf
    iu = np.triu_indices(len(S), k=1)
    for t in times:
        pos = S.positions + t * S.velocities
        diffs = pos[:, None, :] - pos[None, :, :]
        dists = np.linalg.norm(diffs, axis=-1)[iu]
        best = min(best, float(dists.min()))
    return best
