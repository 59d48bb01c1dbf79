"""
Random particle configurations with a controlled dynamic separation
distribution, and their (noisy) Fourier measurements.
"""
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence
import logging
import math

import numpy as np

from modules.datagen.config import (
    BALANCE_SLACK, BUDGET_FACTOR, FAR_PAIR_SEPARATION, MASS_MAX, MASS_MIN, N_MAX, N_MIN, SEPARATION_BINS,
    SEPARATION_MAX,
)
from modules.discretize.index import fourier_frequencies
from modules.geometry.index import phase_domain_contains
from modules.measures.index import ParticleConfig, dynamic_separation, move, observe
from shared.constants.defaults import SPACE_DIM

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetSpec:
    count: int
    times: tuple
    n_min: int = N_MIN
    n_max: int = N_MAX
    mass_min: float = MASS_MIN
    mass_max: float = MASS_MAX
    sep_max: float = SEPARATION_MAX
    bins: int = SEPARATION_BINS
    seed: int = 0
    balance: bool = True
    separation_floor: Optional[float] = None
    dim: int = SPACE_DIM

    def __post_init__(self):
        object.__setattr__(self, 'times', tuple(float(t) for t in self.times))
        if self.count < 1:
            raise ValueError(f"dataset count must be at least 1, got {self.count}")
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError(f"invalid particle count range [{self.n_min}, {self.n_max}]")
        if not 0 < self.mass_min <= self.mass_max:
            raise ValueError(f"invalid mass range [{self.mass_min}, {self.mass_max}]")
        if not self.times:
            raise ValueError("dataset times must not be empty")
        if self.balance and (self.sep_max <= 0 or self.bins < 1):
            raise ValueError(f"invalid separation target: max {self.sep_max}, {self.bins} bins")
        if self.balance and self.n_min < 2:
            raise ValueError("separation balancing needs at least two particles per configuration")

    @property
    def half_width(self) -> float:
        return max(abs(t) for t in self.times)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["times"] = list(self.times)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSpec":
        return cls(**{**data, "times": tuple(data["times"])})


def far_pair_spec(count: int, times: Sequence[float], seed: int = 0) -> DatasetSpec:
    """Two particles that stay well apart at every measurement time"""
    return DatasetSpec(count=count, times=tuple(times), n_min=2, n_max=2, seed=seed, balance=False,
                       separation_floor=FAR_PAIR_SEPARATION)


def single_particle_spec(count: int, times: Sequence[float], seed: int = 0) -> DatasetSpec:
    return DatasetSpec(count=count, times=tuple(times), n_min=1, n_max=1, seed=seed, balance=False)


def _sample_phase_points(n: int, dim: int, T: float, rng: np.random.Generator):
    """n points uniform on the phase domain, by rejection from its bounding box"""
    positions = np.zeros((0, dim))
    velocities = np.zeros((0, dim))
    vmax = 1.0 / (2.0 * T)
    while len(positions) < n:
        # a quarter of the box is accepted in 2-D
        batch = max(8, 4 ** dim * (n - len(positions)))
        p = rng.uniform(0.0, 1.0, size=(batch, dim))
        v = rng.uniform(-vmax, vmax, size=(batch, dim))
        ok = phase_domain_contains(p, v, T)
        positions = np.vstack([positions, p[ok]])
        velocities = np.vstack([velocities, v[ok]])
    return positions[:n], velocities[:n]


def sample_config(spec: DatasetSpec, rng: np.random.Generator) -> ParticleConfig:
    n = int(rng.integers(spec.n_min, spec.n_max + 1))
    positions, velocities = _sample_phase_points(n, spec.dim, spec.half_width, rng)
    masses = rng.uniform(spec.mass_min, spec.mass_max, size=n)
    return ParticleConfig(positions, velocities, masses)


def rejection_sample_dataset(spec: DatasetSpec, rng: Optional[np.random.Generator] = None) -> List[ParticleConfig]:
    """
    Draw spec.count configurations.

    With balancing, a histogram of accepted separations over spec.bins bins
    on [0, sep_max] is kept; a candidate falling in bin b is accepted only
    while count_b <= min count + BALANCE_SLACK, so no two bins ever differ by
    more than BALANCE_SLACK + 1. Candidates above sep_max are rejected.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    budget = BUDGET_FACTOR * spec.count
    counts = np.zeros(spec.bins, dtype=int)
    width = spec.sep_max / spec.bins
    accepted: List[ParticleConfig] = []
    attempts = 0
    while len(accepted) < spec.count:
        attempts += 1
        if attempts > budget:
            raise RuntimeError(
                f"rejection sampling exhausted its budget of {budget} candidates "
                f"with {len(accepted)}/{spec.count} configurations accepted"
            )
        candidate = sample_config(spec, rng)
        separation = dynamic_separation(candidate, spec.times)
        if spec.separation_floor is not None and separation <= spec.separation_floor:
            continue
        if spec.balance:
            if separation > spec.sep_max:
                continue
            b = min(int(separation / width), spec.bins - 1)
            if counts[b] > counts.min() + BALANCE_SLACK:
                continue
            counts[b] += 1
        accepted.append(candidate)
    logger.info(f"Sampled {spec.count} configurations from {attempts} candidates")
    return accepted


def measure(config: ParticleConfig, times: Sequence[float], cutoff: int) -> List[np.ndarray]:
    """Exact truncated Fourier data of every snapshot, from the analytic operator"""
    frequencies = fourier_frequencies(cutoff, config.dim)
    return [observe(move(config, t), frequencies) for t in times]


def add_noise(data: Sequence[np.ndarray], delta: float, rng: np.random.Generator) -> List[np.ndarray]:
    """
    I.i.d. Gaussian noise per real coordinate with std sqrt(2 delta / D),
    D the total stacked length, so that E[1/2 sum |f_delta - f|^2] = delta.
    """
    if delta < 0:
        raise ValueError(f"noise level must be nonnegative, got {delta}")
    if delta == 0:
        return [np.array(f, dtype=float) for f in data]
    total = sum(len(f) for f in data)
    std = math.sqrt(2.0 * delta / total)
    return [np.asarray(f, dtype=float) + rng.normal(0.0, std, size=len(f)) for f in data]


def thin_dataset(configs: Sequence, keep: int) -> list:
    """Keep `keep` items spread uniformly over the index range"""
    if keep <= 0:
        return []
    if keep >= len(configs):
        return list(configs)
    indices = np.unique(np.round(np.linspace(0, len(configs) - 1, keep)).astype(int))
    return [configs[i] for i in indices]
