"""
Matrices of the discretized problem.

Projection matrices distribute every cell of a 2-D grid over 1-D bins by
the exact area of the cell inside each bin's strip; observation matrices
evaluate the truncated Fourier transform at cell centres. Columns follow
the row-major cell order of GridSpec.
"""
from dataclasses import dataclass
from typing import Optional
import itertools
import logging
import math

import numpy as np

from modules.discretize.clipping import strip_area
from modules.geometry.index import Direction, GridSpec, Interval
from modules.measures.index import DiscreteMeasure

logger = logging.getLogger(__name__)

# Relative slack allowed when checking that bins cover an image interval
COVERAGE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """Bins x cells matrix; column j holds the fraction of cell j falling in each bin"""
    values: np.ndarray
    grid: GridSpec
    bins: GridSpec
    tag: str = ""

    @property
    def shape(self):
        return self.values.shape

    def apply(self, weights: np.ndarray) -> np.ndarray:
        return self.values @ weights

    def adjoint(self, values: np.ndarray) -> np.ndarray:
        return self.values.T @ values


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    """Stacked (Re, Im) Fourier features of the cell centres"""
    values: np.ndarray
    frequencies: np.ndarray
    grid: GridSpec
    tag: str = ""

    @property
    def shape(self):
        return self.values.shape

    def apply(self, weights: np.ndarray) -> np.ndarray:
        return self.values @ weights

    def adjoint(self, values: np.ndarray) -> np.ndarray:
        return self.values.T @ values


def fourier_frequencies(cutoff: int, dim: int = 2) -> np.ndarray:
    """All integer xi in Z^dim with max-norm <= cutoff, in lexicographic order"""
    if cutoff < 0:
        raise ValueError(f"frequency cutoff must be nonnegative, got {cutoff}")
    ticks = range(-cutoff, cutoff + 1)
    return np.array(list(itertools.product(ticks, repeat=dim)), dtype=float)


def _all_cell_corners(grid: GridSpec) -> np.ndarray:
    """Corners of every cell, shape (cells, 4, 2), cyclic order"""
    m = grid.resolution
    rows, cols = np.divmod(np.arange(grid.num_cells), m)
    ref = np.stack([
        np.column_stack([cols, rows]),
        np.column_stack([cols + 1, rows]),
        np.column_stack([cols + 1, rows + 1]),
        np.column_stack([cols, rows + 1]),
    ], axis=1).astype(float) / m
    return ref @ grid.matrix.T + grid.offset


def image_interval(grid: GridSpec, direction: np.ndarray) -> Interval:
    """Range of direction.x over the grid's domain"""
    corners = grid.to_physical(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float))
    values = corners @ direction
    return Interval(float(values.min()), float(values.max()))


def _check_coverage(image: Interval, breaks: np.ndarray) -> None:
    slack = COVERAGE_TOL * max(1.0, abs(image.lower), abs(image.upper))
    if breaks[0] > image.lower + slack or breaks[-1] < image.upper - slack:
        raise ValueError(
            f"bins [{breaks[0]}, {breaks[-1]}] do not cover the image interval "
            f"[{image.lower}, {image.upper}]"
        )


def assemble_radon_matrix(grid: GridSpec, theta: Direction, bins: GridSpec, tag: str = "") -> ProjectionMatrix:
    """
    Entry (i, j) = area(cell_j within bin strip i) / area(cell_j).

    Every cell is clipped against the two half-planes bounding each bin it
    overlaps; bins holding a whole cell get 1 without clipping.
    """
    if grid.dim != 2 or bins.dim != 1:
        raise ValueError(f"expected a 2-D grid and 1-D bins, got dimensions {grid.dim} and {bins.dim}")
    direction = theta.as_array()
    breaks = bins.breakpoints()
    _check_coverage(image_interval(grid, direction), breaks)

    corners = _all_cell_corners(grid)
    projections = corners @ direction
    lows = projections.min(axis=1)
    highs = projections.max(axis=1)
    first = np.clip(np.searchsorted(breaks, lows, side='right') - 1, 0, bins.resolution - 1)
    last = np.clip(np.searchsorted(breaks, highs, side='left') - 1, 0, bins.resolution - 1)
    cell_area = grid.cell_volume

    values = np.zeros((bins.resolution, grid.num_cells))
    for j in range(grid.num_cells):
        if first[j] == last[j]:
            values[first[j], j] = 1.0
            continue
        for i in range(first[j], last[j] + 1):
            values[i, j] = strip_area(corners[j], direction, breaks[i], breaks[i + 1]) / cell_area
    return ProjectionMatrix(values=values, grid=grid, bins=bins, tag=tag)


def assemble_move_matrix(grid: GridSpec, t: float, bins: GridSpec, tag: str = "") -> ProjectionMatrix:
    """
    Move matrix for (y, w) -> y + t w on a position-velocity grid.

    y + t w = sqrt(1 + t^2) * theta(t).(y, w) with theta(t) = (1, t) / sqrt(1 + t^2),
    so this is the Radon matrix along theta(t) against bins shrunk by sqrt(1 + t^2).
    """
    if bins.dim != 1:
        raise ValueError(f"expected 1-D bins, got dimension {bins.dim}")
    scale = math.sqrt(1.0 + t * t)
    direction = Direction.normalized((1.0, t))
    lower, upper = bins.offset[0], bins.offset[0] + bins.matrix[0, 0]
    scaled_bins = GridSpec(
        matrix=bins.matrix / scale,
        offset=bins.offset / scale,
        resolution=bins.resolution,
        domain=Interval(min(lower, upper) / scale, max(lower, upper) / scale),
    )
    matrix = assemble_radon_matrix(grid, direction, scaled_bins, tag=tag)
    return ProjectionMatrix(values=matrix.values, grid=grid, bins=bins, tag=tag)


def assemble_fourier_matrix(grid: GridSpec, cutoff: int, t_tag: Optional[float] = None) -> ObservationMatrix:
    """Column j = stacked (Re, Im) of exp(-i 2 pi c_j.xi) over all |xi|_inf <= cutoff"""
    frequencies = fourier_frequencies(cutoff, grid.dim)
    centers = grid.cell_centers()
    phases = 2 * np.pi * (frequencies @ centers.T)
    values = np.vstack([np.cos(phases), -np.sin(phases)])
    tag = "" if t_tag is None else f"t={t_tag:g}"
    return ObservationMatrix(values=values, frequencies=frequencies, grid=grid, tag=tag)


def rasterize(nu: DiscreteMeasure, grid: GridSpec) -> np.ndarray:
    """Weight vector with every atom's mass in the cell containing it"""
    if len(nu) == 0:
        return np.zeros(grid.num_cells)
    if nu.dim != grid.dim:
        raise ValueError(f"measure dimension {nu.dim} does not match grid dimension {grid.dim}")
    cells = grid.locate(nu.points)
    return np.bincount(cells, weights=nu.weights, minlength=grid.num_cells).astype(float)


def binned_transport_residual(a: np.ndarray, b: np.ndarray, bins: GridSpec) -> float:
    """Wasserstein-1 distance between two measures on the same 1-D bins (cumulative-sum form)"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape != (bins.resolution,):
        raise ValueError(f"binned vectors of shape {a.shape} and {b.shape} do not match {bins.resolution} bins")
    width = abs(float(bins.matrix[0, 0])) / bins.resolution
    return float(np.abs(np.cumsum(a - b)).sum() * width)
