"""
Exact supports of the reconstruction variables and the grids built on them.

Phase space is restricted to particles that stay inside the unit cube
[0,1]^d at every measurement time. Because trajectories are straight lines
and the cube is convex, it is enough to check the two extreme times -T and
+T. All grids are affine images of a regular grid on the unit square (or
unit interval); cells are enumerated row-major over the reference square,
i.e. index = row * M + col with the column running along the first
reference axis. Every matrix assembled elsewhere uses that ordering.
"""
from dataclasses import dataclass, field
from typing import Sequence, Union
import logging
import math

import numpy as np

from shared.constants.defaults import DOMAIN_TOL

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    """Measurement times (symmetric around 0) plus extra reconstruction times"""
    measurement_times: tuple
    extra_times: tuple = ()

    def __post_init__(self):
        times = tuple(float(t) for t in self.measurement_times)
        extra = tuple(float(t) for t in self.extra_times)
        if not times:
            raise ValueError("measurement_times must not be empty")
        if list(times) != sorted(times):
            raise ValueError(f"measurement_times must be sorted, got {times}")
        if not math.isclose(times[0], -times[-1], abs_tol=1e-12):
            raise ValueError(f"measurement_times must be centred around 0, got {times}")
        if times[-1] <= 0:
            raise ValueError("measurement_times must span a positive half width")
        for t in extra:
            if any(math.isclose(t, s, abs_tol=1e-12) for s in times):
                raise ValueError(f"extra time {t} coincides with a measurement time")
        object.__setattr__(self, 'measurement_times', times)
        object.__setattr__(self, 'extra_times', extra)

    @property
    def half_width(self) -> float:
        return self.measurement_times[-1]

    @property
    def all_times(self) -> tuple:
        """The reconstruction times, sorted"""
        return tuple(sorted(self.measurement_times + self.extra_times))

    @classmethod
    def from_k(cls, k: int, extra_times: Sequence[float] = ()) -> "TimeGrid":
        """Times {j/K : j = -K..K}"""
        if k < 1:
            raise ValueError(f"K must be at least 1, got {k}")
        return cls(tuple(j / k for j in range(-k, k + 1)), tuple(extra_times))


@dataclass(frozen=True)
class Direction:
    """Unit vector in R^d"""
    vector: tuple

    def __post_init__(self):
        vec = tuple(float(c) for c in self.vector)
        norm = math.sqrt(sum(c * c for c in vec))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"direction must have unit norm, got norm {norm}")
        object.__setattr__(self, 'vector', vec)

    @classmethod
    def from_angle(cls, angle: float) -> "Direction":
        return cls((math.cos(angle), math.sin(angle)))

    @classmethod
    def normalized(cls, vector: Sequence[float]) -> "Direction":
        arr = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(arr)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(tuple(arr / norm))

    def as_array(self) -> np.ndarray:
        return np.array(self.vector)

    @property
    def dim(self) -> int:
        return len(self.vector)


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"interval lower bound {self.lower} exceeds upper bound {self.upper}")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, values, tol: float = DOMAIN_TOL):
        values = np.asarray(values, dtype=float)
        return (values >= self.lower - tol) & (values <= self.upper + tol)


@dataclass(frozen=True)
class Box:
    """Per-axis closed intervals"""
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(c) for c in self.lower)
        upper = tuple(float(c) for c in self.upper)
        if len(lower) != len(upper):
            raise ValueError("box bounds must have the same dimension")
        if any(lo > hi for lo, hi in zip(lower, upper)):
            raise ValueError(f"box lower bound {lower} exceeds upper bound {upper}")
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, points, tol: float = DOMAIN_TOL):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = (points >= np.array(self.lower) - tol) & (points <= np.array(self.upper) + tol)
        return inside.all(axis=1)


@dataclass(frozen=True)
class Parallelogram:
    """Four vertices in the order (s-,0), (s+,0), (mid,+h), (mid,-h)"""
    vertices: tuple

    def __post_init__(self):
        verts = tuple(tuple(float(c) for c in v) for v in self.vertices)
        if len(verts) != 4 or any(len(v) != 2 for v in verts):
            raise ValueError("a parallelogram needs four vertices in R^2")
        object.__setattr__(self, 'vertices', verts)

    def corners(self) -> np.ndarray:
        """Vertices in counter-clockwise cyclic order, starting at (s-,0)"""
        v = np.array(self.vertices)
        return np.array([v[0], v[3], v[1], v[2]])

    @property
    def area(self) -> float:
        return polygon_area(self.corners())

    def contains(self, points, tol: float = DOMAIN_TOL):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        corners = self.corners()
        inside = np.ones(len(points), dtype=bool)
        for k in range(4):
            a, b = corners[k], corners[(k + 1) % 4]
            edge = b - a
            cross = edge[0] * (points[:, 1] - a[1]) - edge[1] * (points[:, 0] - a[0])
            inside &= cross >= -tol * max(1.0, np.linalg.norm(edge))
        return inside


Domain = Union[Parallelogram, Box, Interval]


def polygon_area(corners) -> float:
    """Shoelace area of a simple polygon given in cyclic order"""
    pts = np.asarray(corners, dtype=float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Affine image z -> A z + b of an M^k regular grid on the unit cube"""
    matrix: np.ndarray
    offset: np.ndarray
    resolution: int
    domain: Domain = field(repr=False, default=None)

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        offset = np.atleast_1d(np.asarray(self.offset, dtype=float))
        if matrix.shape != (len(offset), len(offset)):
            raise ValueError(f"grid matrix shape {matrix.shape} does not match offset length {len(offset)}")
        if self.resolution < 1:
            raise ValueError(f"grid resolution must be at least 1, got {self.resolution}")
        matrix.setflags(write=False)
        offset.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)
        object.__setattr__(self, 'offset', offset)

    @property
    def dim(self) -> int:
        return len(self.offset)

    @property
    def num_cells(self) -> int:
        return self.resolution ** self.dim

    @property
    def cell_volume(self) -> float:
        return abs(float(np.linalg.det(self.matrix))) / self.num_cells

    @property
    def total_volume(self) -> float:
        return abs(float(np.linalg.det(self.matrix)))

    def _reference_centers(self) -> np.ndarray:
        m = self.resolution
        ticks = (np.arange(m) + 0.5) / m
        if self.dim == 1:
            return ticks[:, None]
        # row-major: the first reference axis varies fastest
        rows, cols = np.meshgrid(ticks, ticks, indexing='ij')
        return np.column_stack([cols.ravel(), rows.ravel()])

    def to_physical(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return z @ self.matrix.T + self.offset

    def to_reference(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.solve(self.matrix, (points - self.offset).T).T

    def cell_centers(self) -> np.ndarray:
        return self.to_physical(self._reference_centers())

    def breakpoints(self) -> np.ndarray:
        """Cell boundaries of a 1-D grid"""
        if self.dim != 1:
            raise ValueError("breakpoints are only defined for 1-D grids")
        return (np.arange(self.resolution + 1) / self.resolution) * self.matrix[0, 0] + self.offset[0]

    def cell_corners(self, index: int) -> np.ndarray:
        """Corners of one 2-D cell in counter-clockwise order (for positive orientation)"""
        if self.dim != 2:
            raise ValueError("cell corners are only defined for 2-D grids")
        m = self.resolution
        row, col = divmod(index, m)
        ref = np.array([
            [col, row],
            [col + 1, row],
            [col + 1, row + 1],
            [col, row + 1],
        ], dtype=float) / m
        return self.to_physical(ref)

    def locate(self, points, tol: float = DOMAIN_TOL) -> np.ndarray:
        """
        Cell index of each point; points on a shared boundary go to the lower index.

        Raises ValueError for points outside the grid domain.
        """
        z = self.to_reference(points)
        if np.any(z < -tol) or np.any(z > 1 + tol):
            bad = np.where((z < -tol).any(axis=1) | (z > 1 + tol).any(axis=1))[0]
            raise ValueError(f"{len(bad)} point(s) lie outside the grid domain, first at index {bad[0]}")
        m = self.resolution
        cells = np.clip(np.ceil(z * m - 1e-9).astype(int) - 1, 0, m - 1)
        if self.dim == 1:
            return cells[:, 0]
        return cells[:, 1] * m + cells[:, 0]


def phase_domain_contains(p, v, T: float, tol: float = 0.0):
    """
    True iff p + t v stays in [0,1]^d for all t in [-T, T].

    Checking t = -T and t = +T suffices by convexity. Accepts single
    vectors or stacks of shape (n, d).
    """
    if T <= 0:
        raise ValueError(f"half width T must be positive, got {T}")
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    lower, upper = p - T * v, p + T * v
    ok = (np.all((lower >= -tol) & (lower <= 1 + tol), axis=-1)
          & np.all((upper >= -tol) & (upper <= 1 + tol), axis=-1))
    if ok.ndim == 0:
        return bool(ok)
    return ok


def project_to_phase_domain(p, v, T: float):
    """
    Map (p, v) onto the phase domain by clipping the endpoint positions.

    Per coordinate the domain is the box 0 <= p +- T v <= 1, so clipping
    the endpoints a = p + T v, b = p - T v and mapping back lands inside it.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    a = np.clip(p + T * v, 0.0, 1.0)
    b = np.clip(p - T * v, 0.0, 1.0)
    return 0.5 * (a + b), (a - b) / (2.0 * T)


def _split_sums(theta: Direction):
    vec = theta.as_array()
    s_plus = float(vec[vec > 0].sum())
    s_minus = float(vec[vec < 0].sum())
    return s_plus, s_minus


def projected_phase_domain(theta: Direction, T: float) -> Parallelogram:
    """Image of the phase domain under (x, v) -> (theta.x, theta.v)"""
    if T <= 0:
        raise ValueError(f"half width T must be positive, got {T}")
    s_plus, s_minus = _split_sums(theta)
    mid = (s_plus + s_minus) / 2
    height = (s_plus - s_minus) / (2 * T)
    return Parallelogram((
        (s_minus, 0.0),
        (s_plus, 0.0),
        (mid, height),
        (mid, -height),
    ))


def snapshot_domain(t: float, T: float, d: int = 2) -> Box:
    """Positions reachable at time t from the phase domain"""
    if T <= 0:
        raise ValueError(f"half width T must be positive, got {T}")
    if abs(t) <= T:
        return Box((0.0,) * d, (1.0,) * d)
    r = abs(t) / (2 * T)
    return Box((0.5 - r,) * d, (0.5 + r,) * d)


def bin_interval(theta: Direction, t: float, T: float) -> Interval:
    """Range of theta.x + t theta.v over the phase domain, from the parallelogram vertices"""
    verts = np.array(projected_phase_domain(theta, T).vertices)
    images = verts[:, 0] + t * verts[:, 1]
    return Interval(float(images.min()), float(images.max()))


def make_grid(domain: Domain, M: int) -> GridSpec:
    """Regular M^k grid on a parallelogram, box or interval"""
    if M < 1:
        raise ValueError(f"grid resolution must be at least 1, got {M}")
    if isinstance(domain, Interval):
        matrix = np.array([[domain.length]])
        offset = np.array([domain.lower])
    elif isinstance(domain, Box):
        if domain.dim not in (1, 2):
            raise ValueError(f"grids are generated for 1-D and 2-D boxes only, got dimension {domain.dim}")
        matrix = np.diag(np.subtract(domain.upper, domain.lower))
        offset = np.array(domain.lower)
    elif isinstance(domain, Parallelogram):
        corners = domain.corners()
        matrix = np.column_stack([corners[1] - corners[0], corners[3] - corners[0]])
        offset = corners[0]
    else:
        raise ValueError(f"unsupported domain type {type(domain).__name__}")
    if abs(np.linalg.det(matrix)) <= 1e-14:
        raise ValueError(f"degenerate domain {domain}: zero area or length")
    return GridSpec(matrix=matrix, offset=offset, resolution=M, domain=domain)
