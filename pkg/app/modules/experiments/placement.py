"""
Direction and extra-time placement for the dimension-reduced method.
"""
from typing import List, Sequence
import math

from modules.geometry.index import Direction

# Gap lengths (in angle) closer than this count as equal
TIE_TOL = 1e-12


def place_directions(n: int) -> List[Direction]:
    """n directions exp(i pi (j/n - 1/2)), j = 0..n-1, on the right half circle"""
    if n < 1:
        raise ValueError(f"number of directions must be at least 1, got {n}")
    return [Direction.from_angle(math.pi * (j / n - 0.5)) for j in range(n)]


def place_extra_times(times: Sequence[float], n: int) -> List[float]:
    """
    n extra reconstruction times, chosen greedily in angle space.

    Time t corresponds to the direction (1, t)/sqrt(1 + t^2), i.e. the angle
    atan(t) in (-pi/2, pi/2). Each step splits the largest angular gap
    between already used angles (and the open ends) at its midpoint; among
    equal gaps the midpoint closest to 0 wins, the negative one first.
    """
    if n < 0:
        raise ValueError(f"number of extra times must be nonnegative, got {n}")
    angles = sorted(math.atan(t) for t in times)
    chosen = []
    for _ in range(n):
        bounds = [-math.pi / 2] + angles + [math.pi / 2]
        gaps = [(hi - lo, 0.5 * (lo + hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
        widest = max(g for g, _ in gaps)
        candidates = [mid for g, mid in gaps if g >= widest - TIE_TOL]
        mid = min(candidates, key=lambda m: (round(abs(m), 12), m))
        chosen.append(mid)
        angles = sorted(angles + [mid])
    return sorted(math.tan(a) for a in chosen)
