"""
Sutherland-Hodgman clipping of convex polygons against half-planes.
"""
import numpy as np

from modules.geometry.index import polygon_area


def clip_halfplane(polygon: np.ndarray, normal: np.ndarray, offset: float, keep_below: bool = True) -> np.ndarray:
    """
    Clip a convex polygon to {p : normal.p <= offset} (or >= when keep_below is False).

    Vertices are given in cyclic order; the result keeps that order and may be empty.
    """
    if len(polygon) == 0:
        return polygon
    sign = 1.0 if keep_below else -1.0
    # signed distance, inside when <= 0
    dist = sign * (polygon @ normal - offset)
    if np.all(dist <= 0):
        return polygon
    if np.all(dist >= 0):
        return polygon[:0]
    output = []
    for k in range(len(polygon)):
        s, e = polygon[k - 1], polygon[k]
        ds, de = dist[k - 1], dist[k]
        if de <= 0:
            if ds > 0:
                output.append(s + (e - s) * (ds / (ds - de)))
            output.append(e)
        elif ds <= 0:
            output.append(s + (e - s) * (ds / (ds - de)))
    return np.array(output).reshape(-1, 2)


def strip_area(polygon: np.ndarray, direction: np.ndarray, lower: float, upper: float) -> float:
    """Area of polygon intersected with the strip lower <= direction.p <= upper"""
    clipped = clip_halfplane(polygon, direction, upper, keep_below=True)
    clipped = clip_halfplane(clipped, direction, lower, keep_below=False)
    return polygon_area(clipped)
