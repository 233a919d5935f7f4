"""Geographic primitives: great-circle distance and polygon containment.

Coordinates are (lat, lon) in degrees throughout. Polygon operations treat
the coordinates as planar, which is fine for the few-km zones this package
deals with.
"""

from __future__ import annotations

import math

EARTH_RADIUS_M = 6_371_000.0

# Tolerance for the collinearity test in the on-segment check. Zone
# coordinates are O(100) degrees, so this is far below representable noise.
_EDGE_EPS = 1e-12

Point = tuple[float, float]


def haversine_m(a: Point, b: Point) -> float:
    """Great-circle distance in meters between two (lat, lon) points."""
    lat1, lon1 = a
    lat2, lon2 = b
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _on_segment(p: Point, a: Point, b: Point) -> bool:
    py, px = p[0], p[1]
    ay, ax = a[0], a[1]
    by, bx = b[0], b[1]
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if abs(cross) > _EDGE_EPS:
        return False
    return min(ax, bx) - _EDGE_EPS <= px <= max(ax, bx) + _EDGE_EPS and (
        min(ay, by) - _EDGE_EPS <= py <= max(ay, by) + _EDGE_EPS
    )


def point_in_polygon(point: Point, polygon: list[Point]) -> bool:
    """Boundary-inclusive even-odd containment test.

    Points exactly on an edge or vertex count as inside.
    """
    if len(polygon) < 3:
        return False
    py, px = point[0], point[1]
    n = len(polygon)
    for k in range(n):
        if _on_segment(point, polygon[k], polygon[(k + 1) % n]):
            return True
    inside = False
    for k in range(n):
        ay, ax = polygon[k]
        by, bx = polygon[(k + 1) % n]
        if (ay > py) != (by > py):
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < x_cross:
                inside = not inside
    return inside


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b[1] - a[1]) * (c[0] - a[0]) - (b[0] - a[0]) * (c[1] - a[1])


def _segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool:
    d1 = _orient(a, b, c)
    d2 = _orient(a, b, d)
    d3 = _orient(c, d, a)
    d4 = _orient(c, d, b)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    # Collinear overlap also counts as a crossing for simplicity checks.
    for p, (u, v) in ((c, (a, b)), (d, (a, b)), (a, (c, d)), (b, (c, d))):
        if _on_segment(p, u, v) and p != u and p != v:
            return True
    return False


def polygon_is_simple(polygon: list[Point]) -> bool:
    """True when no two non-adjacent edges intersect (O(n^2) check)."""
    n = len(polygon)
    if n < 3:
        return False
    edges = [(polygon[k], polygon[(k + 1) % n]) for k in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # adjacent edges share a vertex by construction
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True
