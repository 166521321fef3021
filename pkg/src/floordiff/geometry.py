"""Planar predicates on integer/float polygons used by validation and evaluation."""
from __future__ import annotations

import math
from typing import Sequence

Point = tuple[float, float]


def orient(a: Point, b: Point, c: Point) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a: Point, b: Point, p: Point) -> bool:
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """Closed-segment intersection test (touching counts)."""
    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 \
            and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(q1, q2, p1):
        return True
    if d2 == 0 and _on_segment(q1, q2, p2):
        return True
    if d3 == 0 and _on_segment(p1, p2, q1):
        return True
    if d4 == 0 and _on_segment(p1, p2, q2):
        return True
    return False


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    denom = dx * dx + dy * dy
    if denom == 0:
        return math.hypot(p[0] - ax, p[1] - ay)
    u = max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / denom))
    return math.hypot(p[0] - (ax + u * dx), p[1] - (ay + u * dy))


def segment_distance(p1: Point, p2: Point, q1: Point, q2: Point) -> float:
    if segments_intersect(p1, p2, q1, q2):
        return 0.0
    return min(point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2),
               point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2))


def edges(poly: Sequence[Point]):
    n = len(poly)
    for k in range(n):
        yield poly[k], poly[(k + 1) % n]


def point_in_polygon(p: Point, poly: Sequence[Point]) -> bool:
    """Even-odd rule; points exactly on the boundary may go either way."""
    x, y = p
    inside = False
    for (x1, y1), (x2, y2) in edges(poly):
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def polygon_distance(a: Sequence[Point], b: Sequence[Point]) -> float:
    """Distance between two closed polygonal regions (0 if they overlap or touch)."""
    if a and b and (point_in_polygon(a[0], b) or point_in_polygon(b[0], a)):
        return 0.0
    best = math.inf
    for p1, p2 in edges(a):
        for q1, q2 in edges(b):
            best = min(best, segment_distance(p1, p2, q1, q2))
            if best == 0.0:
                return 0.0
    return best


def signed_area(poly: Sequence[Point]) -> float:
    return 0.5 * sum(x1 * y2 - x2 * y1 for (x1, y1), (x2, y2) in edges(poly))


def is_self_intersecting(poly: Sequence[Point]) -> bool:
    """True if two non-adjacent edges of the closed loop touch or cross,
    or two adjacent edges fold back onto each other."""
    n = len(poly)
    if n < 3:
        return False
    segs = list(edges(poly))
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            a1, a2 = segs[i]
            b1, b2 = segs[j]
            if adjacent:
                # shared vertex; only a collinear overlap counts
                shared = a2 if j == i + 1 else a1
                other_a = a1 if j == i + 1 else a2
                other_b = b2 if j == i + 1 else b1
                if orient(shared, other_a, other_b) == 0:
                    va = (other_a[0] - shared[0], other_a[1] - shared[1])
                    vb = (other_b[0] - shared[0], other_b[1] - shared[1])
                    if va[0] * vb[0] + va[1] * vb[1] > 0:
                        return True
                continue
            if segments_intersect(a1, a2, b1, b2):
                return True
    return False
