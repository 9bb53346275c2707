"""Incremental Bowyer-Watson Delaunay triangulation in the plane.

Orientation and in-circle tests run in floating point with a forward error
bound; results inside the bound are recomputed exactly with rationals.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..errors import DegenerateTriangulation

_EPS = np.finfo(float).eps / 2
_ORIENT_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_INCIRCLE_BOUND = (10.0 + 96.0 * _EPS) * _EPS
SUPER_SCALE = 1e4


def _orient_exact(a, b, c) -> int:
    ax, ay, bx, by, cx, cy = map(Fraction, (a[0], a[1], b[0], b[1], c[0], c[1]))
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (det > 0) - (det < 0)


def orient(a, b, c) -> int:
    """+1 if a, b, c turn counter-clockwise, -1 clockwise, 0 collinear."""
    l = (b[0] - a[0]) * (c[1] - a[1])
    r = (b[1] - a[1]) * (c[0] - a[0])
    det = l - r
    if abs(det) > _ORIENT_BOUND * (abs(l) + abs(r)):
        return 1 if det > 0 else -1
    return _orient_exact(a, b, c)


def _incircle_exact(a, b, c, d) -> int:
    ax, ay, bx, by, cx, cy, dx, dy = map(
        Fraction, (a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]))
    adx, ady, bdx, bdy, cdx, cdy = ax - dx, ay - dy, bx - dx, by - dy, cx - dx, cy - dy
    det = ((adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
           + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
           + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady))
    return (det > 0) - (det < 0)


def _incircle_terms(A, B, C, d):
    adx, ady = A[..., 0] - d[0], A[..., 1] - d[1]
    bdx, bdy = B[..., 0] - d[0], B[..., 1] - d[1]
    cdx, cdy = C[..., 0] - d[0], C[..., 1] - d[1]
    alift, blift, clift = adx * adx + ady * ady, bdx * bdx + bdy * bdy, cdx * cdx + cdy * cdy
    bc = bdx * cdy - cdx * bdy
    ca = cdx * ady - adx * cdy
    ab = adx * bdy - bdx * ady
    det = alift * bc + blift * ca + clift * ab
    perm = (alift * (np.abs(bdx * cdy) + np.abs(cdx * bdy))
            + blift * (np.abs(cdx * ady) + np.abs(adx * cdy))
            + clift * (np.abs(adx * bdy) + np.abs(bdx * ady)))
    return det, perm


def incircle(a, b, c, d) -> int:
    """For counter-clockwise a, b, c: +1 if d lies strictly inside their circumcircle."""
    A, B, C = (np.asarray(p, dtype=float) for p in (a, b, c))
    det, perm = _incircle_terms(A, B, C, np.asarray(d, dtype=float))
    if abs(det) > _INCIRCLE_BOUND * perm:
        return 1 if det > 0 else -1
    return _incircle_exact(a, b, c, d)


def _incircle_many(pts: np.ndarray, tris: np.ndarray, d) -> np.ndarray:
    det, perm = _incircle_terms(pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]], d)
    sign = np.sign(det).astype(int)
    unsure = np.flatnonzero(np.abs(det) <= _INCIRCLE_BOUND * perm)
    for i in unsure:
        a, b, c = tris[i]
        sign[i] = _incircle_exact(pts[a], pts[b], pts[c], d)
    return sign


def _check_points(points: np.ndarray) -> None:
    if points.ndim != 2 or points.shape[1] != 2 or len(points) < 3:
        raise DegenerateTriangulation("need at least three 2-D points")
    if not np.all(np.isfinite(points)):
        raise DegenerateTriangulation("non-finite coordinates")
    if len(np.unique(points, axis=0)) != len(points):
        raise DegenerateTriangulation("duplicate points")
    a, b = points[0], points[1]
    if all(orient(a, b, c) == 0 for c in points[2:]):
        raise DegenerateTriangulation("all points are collinear")


def delaunay_triangles(points) -> np.ndarray:
    """Delaunay triangles of a planar point set as counter-clockwise index triples."""
    pts = np.asarray(points, dtype=float)
    _check_points(pts)
    n = len(pts)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = (lo + hi) / 2
    m = SUPER_SCALE * max(float(np.max(hi - lo)), 1.0)
    sup = np.array([
        [center[0] - 2 * m, center[1] - m],
        [center[0] + 2 * m, center[1] - m],
        [center[0], center[1] + 2 * m],
    ])
    allpts = np.vstack([pts, sup])
    tris = np.array([[n, n + 1, n + 2]], dtype=np.int64)
    for i in range(n):
        p = allpts[i]
        bad = _incircle_many(allpts, tris, p) > 0
        cavity = tris[bad]
        count: dict[tuple[int, int], int] = {}
        directed = []
        for a, b, c in cavity:
            for u, v in ((a, b), (b, c), (c, a)):
                key = (min(u, v), max(u, v))
                count[key] = count.get(key, 0) + 1
                directed.append((u, v))
        boundary = [(u, v) for u, v in directed if count[(min(u, v), max(u, v))] == 1]
        new = np.array([(u, v, i) for u, v in boundary], dtype=np.int64)
        tris = np.vstack([tris[~bad], new])
    keep = np.all(tris < n, axis=1)
    return tris[keep]


def circumcenters(points, triangles) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    A, B, C = P[triangles[:, 0]], P[triangles[:, 1]], P[triangles[:, 2]]
    d = 2 * (A[:, 0] * (B[:, 1] - C[:, 1]) + B[:, 0] * (C[:, 1] - A[:, 1]) + C[:, 0] * (A[:, 1] - B[:, 1]))
    a2, b2, c2 = (A ** 2).sum(1), (B ** 2).sum(1), (C ** 2).sum(1)
    ux = (a2 * (B[:, 1] - C[:, 1]) + b2 * (C[:, 1] - A[:, 1]) + c2 * (A[:, 1] - B[:, 1])) / d
    uy = (a2 * (C[:, 0] - B[:, 0]) + b2 * (A[:, 0] - C[:, 0]) + c2 * (B[:, 0] - A[:, 0])) / d
    return np.column_stack([ux, uy])


def violates_empty_circle(points, triangles) -> list[tuple[int, int]]:
    """(triangle row, point) pairs where a point lies strictly inside a circumcircle."""
    P = np.asarray(points, dtype=float)
    bad = []
    for t, (a, b, c) in enumerate(np.asarray(triangles)):
        if orient(P[a], P[b], P[c]) < 0:
            b, c = c, b
        for j in range(len(P)):
            if j in (a, b, c):
                continue
            if incircle(P[a], P[b], P[c], P[j]) > 0:
                bad.append((t, j))
    return bad
