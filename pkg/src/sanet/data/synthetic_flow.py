"""Two-hole trajectory classification data on a punched Delaunay complex."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path

from ..complex import SimplicialComplex, build_complex
from ..errors import ConfigError, DisconnectedAfterHolePunch
from .delaunay import circumcenters, delaunay_triangles
from .io import TrajectoryInstance

TOP_LEFT = np.array([0.0, 1.0])
BOTTOM_RIGHT = np.array([1.0, 0.0])
DEFAULT_HOLES = ((0.3, 0.3), (0.7, 0.7))
MAX_ATTEMPTS = 100


@dataclass
class SyntheticFlowDataset:
    complex: SimplicialComplex
    points: np.ndarray
    train: list[TrajectoryInstance]
    test: list[TrajectoryInstance]
    params: dict = field(default_factory=dict)


def validate_holes(hole_centers, hole_radius: float) -> None:
    centers = np.asarray(hole_centers, dtype=float)
    if centers.shape != (2, 2):
        raise ConfigError("exactly two hole centres (x, y) are required")
    if hole_radius <= 0:
        raise ConfigError("hole radius must be positive")
    for c in centers:
        if np.any(c - hole_radius <= 0) or np.any(c + hole_radius >= 1):
            raise ConfigError(f"hole at {c.tolist()} with radius {hole_radius} leaves the unit square")
    if np.linalg.norm(centers[0] - centers[1]) <= 2 * hole_radius:
        raise ConfigError("holes overlap")


def punch_holes(points: np.ndarray, triangles: np.ndarray, centers, radius: float):
    """Drop vertices inside the disks and triangles whose circumcentre falls inside.

    Only edges and vertices that still bound a triangle survive; the rest
    would be orphans. Returns (kept points, triangles over the new labels).
    """
    centers = np.asarray(centers, dtype=float)

    def in_holes(xy):
        d = np.linalg.norm(xy[:, None, :] - centers[None, :, :], axis=2)
        return np.any(d < radius, axis=1)

    dead_vertex = in_holes(points)
    cc = circumcenters(points, triangles)
    keep = ~in_holes(cc) & ~np.any(dead_vertex[triangles], axis=1)
    tris = triangles[keep]
    used = np.unique(tris)
    relabel = -np.ones(len(points), dtype=np.int64)
    relabel[used] = np.arange(len(used))
    return points[used], relabel[tris]


def _adjacency(X: SimplicialComplex) -> sp.csr_matrix:
    B1 = abs(X.incidence(1))
    A = (B1 @ B1.T).tocsr()
    A.setdiag(0)
    A.eliminate_zeros()
    return A


def _path_signal(X: SimplicialComplex, path: list[int]) -> np.ndarray:
    x = np.zeros(X.n(1))
    for u, v in zip(path, path[1:]):
        x[X.index((u, v))] = 1.0 if u < v else -1.0
    return x


def _loop_erase(walk: list[int]) -> list[int]:
    out: list[int] = []
    pos: dict[int, int] = {}
    for v in walk:
        if v in pos:
            cut = pos[v]
            for w in out[cut + 1:]:
                del pos[w]
            out = out[:cut + 1]
        else:
            pos[v] = len(out)
            out.append(v)
    return out


def _trace(pred: np.ndarray, src_row: int, target: int) -> list[int]:
    path = [target]
    while pred[src_row, path[-1]] >= 0:
        path.append(int(pred[src_row, path[-1]]))
    return path[::-1]


def first_betti(X: SimplicialComplex) -> int:
    """E - V + components - rank B_2."""
    b2 = X.incidence(2).toarray() if X.max_order >= 2 else np.zeros((X.n(1), 0))
    rank = np.linalg.matrix_rank(b2) if b2.size else 0
    n_comp, _ = connected_components(_adjacency(X), directed=False)
    return X.n(1) - X.n(0) + n_comp - int(rank)


def build_punched_complex(n_points: int, hole_centers, hole_radius: float, rng: np.random.Generator,
                          max_attempts: int = MAX_ATTEMPTS):
    """Redraw points until the punched complex is connected with both holes intact.

    Hull slivers can have circumcentres inside a disk; deleting them opens
    the hole onto the outer boundary, so such draws are rejected.
    Returns (complex, points, attempts used).
    """
    reason = ""
    for attempt in range(1, max_attempts + 1):
        points = rng.random((n_points, 2))
        tris = delaunay_triangles(points)
        kept, tris = punch_holes(points, tris, hole_centers, hole_radius)
        if len(tris) == 0:
            reason = "no triangles survive"
            continue
        X = build_complex(np.sort(tris, axis=1).tolist())
        n_comp, _ = connected_components(_adjacency(X), directed=False)
        if n_comp != 1:
            reason = f"{n_comp} components"
            continue
        b1 = first_betti(X)
        if b1 < 2:
            reason = f"first Betti number {b1}"
            continue
        return X, kept, attempt
    raise DisconnectedAfterHolePunch(f"no valid complex in {max_attempts} draws (last: {reason})")


def generate_synthetic_flow(
    n_points: int = 100,
    hole_centers=DEFAULT_HOLES,
    hole_radius: float = 0.12,
    n_train: int = 200,
    n_test: int = 50,
    seed: int = 0,
    corner_pool: int = 5,
    waypoint_gap: float = 0.05,
    waypoint_jitter: float = 0.03,
    random_test_orientation: bool = False,
) -> SyntheticFlowDataset:
    """Trajectories from near the top-left to near the bottom-right corner.

    Each path is routed through a waypoint on the outer side of one of the
    two holes; the label is the index of that hole.
    """
    if n_points < 20:
        raise ConfigError("n_points must be at least 20")
    validate_holes(hole_centers, hole_radius)
    rng = np.random.default_rng(seed)
    X, pts, attempts = build_punched_complex(n_points, hole_centers, hole_radius, rng)
    A = _adjacency(X)
    centers = np.asarray(hole_centers, dtype=float)
    mid = np.array([0.5, 0.5])

    def nearest(target, k):
        return np.argsort(np.linalg.norm(pts - target, axis=1), kind="stable")[:k]

    starts = nearest(TOP_LEFT, corner_pool)
    ends = nearest(BOTTOM_RIGHT, corner_pool)
    dist, pred = shortest_path(A, unweighted=True, return_predecessors=True)

    def sample(n, flip):
        out = []
        for _ in range(n):
            label = int(rng.integers(2))
            c = centers[label]
            outward = (c - mid) / max(np.linalg.norm(c - mid), 1e-12)
            target = c + (hole_radius + waypoint_gap) * outward + rng.normal(0, waypoint_jitter, 2)
            wp = int(nearest(target, 1)[0])
            s, e = int(rng.choice(starts)), int(rng.choice(ends))
            walk = _trace(pred, s, wp) + _trace(pred, wp, e)[1:]
            path = _loop_erase(walk)
            x = _path_signal(X, path)
            orientation = None
            if flip:
                orientation = rng.choice([-1.0, 1.0], size=X.n(1))
                x = x * orientation
            out.append(TrajectoryInstance(x, label, orientation))
        return out

    train = sample(n_train, False)
    test = sample(n_test, random_test_orientation)
    params = dict(
        task="trajectory", n_points=n_points, hole_centers=centers.tolist(), hole_radius=hole_radius,
        n_train=n_train, n_test=n_test, seed=seed, corner_pool=corner_pool,
        waypoint_gap=waypoint_gap, waypoint_jitter=waypoint_jitter,
        random_test_orientation=random_test_orientation,
        shape=list(X.shape), point_draws=attempts,
    )
    return SyntheticFlowDataset(X, pts, train, test, params)
