"""Point sets and the distance primitives shared by every construction.

Index sets are sorted ``int64`` numpy arrays of point indices. All queries
here are exhaustive scans; desk-scale inputs do not need spatial indexes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative shrink applied to grid sides so that a floor-assigned cell never
# exceeds its nominal diameter after rounding.
GRID_SHRINK = 1.0 - 1e-9

_CHUNK = 1 << 22  # max distance-matrix entries materialized at once


# keeps every squared distance finite in double precision
MAX_COORD = 2.0 ** 500


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise GeometryError("ball radius must be nonnegative")


@dataclass(frozen=True)
class Ring:
    center: np.ndarray
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner <= self.outer:
            raise GeometryError("ring needs 0 <= inner <= outer")


class PointSet:
    """Immutable indexed array of ``n`` points in ``R^d``."""

    __slots__ = ("coords", "_has_dups")

    def __init__(self, coords):
        arr = np.array(coords, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise GeometryError("points must form an (n, d) array with d >= 1")
        if not np.all(np.isfinite(arr)):
            raise GeometryError("all coordinates must be finite")
        if arr.size and np.abs(arr).max() > MAX_COORD:
            raise GeometryError("coordinates exceed 2^500; squared distances would overflow")
        arr.setflags(write=False)
        self.coords = arr
        self._has_dups = None

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        return self.coords[i]

    def all_indices(self) -> np.ndarray:
        return np.arange(self.n, dtype=np.int64)

    def has_duplicates(self) -> bool:
        if self._has_dups is None:
            if self.n < 2:
                dup = False
            else:
                u = np.unique(self.coords, axis=0)
                dup = u.shape[0] < self.n
            self._has_dups = dup
        return self._has_dups

    def require_distinct(self, X=None):
        """Raise if the (sub)set ``X`` contains coincident points."""
        if X is None:
            if self.has_duplicates():
                raise GeometryError("point set contains duplicate points")
            return
        sub = self.coords[as_index_set(X)]
        if len(sub) > 1 and np.unique(sub, axis=0).shape[0] < len(sub):
            raise GeometryError("point set contains duplicate points")

    def __repr__(self):
        return f"PointSet(n={self.n}, dim={self.dim})"


def as_index_set(X) -> np.ndarray:
    """Normalize any iterable of indices to a sorted unique int64 array."""
    arr = np.asarray(X, dtype=np.int64).ravel()
    if arr.size > 1 and np.any(arr[1:] <= arr[:-1]):
        arr = np.unique(arr)
    return arr


def _nonempty(X, what="set"):
    X = as_index_set(X)
    if X.size == 0:
        raise GeometryError(f"empty-{what} distance undefined")
    return X


def dist(P: PointSet, i: int, j: int) -> float:
    return float(np.linalg.norm(P.coords[i] - P.coords[j]))


def _min_cross(A: np.ndarray, B: np.ndarray) -> float:
    best = np.inf
    step = max(1, _CHUNK // max(1, len(B)))
    for s in range(0, len(A), step):
        blk = A[s:s + step]
        d2 = ((blk[:, None, :] - B[None, :, :]) ** 2).sum(-1)
        best = min(best, float(d2.min()))
    return float(np.sqrt(best))


def set_distance(X, Y, P: PointSet) -> float:
    """Minimum Euclidean distance between the index sets ``X`` and ``Y``."""
    X = _nonempty(X)
    Y = _nonempty(Y)
    if len(X) > len(Y):
        X, Y = Y, X
    return _min_cross(P.coords[X], P.coords[Y])


def point_to_set_distances(P: PointSet, i: int, X) -> np.ndarray:
    X = as_index_set(X)
    return np.linalg.norm(P.coords[X] - P.coords[i], axis=1)


def _max_pairwise(A: np.ndarray) -> float:
    m = len(A)
    if m < 2:
        return 0.0
    best = 0.0
    step = max(1, _CHUNK // m)
    for s in range(0, m, step):
        blk = A[s:s + step]
        # only columns at or after the block start are new comparisons
        d2 = ((blk[:, None, :] - A[None, s:, :]) ** 2).sum(-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def diameter(X, P: PointSet, mode: str = "exact") -> float:
    """Diameter of ``X``.

    ``exact`` scans all pairs. ``approx`` returns the largest distance from
    the lowest-index point of ``X``, which lies in ``[diam/2, diam]``.
    """
    X = as_index_set(X)
    if X.size == 0:
        raise GeometryError("diameter of an empty set is undefined")
    if mode == "exact":
        return _max_pairwise(P.coords[X])
    if mode == "approx":
        return float(np.linalg.norm(P.coords[X] - P.coords[X[0]], axis=1).max())
    raise GeometryError(f"unknown diameter mode {mode!r}")


def spread(P: PointSet) -> float:
    """Ratio of largest to smallest pairwise distance."""
    if P.n < 2:
        raise GeometryError("spread needs at least two points")
    C = P.coords
    hi, lo = 0.0, np.inf
    step = max(1, _CHUNK // P.n)
    for s in range(0, P.n, step):
        blk = C[s:s + step]
        d2 = ((blk[:, None, :] - C[None, :, :]) ** 2).sum(-1)
        rows = np.arange(len(blk))
        d2[rows, rows + s] = np.inf
        lo = min(lo, float(d2.min()))
        d2[rows, rows + s] = 0.0
        hi = max(hi, float(d2.max()))
    if lo == 0.0:
        raise GeometryError("infinite spread: duplicate points")
    return float(np.sqrt(hi) / np.sqrt(lo))


def _group_by_cells(cells: np.ndarray, X: np.ndarray) -> list[np.ndarray]:
    if len(X) == 1:
        return [X.copy()]
    _, inv = np.unique(cells, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.argsort(inv, kind="stable")
    bounds = np.flatnonzero(np.diff(inv[order])) + 1
    return [np.sort(X[g]) for g in np.split(order, bounds)]


def cluster_by_diameter(X, P: PointSet, delta: float) -> list[np.ndarray]:
    """Partition ``X`` into grid clusters of exact diameter at most ``delta``.

    The grid has side ``delta / sqrt(d)`` and is anchored at the
    coordinate-wise minimum of ``X``. Clusters come back ordered by their
    smallest index.
    """
    if not delta > 0:
        raise GeometryError("cluster diameter must be positive")
    X = as_index_set(X)
    if X.size == 0:
        return []
    C = P.coords[X]
    side = delta / np.sqrt(P.dim) * GRID_SHRINK
    cells = np.floor((C - C.min(axis=0)) / side).astype(np.int64)
    groups = _group_by_cells(cells, X)
    groups.sort(key=lambda g: g[0])
    return groups


def snap_to_grid(X, P: PointSet, side: float):
    """Snap ``X`` to centers of the origin-anchored grid of the given side.

    Returns ``(snapped, mapping)`` where ``mapping[k]`` is the snapped index
    of ``X[k]`` (``X`` taken in sorted order). Snapped points are ordered by
    the smallest original index that lands in them.
    """
    if not side > 0:
        raise GeometryError("grid side must be positive")
    X = as_index_set(X)
    cells = np.floor(P.coords[X] / side).astype(np.int64)
    if len(X) == 0:
        return PointSet(np.empty((0, P.dim))), np.empty(0, dtype=np.int64)
    uniq, first, inv = np.unique(cells, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    # renumber snapped points by first appearance
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    centers = np.empty((len(uniq), P.dim))
    centers[rank] = (uniq + 0.5) * side
    return PointSet(centers), rank[inv]


def count_in_ball(P: PointSet, X, center: int, radius: float) -> int:
    return int(np.count_nonzero(point_to_set_distances(P, center, X) <= radius))


def write_points(P: PointSet, fh) -> None:
    """``d n`` header, then one line of ``d`` coordinates per point."""
    fh.write(f"{P.dim} {P.n}\n")
    for row in P.coords.tolist():
        fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_points(fh) -> PointSet:
    """Parse the point file format; ``#`` lines are comments."""
    rows = [line.split() for line in fh if line.strip() and not line.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise ValueError("point file must start with a 'd n' header")
    d, n = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if d < 1 or n < 0 or len(body) != n:
        raise ValueError(f"header announces {n} points in dimension {d}, found {len(body)} lines")
    if any(len(r) != d for r in body):
        raise ValueError(f"every point needs exactly {d} coordinates")
    coords = np.array(body, dtype=np.float64).reshape(n, d)
    if not np.isfinite(coords).all():
        raise ValueError("coordinates must be finite")
    return PointSet(coords)
