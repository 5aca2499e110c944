"""Spanners from semi-separated pair decompositions.

Every pair contributes edges from one *hub*, the lowest-index point of its
smaller side, to the nearest point of the other side inside each cone of
a fixed direction partition around the hub.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import PointSet
from .pairs import PairDecomposition

STRETCH_LIMIT = 4096


@dataclass(frozen=True)
class ConeSet:
    """Partition of the directions of ``R^d`` into cones of opening <= psi.

    In the plane the cones are ``count`` equal half-open angular sectors
    starting at angle 0. In higher dimension a direction is projected
    from the origin onto the face of the cube ``[-1, 1]^d`` it exits
    through; each face is cut into a ``k^(d-1)`` grid of cells.
    """

    psi: float
    dim: int
    count: int
    k: int

    def cone_of(self, v: np.ndarray) -> np.ndarray:
        """Cone id of each row of ``v`` (nonzero direction vectors)."""
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        if self.dim == 2:
            ang = np.arctan2(v[:, 1], v[:, 0])
            ang = np.where(ang < 0, ang + 2 * math.pi, ang)
            ids = np.floor(ang * (self.count / (2 * math.pi))).astype(np.int64)
            return np.minimum(ids, self.count - 1)
        d = self.dim
        absv = np.abs(v)
        axis = np.argmax(absv, axis=1)
        rows = np.arange(len(v))
        lead = v[rows, axis]
        face = 2 * axis + (lead < 0)
        if d == 1:
            return face
        proj = v / absv[rows, axis][:, None]
        others = np.ones_like(v, dtype=bool)
        others[rows, axis] = False
        coords = proj[others].reshape(len(v), d - 1)
        cell = np.minimum(np.floor((coords + 1.0) * (self.k / 2.0)).astype(np.int64), self.k - 1)
        cell = np.maximum(cell, 0)
        lin = np.zeros(len(v), dtype=np.int64)
        for j in range(d - 1):
            lin = lin * self.k + cell[:, j]
        return face * self.k ** (d - 1) + lin


def build_cones(psi: float, d: int) -> ConeSet:
    if not 0 < psi <= math.pi / 3 + 1e-15:
        raise ValueError("cone opening must lie in (0, pi/3]")
    if d < 1:
        raise ValueError("dimension must be positive")
    if d == 2:
        count = math.ceil(2 * math.pi / psi - 1e-9)
        return ConeSet(psi, d, count, 0)
    k = math.ceil(2 * math.sqrt(d) / psi - 1e-9)
    return ConeSet(psi, d, 2 * d * k ** (d - 1), k)


class SpannerGraph:
    """Undirected graph on point indices with Euclidean edge weights.

    Edges are kept as a sorted, duplicate-free ``(m, 2)`` array with
    ``u < v``; weights are recomputed from the coordinates.
    """

    def __init__(self, n: int, edges, P: Optional[PointSet] = None, weights=None):
        self.n = int(n)
        E = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if E.size and np.any(E[:, 0] == E[:, 1]):
            raise ValueError("self-loops are not allowed")
        E = np.sort(E, axis=1)
        if len(E):
            key = np.unique(E[:, 0] * self.n + E[:, 1])
            E = np.stack([key // self.n, key % self.n], axis=1)
        self.edges = E
        if P is not None:
            self.weights = np.linalg.norm(P.coords[E[:, 0]] - P.coords[E[:, 1]], axis=1) \
                if len(E) else np.empty(0)
        elif weights is not None:
            self.weights = np.asarray(weights, dtype=np.float64)
        else:
            raise ValueError("either points or weights are required")
        self._adj = None

    @property
    def m(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def adjacency(self) -> list:
        if self._adj is None:
            adj = [[] for _ in range(self.n)]
            for (u, v), w in zip(self.edges.tolist(), self.weights.tolist()):
                adj[u].append((v, w))
                adj[v].append((u, w))
            self._adj = adj
        return self._adj

    def to_csr(self):
        from scipy.sparse import csr_matrix
        E, w = self.edges, self.weights
        rows = np.concatenate((E[:, 0], E[:, 1]))
        cols = np.concatenate((E[:, 1], E[:, 0]))
        return csr_matrix((np.concatenate((w, w)), (rows, cols)), shape=(self.n, self.n))


@dataclass
class HubRecord:
    """Hub point of every pair, indexed by pair position in the decomposition."""

    hubs: np.ndarray
    hub_left: np.ndarray

    def __getitem__(self, pid: int) -> int:
        return int(self.hubs[pid])


@dataclass
class GraphStats:
    edges: int
    max_degree: int
    total_weight: float


def _approx_diam(A: np.ndarray, P: PointSet, cache: dict) -> float:
    if len(A) == 1:
        return 0.0
    key = id(A)
    hit = cache.get(key)
    if hit is not None and hit[0] is A:
        return hit[1]
    val = float(np.sqrt(((P.coords[A] - P.coords[A[0]]) ** 2).sum(axis=1).max()))
    cache[key] = (A, val)
    return val


def spanner_from_sspd(S: PairDecomposition, P: PointSet, eps: float, *,
                      diameter_mode: str = "approx", psi: Optional[float] = None,
                      require_margin: bool = True):
    """``(1 + eps)``-spanner from an SSPD covering ``P``.

    Needs separation ``16 / eps`` with 2-approximate diameters (the hub
    side may be up to twice too large) or ``8 / eps`` with exact ones.
    Cones open at ``eps / 40`` unless ``psi`` is given. Returns the graph
    and the hub of every pair. ``require_margin=False`` skips the
    separation check; the stretch bound then no longer holds.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if diameter_mode not in ("approx", "exact"):
        raise ValueError("diameter_mode must be 'approx' or 'exact'")
    need = (16.0 if diameter_mode == "approx" else 8.0) / eps
    if require_margin and S.separation < need * (1 - 1e-12):
        raise ValueError(f"decomposition separation {S.separation:g} below required {need:g}")
    cones = build_cones(eps / 40 if psi is None else psi, P.dim)
    C = P.coords
    cache: dict = {}
    hubs = np.empty(len(S), dtype=np.int64)
    hub_left = np.empty(len(S), dtype=bool)
    us, vs = [], []
    for pid, pr in enumerate(S.pairs):
        L, R = pr.left, pr.right
        if diameter_mode == "approx":
            dl, dr = _approx_diam(L, P, cache), _approx_diam(R, P, cache)
        else:
            from .geometry import diameter
            dl, dr = diameter(L, P, "exact"), diameter(R, P, "exact")
        # ties go to the side holding the lower index, which is always left
        left = dl <= dr
        H, Y = (L, R) if left else (R, L)
        h = int(H[0])
        hubs[pid] = h
        hub_left[pid] = left
        if len(Y) == 1:
            us.append(np.array([h]))
            vs.append(Y)
            continue
        vec = C[Y] - C[h]
        dist = np.sqrt((vec * vec).sum(axis=1))
        cid = cones.cone_of(vec)
        order = np.lexsort((Y, dist, cid))
        cs = cid[order]
        first = order[np.r_[True, cs[1:] != cs[:-1]]]
        us.append(np.full(len(first), h))
        vs.append(Y[first])
    if us:
        E = np.stack([np.concatenate(us), np.concatenate(vs)], axis=1)
    else:
        E = np.empty((0, 2), dtype=np.int64)
    G = SpannerGraph(P.n, E, P)
    G.cones = cones
    return G, HubRecord(hubs, hub_left)


def stretch_factor(G: SpannerGraph, P: PointSet, *, return_witness: bool = False,
                   limit: int = STRETCH_LIMIT):
    """Largest ratio of graph distance to Euclidean distance over all pairs.

    Runs Dijkstra from every vertex. A disconnected graph yields
    ``inf``; with ``return_witness`` the worst pair is returned too.
    """
    from scipy.sparse.csgraph import dijkstra
    n = P.n
    if n > limit:
        raise ValueError("oracle too large")
    if n < 2:
        return (1.0, None) if return_witness else 1.0
    A = G.to_csr()
    best, witness = 1.0, None
    step = max(1, (1 << 22) // n)
    for s in range(0, n, step):
        src = np.arange(s, min(n, s + step))
        D = dijkstra(A, directed=False, indices=src)
        E = np.sqrt(((P.coords[src][:, None, :] - P.coords[None, :, :]) ** 2).sum(-1))
        mask = np.arange(n)[None, :] > src[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(mask, D / E, 0.0)
        i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        if ratio[i, j] > best:
            best, witness = float(ratio[i, j]), (int(src[i]), int(j))
    return (best, witness) if return_witness else best


def graph_stats(G: SpannerGraph) -> GraphStats:
    deg = G.degrees()
    return GraphStats(
        edges=G.m,
        max_degree=int(deg.max()) if deg.size else 0,
        total_weight=float(G.weights.sum()),
    )


def write_graph(G: SpannerGraph, fh) -> None:
    """``n m`` header, then one ``u v weight`` line per edge."""
    fh.write(f"{G.n} {G.m}\n")
    for (u, v), w in zip(G.edges.tolist(), G.weights.tolist()):
        fh.write(f"{u} {v} {w!r}\n")


def read_graph(fh) -> SpannerGraph:
    head = fh.readline().split()
    n, m = int(head[0]), int(head[1])
    rows = [line.split() for line in fh if line.strip()]
    if len(rows) != m:
        raise ValueError(f"expected {m} edges, found {len(rows)}")
    E = np.array([[int(a), int(b)] for a, b, _ in rows], dtype=np.int64).reshape(-1, 2)
    w = np.array([float(c) for _, _, c in rows])
    return SpannerGraph(n, E, weights=w)
