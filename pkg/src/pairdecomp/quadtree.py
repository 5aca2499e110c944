"""Regular (levelled) and compressed quadtrees and the WSPDs built on them.

Both trees share one cell convention. Points are normalized into the root
cube as ``u = (x - anchor) / side`` and a point's cell at depth ``k`` is
``floor(u * 2**k)`` clamped to ``2**k - 1``, so cells are half-open except on
the root's upper faces. Scaling by a power of two is exact, hence a child's
cell always lies inside its parent's.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import GeometryError, PointSet, as_index_set
from .pairs import Pair, PairDecomposition

MAX_DEPTH = 52
# Box tests must hold with this relative slack so that the point-level
# check, done in floating point, never sees a borderline pair.
BOX_SLACK = 1.0 - 1e-9


def _root_cube(C: np.ndarray):
    anchor = C.min(axis=0)
    extent = float((C.max(axis=0) - anchor).max()) if len(C) else 0.0
    side = 2.0 ** math.ceil(math.log2(extent)) if extent > 0 else 1.0
    return anchor, side


def _fixed_point(unit: np.ndarray) -> np.ndarray:
    F = np.floor(unit * 2.0 ** MAX_DEPTH).astype(np.int64)
    return np.minimum(F, (1 << MAX_DEPTH) - 1)


def _exact_keys(C: np.ndarray):
    """Exact integer coordinates for inputs whose spread defeats 52-bit keys.

    Every float is ``num / 2^m``; scaling by the largest denominator ``D``
    makes all coordinates integers. Returns ``(F, bits, A, D)`` with
    ``F = x D - A`` as Python ints in ``[0, 2^bits)`` and ``A`` the scaled
    anchor.
    """
    ratios = [[float(v).as_integer_ratio() for v in row] for row in C.tolist()]
    D = max(den for row in ratios for _, den in row)
    scaled = [[num * (D // den) for num, den in row] for row in ratios]
    A = [min(col) for col in zip(*scaled)]
    F = np.array([[v - a for v, a in zip(row, A)] for row in scaled], dtype=object)
    bits = max(max(int(v).bit_length() for v in F.ravel()), 1)
    return F, bits, A, D


# ---------------------------------------------------------------------------
# Regular quadtree, materialized one depth at a time on demand.


class _Level:
    __slots__ = ("keys", "parent", "start", "end", "pts", "child_start",
                 "child_count", "flag_a", "flag_b", "flag_q", "lo", "hi")

    def __init__(self, d):
        self.keys = np.empty((0, d), dtype=np.int64)
        self.parent = np.empty(0, dtype=np.int64)
        self.start = np.empty(0, dtype=np.int64)
        self.end = np.empty(0, dtype=np.int64)
        self.pts = np.empty(0, dtype=np.int64)
        self.child_start = np.empty(0, dtype=np.int64)
        self.child_count = np.empty(0, dtype=np.int64)
        self.flag_a = np.empty(0, dtype=bool)
        self.flag_b = np.empty(0, dtype=bool)
        self.flag_q = np.empty(0, dtype=bool)
        self.lo = np.empty((0, d))
        self.hi = np.empty((0, d))

    def __len__(self):
        return len(self.parent)


@dataclass(frozen=True)
class Node:
    """Read-only view of one materialized quadtree node."""

    tree: "LevelTree"
    depth: int
    id: int

    @property
    def _lvl(self):
        return self.tree.levels[self.depth]

    @property
    def key(self) -> tuple:
        return tuple(self._lvl.keys[self.id].tolist())

    @property
    def side(self) -> float:
        return self.tree.side / 2.0 ** self.depth

    @property
    def box(self):
        lo = self.tree.anchor + self._lvl.keys[self.id] * self.side
        return lo, lo + self.side

    @property
    def points(self) -> np.ndarray:
        return self.tree.node_points(self.depth, np.array([self.id]))[0]

    @property
    def subset_of_a(self) -> bool:
        return bool(self._lvl.flag_a[self.id])

    @property
    def subset_of_b(self) -> bool:
        return bool(self._lvl.flag_b[self.id])

    @property
    def materialized(self) -> bool:
        return bool(self._lvl.child_count[self.id] >= 0)

    @property
    def children(self) -> list:
        self.tree.materialize(self.depth, np.array([self.id]))
        lvl = self._lvl
        s, c = lvl.child_start[self.id], lvl.child_count[self.id]
        return [Node(self.tree, self.depth + 1, int(j)) for j in range(s, s + c)]


class LevelTree:
    """Regular quadtree over an index set, built lazily.

    Only the root exists after construction; the children of a node are
    created, and its points pushed down into them, the first time they are
    requested. ``labels`` (a boolean per point of ``X``) turns on the
    ``subset_of_a`` / ``subset_of_b`` flags; ``marks`` turns on a flag for
    nodes holding at least one marked point.
    """

    def __init__(self, X, P: PointSet, labels=None, marks=None):
        self.P = P
        self.idx = as_index_set(X)
        if self.idx.size == 0:
            raise GeometryError("cannot build a quadtree on an empty set")
        C = P.coords[self.idx]
        self.dim = P.dim
        self.anchor, self.side = _root_cube(C)
        self.unit = (C - self.anchor) / self.side
        self.coords = C
        self.labels = None if labels is None else np.asarray(labels, dtype=bool)
        self.marks = None if marks is None else np.asarray(marks, dtype=bool)
        root = _Level(self.dim)
        root.keys = np.zeros((1, self.dim), dtype=np.int64)
        root.parent = np.array([-1])
        root.start = np.array([0])
        root.end = np.array([len(self.idx)])
        root.pts = np.arange(len(self.idx), dtype=np.int64)
        root.child_start = np.array([-1])
        root.child_count = np.array([-1])
        root.flag_a, root.flag_b, root.flag_q = self._flags(root.pts, np.array([0]))
        root.lo, root.hi = C.min(axis=0, keepdims=True), C.max(axis=0, keepdims=True)
        self.levels = [root]

    @property
    def root(self) -> Node:
        return Node(self, 0, 0)

    @property
    def depth(self) -> int:
        """Deepest depth materialized so far."""
        return len(self.levels) - 1

    def _flags(self, pts, bounds):
        m = len(bounds)
        if self.labels is None:
            fa = fb = np.zeros(m, dtype=bool)
        else:
            lab = self.labels[pts]
            fa = np.logical_and.reduceat(lab, bounds)
            fb = np.logical_and.reduceat(~lab, bounds)
        if self.marks is None:
            fq = np.ones(m, dtype=bool)
        else:
            fq = np.logical_or.reduceat(self.marks[pts], bounds)
        return fa, fb, fq

    def cell_keys(self, pts: np.ndarray, depth: int) -> np.ndarray:
        k = np.floor(self.unit[pts] * 2.0 ** depth).astype(np.int64)
        return np.minimum(k, (1 << depth) - 1)

    def node_points(self, depth: int, ids) -> list:
        lvl = self.levels[depth]
        return [self.idx[lvl.pts[lvl.start[i]:lvl.end[i]]] for i in ids]

    def node_sizes(self, depth: int, ids) -> np.ndarray:
        lvl = self.levels[depth]
        return lvl.end[ids] - lvl.start[ids]

    def materialize(self, depth: int, ids) -> None:
        """Create the children of the given depth-``depth`` nodes."""
        lvl = self.levels[depth]
        ids = np.asarray(ids, dtype=np.int64)
        ids = np.unique(ids[lvl.child_count[ids] < 0])
        if ids.size == 0:
            return
        if depth + 1 > MAX_DEPTH:
            raise GeometryError("spread exceeds the 2^52 resolution of the regular quadtree")
        if depth + 1 == len(self.levels):
            self.levels.append(_Level(self.dim))
        nxt = self.levels[depth + 1]
        sizes = lvl.end[ids] - lvl.start[ids]
        owner = np.repeat(ids, sizes)
        # gather point positions of every requested node, in node order
        offs = np.repeat(lvl.start[ids] - np.concatenate(([0], np.cumsum(sizes)[:-1])), sizes)
        pts = lvl.pts[np.arange(sizes.sum()) + offs]
        keys = self.cell_keys(pts, depth + 1)
        code = ((keys - 2 * lvl.keys[owner]) << np.arange(self.dim)).sum(axis=1)
        order = np.lexsort((code, owner))
        pts, keys, code, owner = pts[order], keys[order], code[order], owner[order]
        brk = np.flatnonzero((np.diff(owner) != 0) | (np.diff(code) != 0)) + 1
        bounds = np.concatenate(([0], brk))
        m = len(bounds)
        base_id = len(nxt)
        base_pt = len(nxt.pts)
        child_owner = owner[bounds]
        fa, fb, fq = self._flags(pts, bounds)
        nxt.lo = np.concatenate((nxt.lo, np.minimum.reduceat(self.coords[pts], bounds)))
        nxt.hi = np.concatenate((nxt.hi, np.maximum.reduceat(self.coords[pts], bounds)))
        nxt.keys = np.concatenate((nxt.keys, keys[bounds]))
        nxt.parent = np.concatenate((nxt.parent, child_owner))
        nxt.start = np.concatenate((nxt.start, base_pt + bounds))
        nxt.end = np.concatenate((nxt.end, base_pt + np.append(bounds[1:], len(pts))))
        nxt.pts = np.concatenate((nxt.pts, pts))
        nxt.child_start = np.concatenate((nxt.child_start, np.full(m, -1)))
        nxt.child_count = np.concatenate((nxt.child_count, np.full(m, -1)))
        nxt.flag_a = np.concatenate((nxt.flag_a, fa))
        nxt.flag_b = np.concatenate((nxt.flag_b, fb))
        nxt.flag_q = np.concatenate((nxt.flag_q, fq))
        first = np.flatnonzero(np.r_[True, np.diff(child_owner) != 0])
        counts = np.diff(np.append(first, m))
        lvl.child_start[child_owner[first]] = base_id + first
        lvl.child_count[child_owner[first]] = counts

    def node(self, depth: int, id: int) -> Node:
        return Node(self, depth, id)


def build_level_tree(X, P: PointSet, labels=None, marks=None) -> LevelTree:
    return LevelTree(X, P, labels=labels, marks=marks)


@dataclass
class NodePairs:
    """Node pairs emitted by :func:`same_level_pairs`, grouped by depth."""

    depth: list
    a: list
    b: list

    def __len__(self):
        return sum(len(x) for x in self.a)

    def iter_points(self, tree: LevelTree):
        for k, A, B in zip(self.depth, self.a, self.b):
            lvl = tree.levels[k]
            idx, pts = tree.idx, lvl.pts
            for i, j in zip(A.tolist(), B.tolist()):
                yield k, idx[pts[lvl.start[i]:lvl.end[i]]], idx[pts[lvl.start[j]:lvl.end[j]]]


def _expand(tree: LevelTree, depth: int, A: np.ndarray, B: np.ndarray):
    """All child pairs of the given node pairs (unordered for A == B)."""
    lvl = tree.levels[depth]
    tree.materialize(depth, np.concatenate((A, B)))
    ca, cb = lvl.child_count[A], lvl.child_count[B]
    tot = ca * cb
    row = np.repeat(np.arange(len(A)), tot)
    t = np.arange(tot.sum()) - np.repeat(np.cumsum(tot) - tot, tot)
    ia = t // cb[row]
    ib = t - ia * cb[row]
    selfp = A[row] == B[row]
    na = lvl.child_start[A[row]] + ia
    nb = lvl.child_start[B[row]] + ib
    keep = ~selfp | (ia < ib)
    # a one-point node paired with itself covers no point pair
    same = selfp & (ia == ib)
    if same.any():
        sizes = tree.node_sizes(depth + 1, na[same])
        keep[np.flatnonzero(same)[sizes > 1]] = True
    return na[keep], nb[keep]


BOX_MODES = ("points", "cells")


def same_level_pairs(tree: LevelTree, eps: float, prune: bool = False,
                     boxes: str = "points") -> NodePairs:
    """Same-depth separation recursion on a regular quadtree.

    Starting from (root, root), a pair of distinct equal-depth nodes is
    emitted once their boxes satisfy ``max(diam) <= eps * gap``, which
    implies well-separation of the points; otherwise all pairs of their
    children are tried. ``boxes`` selects the bounding boxes of the node
    points or the quadtree cells themselves (coarser, never separates a
    pair the point boxes would not). With ``prune``, pairs
    whose nodes are both inside side A or both inside side B are dropped on
    sight, as are pairs where neither node holds a marked point.
    """
    if boxes not in BOX_MODES:
        raise ValueError(f"boxes must be one of {BOX_MODES}")
    e2 = eps * eps * BOX_SLACK
    thresh = tree.dim / (eps * eps * BOX_SLACK)
    out = NodePairs([], [], [])
    A = np.zeros(1, dtype=np.int64)
    B = np.zeros(1, dtype=np.int64)
    if len(tree.idx) < 2:
        return out
    depth = 0
    while len(A):
        lvl = tree.levels[depth]
        if prune:
            drop = (lvl.flag_a[A] & lvl.flag_a[B]) | (lvl.flag_b[A] & lvl.flag_b[B])
            drop |= ~(lvl.flag_q[A] | lvl.flag_q[B])
            A, B = A[~drop], B[~drop]
        if boxes == "cells":
            gap = np.maximum(np.abs(lvl.keys[A] - lvl.keys[B]) - 1, 0)
            sep = (A != B) & ((gap * gap).sum(axis=1) >= thresh)
        else:
            loA, hiA, loB, hiB = lvl.lo[A], lvl.hi[A], lvl.lo[B], lvl.hi[B]
            diam2 = np.maximum(((hiA - loA) ** 2).sum(axis=1), ((hiB - loB) ** 2).sum(axis=1))
            gap = np.maximum(np.maximum(loA - hiB, loB - hiA), 0.0)
            g2 = (gap * gap).sum(axis=1)
            sep = (A != B) & (g2 > 0) & (diam2 <= e2 * g2)
        if sep.any():
            out.depth.append(depth)
            out.a.append(A[sep])
            out.b.append(B[sep])
        A, B = A[~sep], B[~sep]
        if not len(A):
            break
        if depth + 1 > MAX_DEPTH:
            raise GeometryError("spread exceeds the 2^52 resolution of the regular quadtree")
        A, B = _expand(tree, depth, A, B)
        depth += 1
    return out


def per_node_pair_counts(pairs: NodePairs) -> dict:
    """Number of emitted pairs touching each (depth, node)."""
    counts: dict = {}
    for k, A, B in zip(pairs.depth, pairs.a, pairs.b):
        ids, c = np.unique(np.concatenate((A, B)), return_counts=True)
        for i, ci in zip(ids.tolist(), c.tolist()):
            counts[(k, i)] = ci
    return counts


def wspd_bounded_spread(X, P: PointSet, eps: float, *, return_tree: bool = False):
    """Same-level WSPD on a regular quadtree.

    Every pair joins two nodes of equal depth, so each node meets only a
    bounded number of partners; point multiplicity grows with the depth of
    the tree, i.e. with the log of the spread.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    X = as_index_set(X)
    P.require_distinct(X)
    tree = LevelTree(X, P)
    nodes = same_level_pairs(tree, eps)
    pairs = [Pair(a, b, "plain", trusted=True) for _, a, b in nodes.iter_points(tree)]
    W = PairDecomposition(pairs, 1.0 / eps, "wspd")
    if return_tree:
        return W, tree, nodes
    return W


# ---------------------------------------------------------------------------
# Compressed quadtree and the general WSPD.


class CompressedQuadtree:
    """Quadtree with single-child chains collapsed.

    Internal nodes keep the smallest quadtree cell holding all their points
    and have at least two children; leaves are single points whose box is
    the point itself. Points are laid out in DFS order so that every node
    owns a contiguous range ``[lo, hi)`` of ``order``.
    """

    def __init__(self, X, P: PointSet):
        self.P = P
        self.idx = as_index_set(X)
        if self.idx.size == 0:
            raise GeometryError("cannot build a quadtree on an empty set")
        P.require_distinct(self.idx)
        C = P.coords[self.idx]
        self.dim = P.dim
        self.anchor, self.side = _root_cube(C)
        F = _fixed_point((C - self.anchor) / self.side)
        self.bits, self._exact = MAX_DEPTH, None
        if len(np.unique(F, axis=0)) < len(F):
            F, self.bits, A, D = _exact_keys(C)
            self._exact = (A, D)
            self.side = math.ldexp(1.0, self.bits - (D.bit_length() - 1))
        self._build(F)

    def _build(self, F):
        d = self.dim
        depth, lo_corner, side, parent, children = [], [], [], [], []
        leaf_point = []
        order = np.empty(len(self.idx), dtype=np.int64)
        lo_rng, hi_rng = [], []
        # stack entries: (positions, parent id); positions are local indices
        stack = [(np.arange(len(self.idx)), -1)]
        cursor = 0
        while stack:
            pos, par = stack.pop()
            nid = len(depth)
            parent.append(par)
            children.append([])
            if par >= 0:
                children[par].append(nid)
            lo_rng.append(cursor)
            hi_rng.append(cursor + len(pos))
            if len(pos) == 1:
                order[cursor] = pos[0]
                cursor += 1
                depth.append(self.bits)
                pt = self.P.coords[self.idx[pos[0]]]
                lo_corner.append(pt)
                side.append(0.0)
                leaf_point.append(int(self.idx[pos[0]]))
                continue
            G = F[pos]
            diff = np.bitwise_or.reduce(G ^ G[0], axis=0)
            b = int(max(int(x).bit_length() for x in diff))
            k = self.bits - b
            key = G[0] >> b
            s = math.ldexp(self.side, -k)
            depth.append(k)
            if self._exact is None:
                lo_corner.append(self.anchor + key * s)
            else:
                # int / int division rounds correctly
                A, D = self._exact
                lo_corner.append([(a + (int(q) << b)) / D for a, q in zip(A, key)])
            side.append(s)
            leaf_point.append(-1)
            code = (((G >> (b - 1)) & 1) << np.arange(d)).sum(axis=1)
            srt = np.argsort(code, kind="stable")
            code = code[srt]
            groups = np.split(pos[srt], np.flatnonzero(np.diff(code)) + 1)
            # push in reverse so children are visited in code order
            for g in reversed(groups):
                stack.append((g, nid))
        self.depth = np.array(depth)
        self.lo = np.array(lo_corner, dtype=np.float64).reshape(-1, d)
        self.cell_side = np.array(side)
        self.diam = self.cell_side * math.sqrt(d)
        self.parent = np.array(parent)
        self.children = children
        self.leaf_point = np.array(leaf_point)
        self.order = self.idx[order]
        self.range_lo = np.array(lo_rng)
        self.range_hi = np.array(hi_rng)
        self.position = np.empty(self.P.n, dtype=np.int64)
        self.position[:] = -1
        self.position[self.order] = np.arange(len(self.order))
        self.leaf_of = {int(p): i for i, p in enumerate(self.leaf_point) if p >= 0}
        # children flattened in (parent, range) order for batched descent
        flat = [c for ch in children for c in ch]
        self._child_flat = np.array(flat, dtype=np.int64)
        self._stride = len(self.order) + 1
        self._child_key = self.parent[self._child_flat] * self._stride + \
            self.range_lo[self._child_flat]

    def __len__(self):
        return len(self.depth)

    @property
    def root(self) -> int:
        return 0

    def is_leaf(self, u: int) -> bool:
        return self.leaf_point[u] >= 0

    def points(self, u: int) -> np.ndarray:
        return np.sort(self.order[self.range_lo[u]:self.range_hi[u]])

    def contains(self, u: int, q: int) -> bool:
        p = self.position[q]
        return bool(self.range_lo[u] <= p < self.range_hi[u])

    def child_containing(self, u: int, q: int) -> int:
        p = self.position[q]
        for c in self.children[u]:
            if self.range_lo[c] <= p < self.range_hi[c]:
                return c
        raise KeyError(q)

    def children_containing(self, U: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """Batched :meth:`child_containing` for internal nodes ``U``."""
        key = U * self._stride + self.position[Q]
        return self._child_flat[np.searchsorted(self._child_key, key, side="right") - 1]

    def separated_many(self, U: np.ndarray, V: np.ndarray, eps: float) -> np.ndarray:
        lo_u, lo_v = self.lo[U], self.lo[V]
        hi_u = lo_u + self.cell_side[U][:, None]
        hi_v = lo_v + self.cell_side[V][:, None]
        gap = np.maximum(np.maximum(lo_v - hi_u, lo_u - hi_v), 0.0)
        dist = np.sqrt((gap * gap).sum(axis=1))
        return np.maximum(self.diam[U], self.diam[V]) <= eps * BOX_SLACK * dist

    def box_distance(self, u: int, v: int) -> float:
        lo_u, lo_v = self.lo[u], self.lo[v]
        hi_u = lo_u + self.cell_side[u]
        hi_v = lo_v + self.cell_side[v]
        gap = np.maximum(np.maximum(lo_v - hi_u, lo_u - hi_v), 0.0)
        return float(math.sqrt(float(gap @ gap)))

    def separated(self, u: int, v: int, eps: float) -> bool:
        big = max(self.diam[u], self.diam[v])
        return big <= eps * BOX_SLACK * self.box_distance(u, v)

    def split_first(self, u: int, v: int) -> bool:
        """Whether the recursion splits ``u`` (rather than ``v``) next."""
        return (self.diam[u], u) > (self.diam[v], v)


class WspdIndex:
    """Node-pair index of a compressed-quadtree WSPD, for pair location."""

    def __init__(self, tree: CompressedQuadtree, eps: float, pair_ids: Optional[dict] = None):
        self.tree = tree
        self.eps = eps
        self.pair_ids = pair_ids

    def locate(self, q: int, r: int):
        return locate_pair(self, q, r)


def _wspd_node_pairs(tree: CompressedQuadtree, eps: float) -> list:
    out = []
    stack = []
    for u in range(len(tree)):
        ch = tree.children[u]
        for i in range(len(ch)):
            for j in range(i + 1, len(ch)):
                stack.append((ch[i], ch[j]))
    while stack:
        u, v = stack.pop()
        if tree.separated(u, v, eps):
            out.append((u, v))
            continue
        if tree.split_first(u, v):
            stack.extend((c, v) for c in tree.children[u])
        else:
            stack.extend((u, c) for c in tree.children[v])
    return out


def wspd_general(X, P: PointSet, eps: float):
    """Compressed-quadtree WSPD with exactly-once coverage.

    Returns ``(W, tree, index)``; ``index`` supports :func:`locate_pair`.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    tree = CompressedQuadtree(X, P)
    node_pairs = _wspd_node_pairs(tree, eps)
    pairs, ids = [], {}
    for pid, (u, v) in enumerate(node_pairs):
        pairs.append(Pair(tree.points(u), tree.points(v), "plain", trusted=True))
        ids[(min(u, v), max(u, v))] = pid
    W = PairDecomposition(pairs, 1.0 / eps, "wspd")
    return W, tree, WspdIndex(tree, eps, ids)


def locate_pair(index: WspdIndex, q: int, r: int):
    """The WSPD pair separating points ``q`` and ``r``.

    Walks to the lowest common ancestor of the two leaves and then replays
    the construction recursion for this one point pair. Returns
    ``(pair_id, u, v)`` with ``q`` under node ``u`` and ``r`` under ``v``;
    ``pair_id`` is ``None`` for an index built without materialized pairs.
    """
    if q == r:
        raise ValueError("locate_pair needs two distinct points")
    tree = index.tree
    if tree.position[q] < 0 or tree.position[r] < 0:
        raise KeyError("point not in the decomposed set")
    u = tree.leaf_of[q]
    while not tree.contains(tree.parent[u], r):
        u = tree.parent[u]
    lca = tree.parent[u]
    v = tree.leaf_of[r]
    while tree.parent[v] != lca:
        v = tree.parent[v]
    while not tree.separated(u, v, index.eps):
        if tree.split_first(u, v):
            u = tree.child_containing(u, q)
        else:
            v = tree.child_containing(v, r)
    key = (min(u, v), max(u, v))
    pid = None if index.pair_ids is None else index.pair_ids[key]
    return pid, u, v


def locate_pairs(index: WspdIndex, q, r):
    """Batched :func:`locate_pair`: node arrays ``(U, V)``, ``q[i]`` under ``U[i]``."""
    tree = index.tree
    q = np.asarray(q, dtype=np.int64)
    r = np.asarray(r, dtype=np.int64)
    if np.any(q == r):
        raise ValueError("locate_pair needs two distinct points")
    if np.any(tree.position[q] < 0) or np.any(tree.position[r] < 0):
        raise KeyError("point not in the decomposed set")
    m = len(q)
    U = np.zeros(m, dtype=np.int64)
    V = np.zeros(m, dtype=np.int64)
    # descend from the root until q and r part ways
    act = np.arange(m)
    cur = np.zeros(m, dtype=np.int64)
    while act.size:
        cq = tree.children_containing(cur, q[act])
        cr = tree.children_containing(cur, r[act])
        done = cq != cr
        U[act[done]], V[act[done]] = cq[done], cr[done]
        act, cur = act[~done], cq[~done]
    # replay the separation recursion
    act = np.arange(m)
    while act.size:
        u, v = U[act], V[act]
        sep = tree.separated_many(u, v, index.eps)
        act, u, v = act[~sep], u[~sep], v[~sep]
        if not act.size:
            break
        su = (tree.diam[u] > tree.diam[v]) | ((tree.diam[u] == tree.diam[v]) & (u > v))
        a, b = act[su], act[~su]
        U[a] = tree.children_containing(u[su], q[a])
        V[b] = tree.children_containing(v[~su], r[b])
    return U, V
