"""Semi-separated pair decompositions.

``sspd_simple`` recurses on ring separators with an empty ring and covers
the inner/outer cut with a snapped bounded-spread WSPD. ``sspd_optimal``
partitions around a ball of random radius, so that in expectation each
point sits only a constant number of quadtree levels away from the cut;
this keeps its pair multiplicity logarithmic. ``reduce_pairs`` merges
short pairs that fall under a common pair of a coarser WSPD.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .geometry import PointSet, as_index_set, cluster_by_diameter, snap_to_grid
from .pairs import DecompositionError, Pair, PairDecomposition, _split_pairs, check_separation
from .partition import ring_separator, small_ball
from .quadtree import CompressedQuadtree, LevelTree, WspdIndex, locate_pairs, same_level_pairs
from .seeding import derive_seed, make_rng

# Ball dilation of the random partition and the window x is drawn from.
MU = 20.0
X_LO, X_HI = 5.0, 6.0

LONG_CLUSTER_MODES = ("gap", "fixed")

# Merging short pairs under a WSPD pair {X, Y} with a = eps / REDUCE_WSPD
# and short pairs at b = eps * REDUCE_SHORT yields pairs separated at
# 1/tau with tau <= s / (1 - s), s = 2a + 2b(1 + 2a). These constants keep
# tau <= eps for every eps in (0, 1].
REDUCE_WSPD = 12.0
REDUCE_SHORT = 1.0 / 8


@dataclass
class SspdConfig:
    """Parameters of :func:`sspd_optimal`.

    ``long_clusters`` picks the cluster diameter of long pairs: ``"fixed"``
    uses ``eps * r / 20``; ``"gap"`` uses ``eps * (20 r - x)``, the largest
    value for which a cluster stays semi-separated from the outer set.
    With ``reduce`` the result is passed through :func:`reduce_pairs`.
    """

    eps: float = 0.5
    base_threshold: Optional[int] = None
    seed: int = 1
    reduce: bool = False
    long_clusters: str = "gap"
    short_rho: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.base_threshold is not None and self.base_threshold < 2:
            raise ValueError("base threshold must be at least 2")
        if self.short_rho is not None and not 0 < self.short_rho <= self.eps:
            raise ValueError("short_rho must lie in (0, eps]")
        if self.long_clusters not in LONG_CLUSTER_MODES:
            raise ValueError(f"long_clusters must be one of {LONG_CLUSTER_MODES}")

    def n0(self, d: int) -> int:
        if self.base_threshold is not None:
            return self.base_threshold
        return max(32, math.ceil(self.eps ** -d - 1e-9))

    @property
    def rho(self) -> float:
        """Well-separation of short pairs, as an epsilon (separation ``1/rho``).

        Cell boxes bound their points from outside, so ``rho = eps`` already
        makes every short pair well-separated at ``1/eps``. Setting
        ``short_rho <= eps * REDUCE_SHORT`` makes every merge of
        :func:`reduce_pairs` provably valid, at the price of many more
        short pairs.
        """
        return self.eps if self.short_rho is None else self.short_rho




@dataclass
class PartitionStep:
    center: int
    r: float
    x: float
    p_in: np.ndarray
    p_out: np.ndarray
    p_outer: np.ndarray
    level: int = 0

    @property
    def n(self) -> int:
        return len(self.p_in) + len(self.p_out) + len(self.p_outer)


@dataclass
class SspdDiagnostics:
    """Measurements taken at every partition step of :func:`sspd_optimal`.

    ``gaps[k]`` holds ``|p - q| - x`` for the points of
    ``concatenate((steps[k].p_in, steps[k].p_out))`` in that order.
    ``active_levels[k]`` is the number of quadtree depths at which step
    ``k`` emitted short pairs.
    """

    steps: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    active_levels: list = field(default_factory=list)
    long_per_level: dict = field(default_factory=dict)
    short_per_level: dict = field(default_factory=dict)

    def gap_log_ratios(self) -> np.ndarray:
        """``max(0, lg(r / |D_q|))`` over every recorded point of every step."""
        out = []
        for step, D in zip(self.steps, self.gaps):
            if step.r <= 0 or D.size == 0:
                continue
            with np.errstate(divide="ignore"):
                v = np.log2(step.r / np.abs(D))
            out.append(np.maximum(v, 0.0))
        return np.concatenate(out) if out else np.empty(0)

    def claim_proxy(self) -> float:
        v = self.gap_log_ratios()
        return float(v.mean()) if v.size else 0.0


def _singleton_pairs(S: np.ndarray, tag: str, marked=None) -> list:
    out = []
    for a, b in combinations(S.tolist(), 2):
        if marked is None or marked[a] or marked[b]:
            out.append(Pair(np.array([a]), np.array([b]), tag, trusted=True))
    return out


def _check_input(X, P: PointSet, eps: float) -> np.ndarray:
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    X = as_index_set(X)
    P.require_distinct(X)
    return X


# ---------------------------------------------------------------------------
# Simple construction


def _csr_members(mapping: np.ndarray, m: int, Q: np.ndarray):
    order = np.argsort(mapping, kind="stable")
    starts = np.searchsorted(mapping[order], np.arange(m + 1))
    return Q[order], starts


def _expand(ids, members, starts) -> np.ndarray:
    if len(ids) == 1:
        j = int(ids[0])
        return members[starts[j]:starts[j + 1]]
    return np.sort(np.concatenate([members[starts[j]:starts[j + 1]] for j in ids.tolist()]))


def sspd_simple(X, P: PointSet, eps: float, seed: int = 1) -> PairDecomposition:
    """SSPD with ``O(eps^-d log^2 n)`` pairs per point.

    Every step cuts around a ring separator whose ring holds no point,
    pairs the inner ball with everything beyond ``4 r / eps`` directly and
    covers the remaining cut with a WSPD of the snapped inner and middle
    points.
    """
    X = _check_input(X, P, eps)
    d = P.dim
    pairs: list = []
    inQ = np.zeros(P.n, dtype=bool)
    stack = [(X, seed)]
    while stack:
        S, s = stack.pop()
        n = len(S)
        if n <= 1:
            continue
        if n == 2:
            pairs.append(Pair(S[:1], S[1:], "plain", trusted=True))
            continue
        ring = ring_separator(S, P, n, make_rng(s))
        p, r = ring.center_index, ring.radius
        dist = np.linalg.norm(P.coords[S] - P.coords[p], axis=1)
        far = 4 * r / eps
        p_in = S[dist <= r]
        p_out = S[(dist > r) & (dist <= far)]
        p_outer = S[dist > far]
        if p_outer.size:
            pairs.append(Pair(p_in, p_outer, "plain", trusted=True))
        if p_out.size:
            Q = np.union1d(p_in, p_out)
            # the empty ring is r/n thick, wider than a snapped cell, so no
            # cell mixes inner and middle points
            side = eps * (r / (2 * n)) / (2 * math.sqrt(d))
            snapped, mapping = snap_to_grid(Q, P, side)
            members, starts = _csr_members(mapping, snapped.n, Q)
            inQ[:] = False
            inQ[p_in] = True
            labels = inQ[members[starts[:-1]]]
            tree = LevelTree(np.arange(snapped.n), snapped, labels=labels)
            nodes = same_level_pairs(tree, eps / 2, prune=True)
            raw = [Pair(_expand(a, members, starts), _expand(b, members, starts),
                        "plain", trusted=True)
                   for _, a, b in nodes.iter_points(tree)]
            pairs.extend(_split_pairs(raw, inQ))
        rest = np.setdiff1d(S, p_in, assume_unique=True)
        stack.append((rest, derive_seed(s, 1)))
        stack.append((p_in, derive_seed(s, 0)))
    return PairDecomposition(pairs, 1.0 / eps, "sspd", {"construction": "simple"})


# ---------------------------------------------------------------------------
# Optimal construction


def partition_step(S: np.ndarray, P: PointSet, rng, level: int = 0) -> PartitionStep:
    """Random-radius partition of ``S`` around a heavy ball.

    Points at distance exactly ``x`` from the center go to ``p_in``.
    """
    ball = small_ball(S, P, MU, rng)
    p, r = ball.center_index, ball.radius
    x = r * float(rng.uniform(X_LO, X_HI))
    dist = np.linalg.norm(P.coords[S] - P.coords[p], axis=1)
    inside = dist <= x
    outer = dist > MU * r
    step = PartitionStep(p, r, x, S[inside], S[~inside & ~outer], S[outer], level)
    assert X_LO * r <= x <= X_HI * r
    assert step.n == len(S)
    return step


def long_cluster_diameter(eps: float, r: float, x: float, mode: str = "gap") -> float:
    if mode == "fixed":
        return eps * r / 20
    return eps * (MU * r - x)


def sspd_optimal(X, P: PointSet, cfg: Optional[SspdConfig] = None, *, marks=None):
    """Randomized SSPD with ``O(eps^-d log n)`` pairs per point in expectation.

    Returns ``(S, diagnostics)``. Pairs are tagged ``base`` (all singleton
    pairs of a small subproblem), ``long`` (a cluster of the inner ball
    against the far set) or ``short`` (pruned quadtree pairs across the
    ball boundary, split so that they only cover that cut).

    ``marks``, a boolean per point of ``P``, restricts the work to pairs
    touching a marked point. Randomness is split per recursion branch, so
    the result equals the unrestricted decomposition with every pair that
    touches no marked point removed; subsequent splitting by the marked
    set gives identical output either way.
    """
    cfg = SspdConfig() if cfg is None else cfg
    X = _check_input(X, P, cfg.eps)
    eps, rho = cfg.eps, cfg.rho
    n0 = cfg.n0(P.dim)
    marked = None if marks is None else np.asarray(marks, dtype=bool)
    diag = SspdDiagnostics()
    pairs: list = []
    in_mask = np.zeros(P.n, dtype=bool)
    stack = [(X, cfg.seed, 0)]
    while stack:
        S, s, level = stack.pop()
        if len(S) < 2:
            continue
        if marked is not None and not marked[S].any():
            continue
        if len(S) <= n0:
            pairs.extend(_singleton_pairs(S, "base", marked))
            continue
        rng = make_rng(s)
        step = partition_step(S, P, rng, level)
        diag.steps.append(step)
        R = np.union1d(step.p_in, step.p_out)
        in_mask[:] = False
        in_mask[step.p_in] = True
        R_sorted_in = np.concatenate((step.p_in, step.p_out))
        D = np.linalg.norm(P.coords[R_sorted_in] - P.coords[step.center], axis=1) - step.x
        diag.gaps.append(D)

        n_long = 0
        if step.p_outer.size:
            if step.r > 0:
                delta = long_cluster_diameter(eps, step.r, step.x, cfg.long_clusters)
                clusters = cluster_by_diameter(step.p_in, P, delta)
            else:
                clusters = [step.p_in]
            outer_marked = marked is None or marked[step.p_outer].any()
            for C in clusters:
                if outer_marked or marked[C].any():
                    pairs.append(Pair(C, step.p_outer, "long", trusted=True))
                    n_long += 1

        n_short, active = 0, 0
        if step.p_out.size:
            tree = LevelTree(R, P, labels=in_mask[R],
                             marks=None if marked is None else marked[R])
            nodes = same_level_pairs(tree, rho, prune=True, boxes="cells")
            active = sum(1 for a in nodes.a if len(a))
            raw = [Pair(a, b, "short", trusted=True) for _, a, b in nodes.iter_points(tree)]
            split = _split_pairs(raw, in_mask)
            n_short = len(split)
            pairs.extend(split)
        diag.active_levels.append(active)
        diag.long_per_level[level] = diag.long_per_level.get(level, 0) + n_long
        diag.short_per_level[level] = diag.short_per_level.get(level, 0) + n_short

        rest = np.union1d(step.p_out, step.p_outer)
        stack.append((rest, derive_seed(s, 1), level + 1))
        stack.append((step.p_in, derive_seed(s, 0), level + 1))
    meta = {"construction": "optimal", "short_rho": rho, "eps": eps,
            "long_clusters": cfg.long_clusters}
    S = PairDecomposition(pairs, 1.0 / eps, "sspd", meta)
    if cfg.reduce:
        S = reduce_pairs(S, P, eps)
    return S, diag


# ---------------------------------------------------------------------------
# Pair-count reduction


def reduce_pairs(S: PairDecomposition, P: PointSet, eps: float, *,
                 check: bool = True) -> PairDecomposition:
    """Merge the short pairs of ``S`` that lie under a common WSPD pair.

    Each short pair is assigned, through the smallest points of its two
    sides, to the pair of a WSPD of the decomposed points (its pairs are
    never materialized); each group is replaced by the componentwise
    union of its members. Long and base pairs pass through.

    Two regimes, chosen by the short-pair separation recorded in
    ``S.meta``:

    * ``short_rho <= eps * REDUCE_SHORT``: the WSPD runs at
      ``REDUCE_WSPD / eps`` and every merge is guaranteed valid; with
      ``check`` each merged pair is verified well-separated at ``1/eps``
      and a violation raises.
    * coarser short pairs: the WSPD runs at ``1/eps`` and a group is
      merged only if its union passes the exact well-separation test at
      ``1/eps``; otherwise its members are kept unchanged.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if any(p.tag not in ("long", "short", "base", "merged") for p in S):
        raise DecompositionError("untagged decomposition")
    rho = S.meta.get("short_rho")
    if rho is None:
        raise DecompositionError("decomposition does not record its short-pair separation")
    guaranteed = rho <= eps * REDUCE_SHORT * (1 + 1e-12)
    meta = dict(S.meta, reduced=True, merge="guaranteed" if guaranteed else "verified")
    out = [p for p in S if p.tag != "short"]
    shorts = [p for p in S if p.tag == "short"]
    if not shorts:
        return PairDecomposition(out, S.separation, S.kind, meta)
    idx = np.unique(np.concatenate([np.concatenate((p.left, p.right)) for p in shorts]))
    tree = CompressedQuadtree(idx, P)
    index = WspdIndex(tree, eps / REDUCE_WSPD if guaranteed else eps)
    q = np.fromiter((p.left[0] for p in shorts), dtype=np.int64, count=len(shorts))
    r = np.fromiter((p.right[0] for p in shorts), dtype=np.int64, count=len(shorts))
    U, V = locate_pairs(index, q, r)
    swap = U > V
    keys = np.where(swap, V, U) * len(tree) + np.where(swap, U, V)
    order = np.argsort(keys, kind="stable")
    bounds = np.flatnonzero(np.diff(keys[order])) + 1
    for grp in np.split(order, bounds):
        if len(grp) == 1:
            p = shorts[grp[0]]
            out.append(Pair(p.left, p.right, "merged", trusted=True))
            continue
        A = np.unique(np.concatenate([shorts[i].right if swap[i] else shorts[i].left
                                      for i in grp.tolist()]))
        B = np.unique(np.concatenate([shorts[i].left if swap[i] else shorts[i].right
                                      for i in grp.tolist()]))
        if guaranteed and not check:
            out.append(Pair(A, B, "merged", trusted=True))
            continue
        ok = (np.intersect1d(A, B, assume_unique=True).size == 0
              and check_separation(A, B, P, 1.0 / eps, "well"))
        if ok:
            out.append(Pair(A, B, "merged", trusted=True))
        elif guaranteed:
            raise DecompositionError("merged pair violates separation")
        else:
            out.extend(shorts[i] for i in sorted(grp.tolist()))
    return PairDecomposition(out, S.separation, S.kind, meta)
