"""SSPDs built around ring separators, and the spanner separators they give.

Each recursion step finds a ball ``b(p, r)`` whose thin shell
``Ring(p, r, r (1 + 1/t))`` is sparse. Cut pairs are covered in three
stages: everything touching the ring (A), the ball against points beyond
``2r`` (B), and the ball against the annulus out to ``2r`` through a WSPD
of the snapped points, which needs only constant separation because the
shell is empty of both sides (C). A spanner built from the decomposition
then has no edge from the ball to the outside except through the ring
points or the hubs of top-level B and C pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import GeometryError, PointSet, as_index_set, cluster_by_diameter, snap_to_grid
from .pairs import Pair, PairDecomposition, _split_pairs
from .partition import ring_separator
from .quadtree import LevelTree, same_level_pairs
from .seeding import derive_seed, make_rng
from .spanner import HubRecord, SpannerGraph, spanner_from_sspd
from .sspd import SspdConfig, _check_input, _csr_members, _expand, _singleton_pairs, sspd_optimal

MILD_WSPD_EPS = 1.0
STAGE_B_MODES = ("fixed", "gap")
MAX_RETRIES = 8
SPANNER_MARGIN = 16.0


@dataclass(frozen=True)
class RingGap:
    """Points within ``r`` of ``center`` versus points in ``(outer, R]``.

    ``outer`` defaults to ``r + thickness``; callers holding the exact outer
    radius of a ring pass it to avoid a rounding mismatch.
    """

    center: int
    r: float
    thickness: float
    R: float
    outer: Optional[float] = None

    def __post_init__(self):
        if not (self.r >= 0 and self.thickness > 0 and self.R >= self.r + self.thickness):
            raise GeometryError("ring gap needs r >= 0, thickness > 0 and R >= r + thickness")

    @property
    def outer_radius(self) -> float:
        return self.r + self.thickness if self.outer is None else self.outer

    def check(self, Pin, Pout, P: PointSet) -> None:
        """Raise with a witness point if either side leaves its region."""
        c = P.coords[self.center]
        Pin, Pout = as_index_set(Pin), as_index_set(Pout)
        din = np.linalg.norm(P.coords[Pin] - c, axis=1)
        bad = np.flatnonzero(din > self.r)
        if bad.size:
            raise GeometryError(f"inner point {int(Pin[bad[0]])} lies outside radius {self.r!r}")
        dout = np.linalg.norm(P.coords[Pout] - c, axis=1)
        bad = np.flatnonzero((dout <= self.outer_radius) | (dout > self.R))
        if bad.size:
            raise GeometryError(f"outer point {int(Pout[bad[0]])} lies outside the annulus "
                                f"({self.outer_radius!r}, {self.R!r}]")


@dataclass
class SeparatorCertificate:
    separator: np.ndarray
    side_a: np.ndarray
    side_b: np.ndarray


@dataclass
class SeparatorReport:
    ok: bool
    crossing_edges: list
    reason: str = ""


@dataclass
class TopLevelRecord:
    """The first partition step of :func:`sspd_with_separator`.

    ``stage_b`` and ``stage_c`` are ``(start, stop)`` slices of the pair
    list holding the pairs those stages produced at this step.
    """

    center: int
    r: float
    r_outer: float
    t: int
    effective_c: int
    p_in: np.ndarray
    p_ring: np.ndarray
    p_out: np.ndarray
    p_outer: np.ndarray
    stage_b: tuple = (0, 0)
    stage_c: tuple = (0, 0)
    seed: int = 0


def mild_wspd(Pin, Pout, gap: RingGap, P: PointSet, eps: float) -> list:
    """Pairs covering ``Pin x Pout`` at separation 1, before refinement.

    Points are snapped to a grid of side ``eps * thickness / (8 d)`` and a
    WSPD of the snapped points is restricted to the cut.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    Pin, Pout = as_index_set(Pin), as_index_set(Pout)
    if Pin.size == 0 or Pout.size == 0:
        return []
    gap.check(Pin, Pout, P)
    Q = np.union1d(Pin, Pout)
    side = eps * gap.thickness / (8 * P.dim)
    snapped, mapping = snap_to_grid(Q, P, side)
    members, starts = _csr_members(mapping, snapped.n, Q)
    in_mask = np.zeros(P.n, dtype=bool)
    in_mask[Pin] = True
    labels = in_mask[members[starts[:-1]]]
    tree = LevelTree(np.arange(snapped.n), snapped, labels=labels)
    nodes = same_level_pairs(tree, MILD_WSPD_EPS, prune=True)
    raw = [Pair(_expand(a, members, starts), _expand(b, members, starts), "stageC", trusted=True)
           for _, a, b in nodes.iter_points(tree)]
    return _split_pairs(raw, in_mask)


def mild_sspd(Pin, Pout, gap: RingGap, P: PointSet, eps: float) -> list:
    """Semi-separated pairs covering ``Pin x Pout`` across an empty ring gap.

    Each pair of :func:`mild_wspd` has its side of smaller approximate
    diameter cut into clusters of diameter ``eps / 4`` times that diameter.
    """
    out = []
    C = P.coords
    for pr in mild_wspd(Pin, Pout, gap, P, eps):
        dl = _approx(pr.left, C)
        dr = _approx(pr.right, C)
        small, big = (pr.left, pr.right) if dl <= dr else (pr.right, pr.left)
        dsmall = min(dl, dr)
        if dsmall == 0:
            out.append(pr)
            continue
        for K in cluster_by_diameter(small, P, eps * dsmall / 4):
            out.append(Pair(K, big, "stageC", trusted=True))
    return out


def _approx(A: np.ndarray, C: np.ndarray) -> float:
    if len(A) < 2:
        return 0.0
    return float(np.sqrt(((C[A] - C[A[0]]) ** 2).sum(axis=1).max()))


def stage_b_diameter(eps: float, r: float, mode: str = "fixed") -> float:
    """Cluster diameter for the ball-versus-far pairs.

    Points beyond ``2r`` are at least ``r`` from the ball, so ``eps * r``
    is the largest diameter keeping each cluster semi-separated.
    """
    if mode == "fixed":
        return eps * r / 10
    return eps * r


def ring_parameter(n: int, d: int) -> int:
    return max(1, math.ceil(0.5 * n ** (1.0 / d)))


def sspd_with_separator(X, P: PointSet, eps: float, seed: int = 1, *,
                        stage_b: str = "fixed", n0: Optional[int] = None,
                        trace: Optional[list] = None):
    """SSPD whose top-level step exposes a ring separator.

    Returns ``(S, record)`` with pairs tagged ``stageA``/``stageB``/
    ``stageC`` (and ``base`` for small recursive subproblems) and the
    record of the first partition step. If ``trace`` is a list, one
    ``(level, n, t, ring size)`` tuple is appended per partition step.
    """
    if stage_b not in STAGE_B_MODES:
        raise ValueError(f"stage_b must be one of {STAGE_B_MODES}")
    X = _check_input(X, P, eps)
    d = P.dim
    n0 = SspdConfig(eps=eps).n0(d) if n0 is None else int(n0)
    pairs: list = []
    record = None
    ring_mask = np.zeros(P.n, dtype=bool)
    stack = [(X, int(seed), 0)]
    while stack:
        S, s, level = stack.pop()
        n = len(S)
        if n < 2:
            continue
        if level > 0 and n <= n0:
            pairs.extend(_singleton_pairs(S, "base"))
            continue
        t = ring_parameter(n, d)
        ring = ring_separator(S, P, t, make_rng(s))
        p, r = ring.center_index, ring.radius
        r_outer = r * (1.0 + 1.0 / t)
        dist = np.linalg.norm(P.coords[S] - P.coords[p], axis=1)
        p_in = S[dist <= r]
        p_ring = S[(dist > r) & (dist <= r_outer)]
        p_out = S[(dist > r_outer) & (dist <= 2 * r)]
        p_outer = S[dist > 2 * r]
        if trace is not None:
            trace.append((level, n, t, len(p_ring)))

        if p_ring.size:
            ring_mask[:] = False
            ring_mask[p_ring] = True
            A, _ = sspd_optimal(S, P, SspdConfig(eps=eps, seed=derive_seed(s, 10)), marks=ring_mask)
            pairs.extend(_split_pairs(A.pairs, ring_mask, "stageA"))

        b0 = len(pairs)
        if p_outer.size:
            clusters = [p_in] if r == 0 else cluster_by_diameter(p_in, P, stage_b_diameter(eps, r, stage_b))
            pairs.extend(Pair(K, p_outer, "stageB", trusted=True) for K in clusters)
        c0 = len(pairs)
        if p_out.size:
            gap = RingGap(p, r, r_outer - r, 2 * r, outer=r_outer)
            pairs.extend(mild_sspd(p_in, p_out, gap, P, eps))
        c1 = len(pairs)

        if level == 0:
            record = TopLevelRecord(p, r, r_outer, t, ring.effective_c, p_in, p_ring, p_out,
                                    p_outer, (b0, c0), (c0, c1), int(seed))
        rest = np.union1d(p_out, p_outer)
        stack.append((rest, derive_seed(s, 2), level + 1))
        stack.append((p_ring, derive_seed(s, 1), level + 1))
        stack.append((p_in, derive_seed(s, 0), level + 1))
    meta = {"construction": "separator", "eps": eps, "stage_b": stage_b}
    return PairDecomposition(pairs, 1.0 / eps, "sspd", meta), record


@dataclass
class SeparatorBuild:
    graph: SpannerGraph
    certificate: SeparatorCertificate
    sspd: PairDecomposition
    hubs: HubRecord
    record: TopLevelRecord
    attempts: int
    sspd_eps: float = 0.0
    notes: dict = field(default_factory=dict)


def separator_from_record(record: TopLevelRecord, hubs: HubRecord) -> SeparatorCertificate:
    lo_b, hi_b = record.stage_b
    lo_c, hi_c = record.stage_c
    hub_ids = np.concatenate((hubs.hubs[lo_b:hi_b], hubs.hubs[lo_c:hi_c]))
    sep = np.union1d(record.p_ring, hub_ids).astype(np.int64)
    side_a = np.setdiff1d(record.p_in, sep, assume_unique=False)
    side_b = np.setdiff1d(np.union1d(record.p_out, record.p_outer), sep, assume_unique=False)
    return SeparatorCertificate(sep, side_a, side_b)


def separator_spanner_build(X, P: PointSet, eps: float, seed: int = 1, *,
                            sspd_eps: Optional[float] = None, stage_b: str = "fixed",
                            diameter_mode: str = "approx") -> SeparatorBuild:
    """Spanner with a certified balanced separator.

    The spanner is built from :func:`sspd_with_separator` run at
    ``sspd_eps`` (default ``eps / 16``, the separation the hub spanner
    needs with approximate diameters). A split with an empty side is
    retried with derived seeds, up to ``MAX_RETRIES`` times.
    """
    X = _check_input(X, P, eps)
    if len(X) < 2:
        raise GeometryError("separator needs at least two points")
    margin = SPANNER_MARGIN if diameter_mode == "approx" else SPANNER_MARGIN / 2
    if sspd_eps is None:
        sspd_eps = eps / margin
    s = int(seed)
    for attempt in range(1, MAX_RETRIES + 1):
        S, rec = sspd_with_separator(X, P, sspd_eps, s, stage_b=stage_b)
        G, hubs = spanner_from_sspd(S, P, eps, diameter_mode=diameter_mode,
                                    require_margin=sspd_eps <= eps / margin)
        cert = separator_from_record(rec, hubs)
        if cert.side_a.size and cert.side_b.size:
            return SeparatorBuild(G, cert, S, hubs, rec, attempt, sspd_eps)
        s = derive_seed(int(seed), 100 + attempt)
    raise GeometryError(f"degenerate separator after {MAX_RETRIES} attempts")


def verify_separator(G: SpannerGraph, cert: SeparatorCertificate, universe=None) -> SeparatorReport:
    """Check that the three sets partition the vertices and no edge joins
    the two sides. Scans every edge."""
    sep, a, b = (as_index_set(x) for x in (cert.separator, cert.side_a, cert.side_b))
    U = np.arange(G.n) if universe is None else as_index_set(universe)
    owner = np.full(G.n, -1, dtype=np.int64)
    for k, part in enumerate((sep, a, b)):
        if part.size and (owner[part] != -1).any():
            return SeparatorReport(False, [], "sets overlap")
        owner[part] = k
    covered = np.flatnonzero(owner != -1)
    if not np.array_equal(covered, U):
        return SeparatorReport(False, [], "sets do not partition the vertices")
    E = G.edges
    if len(E):
        ou, ov = owner[E[:, 0]], owner[E[:, 1]]
        bad = ((ou == 1) & (ov == 2)) | ((ou == 2) & (ov == 1))
        if bad.any():
            return SeparatorReport(False, [tuple(e) for e in E[bad].tolist()], "edge crosses sides")
    return SeparatorReport(True, [])


def write_certificate(cert: SeparatorCertificate, fh) -> None:
    for label, part in (("SEP", cert.separator), ("A", cert.side_a), ("B", cert.side_b)):
        fh.write(label + ":" + "".join(f" {int(i)}" for i in part) + "\n")
