"""Pair decompositions: data model, separation predicates, splitting, oracles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .geometry import GeometryError, PointSet, as_index_set, diameter, set_distance

TAGS = ("long", "short", "base", "stageA", "stageB", "stageC", "merged", "plain")

ORACLE_LIMIT = 4096
_COVERAGE_CHUNK = 1 << 22


class DecompositionError(ValueError):
    pass


class OracleTooLarge(DecompositionError):
    pass


class Pair:
    """Two disjoint nonempty index sets plus a provenance tag.

    Sides are stored sorted and oriented so that ``left[0] < right[0]``;
    since the sides are disjoint this is the lexicographic order.
    """

    __slots__ = ("left", "right", "tag")

    def __init__(self, left, right, tag: str = "plain", *, trusted: bool = False):
        if not trusted:
            left = as_index_set(left)
            right = as_index_set(right)
            if left.size == 0 or right.size == 0:
                raise DecompositionError("pair sides must be nonempty")
        if right[0] < left[0]:
            left, right = right, left
        self.left = left
        self.right = right
        self.tag = tag

    @property
    def size(self) -> int:
        return len(self.left) + len(self.right)

    def key(self):
        return (tuple(self.left.tolist()), tuple(self.right.tolist()))

    def is_disjoint(self) -> bool:
        return np.intersect1d(self.left, self.right, assume_unique=True).size == 0

    def __eq__(self, other):
        if not isinstance(other, Pair):
            return NotImplemented
        return (self.tag == other.tag and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right))

    def __hash__(self):
        return hash((self.key(), self.tag))

    def __repr__(self):
        def fmt(a):
            s = " ".join(map(str, a[:6].tolist()))
            return s + (" ..." if len(a) > 6 else "")
        return f"Pair({self.tag}: [{fmt(self.left)}] | [{fmt(self.right)}])"


@dataclass
class PairDecomposition:
    """A list of pairs claiming ``separation``-semi (or well) separation.

    ``meta`` carries construction facts later stages rely on, e.g. the
    well-separation guaranteed for short pairs before splitting.
    """

    pairs: list
    separation: float
    kind: str = "sspd"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("wspd", "sspd"):
            raise DecompositionError(f"unknown decomposition kind {self.kind!r}")
        if not self.separation > 0:
            raise DecompositionError("separation must be positive")

    def __len__(self):
        return len(self.pairs)

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.pairs)

    @property
    def mode(self) -> str:
        return "well" if self.kind == "wspd" else "semi"

    @property
    def weight(self) -> int:
        return sum(p.size for p in self.pairs)

    def tag_counts(self) -> dict:
        out: dict = {}
        for p in self.pairs:
            out[p.tag] = out.get(p.tag, 0) + 1
        return out


@dataclass
class DecompositionStats:
    pair_count: int
    weight: int
    max_pairs_per_point: int
    per_point_histogram: list
    per_point: np.ndarray = field(repr=False, default=None)


def per_point_counts(W: Iterable[Pair], n: int) -> np.ndarray:
    """Number of pairs containing each point (either side)."""
    counts = np.zeros(n, dtype=np.int64)
    buf, size = [], 0
    for p in W:
        buf.append(p.left)
        buf.append(p.right)
        size += p.size
        if size > 1 << 22:
            counts += np.bincount(np.concatenate(buf), minlength=n)
            buf, size = [], 0
    if buf:
        counts += np.bincount(np.concatenate(buf), minlength=n)
    return counts


def decomposition_stats(W: PairDecomposition, P: PointSet) -> DecompositionStats:
    counts = per_point_counts(W, P.n)
    hist = np.bincount(counts).tolist() if P.n else []
    return DecompositionStats(
        pair_count=len(W),
        weight=int(counts.sum()),
        max_pairs_per_point=int(counts.max()) if P.n else 0,
        per_point_histogram=hist,
        per_point=counts,
    )


def check_separation(X, Y, P: PointSet, s: float, mode: str = "semi") -> bool:
    """Exact test that ``X`` and ``Y`` are ``s``-separated.

    ``semi``: min(diam X, diam Y) <= dist(X, Y) / s.
    ``well``: max(diam X, diam Y) <= dist(X, Y) / s.
    """
    X = as_index_set(X)
    Y = as_index_set(Y)
    if X.size == 0 or Y.size == 0:
        raise GeometryError("empty-set distance undefined")
    if np.intersect1d(X, Y, assume_unique=True).size:
        raise DecompositionError("pair sides overlap")
    if mode not in ("semi", "well"):
        raise DecompositionError(f"unknown separation mode {mode!r}")
    eps = 1.0 / s
    bound = eps * set_distance(X, Y, P)
    small, big = (X, Y) if len(X) <= len(Y) else (Y, X)
    d_small = diameter(small, P, "exact")
    if mode == "semi":
        if d_small <= bound:
            return True
        return diameter(big, P, "exact") <= bound
    if d_small > bound:
        return False
    return diameter(big, P, "exact") <= bound


def failing_pairs(W: PairDecomposition, P: PointSet, s: Optional[float] = None,
                  mode: Optional[str] = None) -> list:
    """Pairs of ``W`` that fail the exact separation test."""
    s = W.separation if s is None else s
    mode = W.mode if mode is None else mode
    out = []
    for p in W:
        a, b = len(p.left), len(p.right)
        # a singleton side has diameter 0, which settles the test exactly
        if (a == 1 and b == 1) or (mode == "semi" and (a == 1 or b == 1)):
            single, other = (p.left, p.right) if a == 1 else (p.right, p.left)
            if not np.any(other == single[0]):
                continue
        if not check_separation(p.left, p.right, P, s, mode):
            out.append(p)
    return out


def split_decomposition(W: PairDecomposition, Q, P: PointSet, tag: Optional[str] = None
                        ) -> PairDecomposition:
    """Restrict ``W`` to the cut ``Q x (P \\ Q)``.

    Each pair {X, Y} becomes {X & Q, Y - Q} and {X - Q, Y & Q}; pairs with an
    empty side are dropped.
    """
    inQ = np.zeros(P.n, dtype=bool)
    inQ[as_index_set(Q)] = True
    out = _split_pairs(W.pairs, inQ, tag)
    return PairDecomposition(out, W.separation, W.kind, dict(W.meta))


def _split_pairs(pairs, inQ: np.ndarray, tag: Optional[str] = None) -> list:
    out = []
    for p in pairs:
        t = p.tag if tag is None else tag
        mL = inQ[p.left]
        mR = inQ[p.right]
        if mL.all():
            if not mR.all():
                out.append(Pair(p.left, p.right[~mR], t, trusted=True))
            continue
        if not mL.any():
            if mR.any():
                out.append(Pair(p.left, p.right[mR], t, trusted=True))
            continue
        if not mR.all():
            out.append(Pair(p.left[mL], p.right[~mR], t, trusted=True))
        if mR.any():
            out.append(Pair(p.left[~mL], p.right[mR], t, trusted=True))
    return out


@dataclass
class CoverageReport:
    ok: bool
    missing_pairs: np.ndarray
    unexpected_pairs: np.ndarray
    multiplicity_histogram: list
    overlapping_pairs: int = 0

    @property
    def n_missing(self) -> int:
        return len(self.missing_pairs)


def cut(Q):
    """Expectation marker for :func:`verify_coverage`: pairs crossing ``Q``."""
    return ("cut", as_index_set(Q))


def verify_coverage(W, P: PointSet, expect="all", exactly_once: bool = False,
                    domain=None) -> CoverageReport:
    """Exhaustively count how often each point pair is covered by ``W``.

    ``expect`` is ``"all"`` (every pair within ``domain``) or ``cut(Q)``
    (pairs with exactly one endpoint in ``Q``). Pairs covered although not
    expected are reported and make the check fail.
    """
    n = P.n
    if n > ORACLE_LIMIT:
        raise OracleTooLarge("oracle too large")
    pairs = W.pairs if isinstance(W, PairDecomposition) else list(W)
    counts = np.zeros(n * n, dtype=np.int64)
    overlaps = 0
    blocks, pids, size = [], [], 0

    def flush():
        nonlocal overlaps
        flat = np.concatenate(blocks)
        counts[:] += np.bincount(flat, minlength=n * n)
        diag = flat // n == flat % n
        if diag.any():
            overlaps += np.unique(np.concatenate(pids)[diag]).size

    for k, p in enumerate(pairs):
        cell = (p.left[:, None] * n + p.right[None, :]).ravel()
        blocks.append(cell)
        pids.append(np.full(cell.size, k))
        size += cell.size
        if size >= _COVERAGE_CHUNK:
            flush()
            blocks, pids, size = [], [], 0
    if blocks:
        flush()
    M = counts.reshape(n, n)
    M = M + M.T
    iu, ju = np.triu_indices(n, k=1)
    mult = M[iu, ju]
    dom = np.zeros(n, dtype=bool)
    dom[P.all_indices() if domain is None else as_index_set(domain)] = True
    if isinstance(expect, str):
        if expect != "all":
            raise DecompositionError(f"unknown expectation {expect!r}")
        want = dom[iu] & dom[ju]
    else:
        inQ = np.zeros(n, dtype=bool)
        inQ[expect[1]] = True
        want = dom[iu] & dom[ju] & (inQ[iu] != inQ[ju])
    missing = np.flatnonzero(want & (mult == 0))
    extra = np.flatnonzero(~want & (mult > 0))
    hist = np.bincount(mult[want]).tolist() if want.any() else []
    ok = missing.size == 0 and extra.size == 0 and overlaps == 0
    if exactly_once and want.any() and mult[want].max() > 1:
        ok = False
    return CoverageReport(
        ok=bool(ok),
        missing_pairs=np.stack([iu[missing], ju[missing]], axis=1),
        unexpected_pairs=np.stack([iu[extra], ju[extra]], axis=1),
        multiplicity_histogram=hist,
        overlapping_pairs=overlaps,
    )


def write_decomposition(W: PairDecomposition, fh) -> None:
    """One pair per line: ``TAG | i1 i2 ... | j1 j2 ...``."""
    for p in W:
        fh.write(f"{p.tag} | {' '.join(map(str, p.left.tolist()))} | "
                 f"{' '.join(map(str, p.right.tolist()))}\n")


def read_decomposition(fh, separation: float = 1.0, kind: str = "sspd") -> PairDecomposition:
    pairs = []
    for line in fh:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tag, left, right = (part.strip() for part in line.split("|"))
        pairs.append(Pair(np.array(left.split(), dtype=np.int64),
                          np.array(right.split(), dtype=np.int64), tag))
    return PairDecomposition(pairs, separation, kind)
