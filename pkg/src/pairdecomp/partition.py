"""Randomized heavy-ball and ring-separator searches.

Both are Las Vegas: the returned ball always satisfies its count
guarantees exactly, only the number of attempts is random.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, PointSet, as_index_set

START_C = 8
ATTEMPTS_PER_C = 16


@dataclass
class BallResult:
    center_index: int
    radius: float
    effective_c: int
    iterations: int
    inside: int
    inside_mu: int
    mu: float
    n: int


@dataclass
class RingResult:
    center_index: int
    radius: float
    t: int
    alpha: float
    effective_c: int
    inside: int
    ring: int
    outside2r: int
    n: int

    @property
    def counts(self) -> dict:
        return {"inside": self.inside, "ring": self.ring, "outside2r": self.outside2r}


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def small_ball(X, P: PointSet, mu: float, rng=None) -> BallResult:
    """Ball ``b(p, r)`` around a point of ``X`` holding at least
    ``n / effective_c`` points while ``b(p, mu * r)`` holds at most ``n / 2``.

    A random center is tried with ``r`` its distance to the
    ``ceil(n / c)``-th nearest point of ``X`` (itself included). After
    ``ATTEMPTS_PER_C`` failures the density constant ``c`` doubles; once
    ``ceil(n / c) == 1`` the radius is zero and any center is accepted.
    """
    if mu < 1:
        raise ValueError("mu must be at least 1")
    X = as_index_set(X)
    n = len(X)
    if n < 2:
        raise GeometryError("small_ball needs at least two points")
    rng = _rng(rng)
    C = P.coords[X]
    c = START_C
    it = 0
    while True:
        k = max(1, math.ceil(n / c))
        for _ in range(ATTEMPTS_PER_C):
            it += 1
            i = int(rng.integers(n))
            d = np.sqrt(((C - C[i]) ** 2).sum(axis=1))
            r = float(np.partition(d, k - 1)[k - 1]) if k > 1 else 0.0
            inside_mu = int(np.count_nonzero(d <= mu * r))
            if 2 * inside_mu <= n:
                inside = int(np.count_nonzero(d <= r))
                return BallResult(int(X[i]), r, c, it, inside, inside_mu, mu, n)
        c *= 2


def grid_constants(mu: float, d: int) -> tuple:
    """Worst-case density constants ``(c', c)`` of the heavy-ball argument.

    A ball of radius ``mu * r`` meets at most ``(2 mu sqrt(d) + 1)^d`` grid
    cells of side ``r``; the search succeeds with constant probability
    once ``c >= 2 c'``. The adaptive search never needs a constant this
    large in practice.
    """
    cp = (2 * mu * math.sqrt(d) + 1) ** d
    return cp, 2 * cp


def ring_radii(alpha: float, t: int) -> np.ndarray:
    """``r_i = alpha (1 + 1/t)^i`` for ``i = 0..t``, each an exact float
    product of its predecessor so that ``r_{i-1} * (1 + 1/t) == r_i``."""
    q = 1.0 + 1.0 / t
    radii = [alpha]
    for _ in range(t):
        radii.append(radii[-1] * q)
    return np.array(radii)


def ring_separator(X, P: PointSet, t: int, rng=None) -> RingResult:
    """Ball ``b(p, r)`` with a sparse ring just outside it.

    Guarantees, checked exactly on return: ``|b(p,r)| >= n / effective_c``,
    ``|Ring(p, r, r(1 + 1/t))| <= n / (2t)`` and ``|X - b(p, 2r)| >= n / 2``.
    """
    t = int(t)
    if t < 1:
        raise ValueError("t must be at least 1")
    X = as_index_set(X)
    n = len(X)
    ball = small_ball(X, P, 8.0, rng)
    alpha = ball.radius
    d = np.linalg.norm(P.coords[X] - P.coords[ball.center_index], axis=1)
    radii = ring_radii(alpha, t)
    which = np.searchsorted(radii, d, side="left")
    in_rings = (which >= 1) & (which <= t) & (d > alpha)
    counts = np.bincount(which[in_rings], minlength=t + 1)[1:]
    light = np.flatnonzero(2 * t * counts <= n)
    i = int(light[0]) + 1
    r = float(radii[i - 1])
    outer = r * (1.0 + 1.0 / t)
    res = RingResult(
        center_index=ball.center_index, radius=r, t=t, alpha=alpha,
        effective_c=ball.effective_c,
        inside=int(np.count_nonzero(d <= r)),
        ring=int(np.count_nonzero((d > r) & (d <= outer))),
        outside2r=int(np.count_nonzero(d > 2 * r)),
        n=n,
    )
    assert res.inside * res.effective_c >= n
    assert 2 * t * res.ring <= n
    assert 2 * res.outside2r >= n
    return res
