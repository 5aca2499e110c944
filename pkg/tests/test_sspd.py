import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairdecomp import (Pair, PairDecomposition, PointSet, SspdConfig, cut, decomposition_stats,
                        reduce_pairs, split_decomposition, sspd_optimal, sspd_simple,
                        verify_coverage)
from pairdecomp.geometry import GeometryError
from pairdecomp.pairs import DecompositionError, failing_pairs
from pairdecomp.seeding import make_rng
from pairdecomp.sspd import X_HI, X_LO, partition_step

from conftest import point_sets, uniform


def assert_valid(S, P):
    assert verify_coverage(S, P).ok
    assert not failing_pairs(S, P)


class TestSimple:
    def test_two_points(self):
        P = PointSet([[0, 0], [1, 1]])
        S = sspd_simple([0, 1], P, 0.5)
        assert [p.key() for p in S] == [((0,), (1,))]

    def test_collinear_far_point(self):
        P = PointSet([[0.0], [1.0], [100.0]])
        assert_valid(sspd_simple([0, 1, 2], P, 0.5), P)

    def test_pairs_per_point_polylog(self):
        mp = [decomposition_stats(sspd_simple(np.arange(n), uniform(n, seed=n), 0.5),
                                  uniform(n, seed=n)).max_pairs_per_point for n in (64, 256)]
        assert mp[1] <= 4 * mp[0]

    @settings(max_examples=25)
    @given(point_sets(max_n=40), st.sampled_from([0.25, 0.5, 1.0]), st.integers(0, 1000))
    def test_valid(self, P, eps, seed):
        assert_valid(sspd_simple(P.all_indices(), P, eps, seed), P)

    def test_duplicates_rejected(self):
        with pytest.raises(GeometryError, match="duplicate"):
            sspd_simple([0, 1, 2], PointSet([[0, 0], [0, 0], [1, 1]]), 0.5)


class TestOptimal:
    def test_base_case(self):
        P = PointSet([[0, 0], [1, 0], [0, 3]])
        S, _ = sspd_optimal([0, 1, 2], P)
        assert len(S) == 3 and S.tag_counts() == {"base": 3}

    def test_radius_draw_range(self):
        P = uniform(200, seed=1)
        rng = make_rng(3)
        for _ in range(20):
            step = partition_step(P.all_indices(), P, rng)
            assert X_LO * step.r <= step.x <= X_HI * step.r
            assert step.n == P.n

    def test_uniform_256(self):
        P = uniform(256, seed=5)
        S, diag = sspd_optimal(P.all_indices(), P, SspdConfig(eps=0.5, seed=2))
        assert_valid(S, P)
        assert set(S.tag_counts()) <= {"long", "short", "base"}
        assert diag.claim_proxy() <= 4.5

    @settings(max_examples=25)
    @given(point_sets(max_n=60), st.sampled_from([0.25, 0.5, 1.0]), st.integers(0, 1000),
           st.sampled_from(["gap", "fixed"]))
    def test_valid_with_small_base(self, P, eps, seed, mode):
        cfg = SspdConfig(eps=eps, seed=seed, base_threshold=4, long_clusters=mode)
        S, _ = sspd_optimal(P.all_indices(), P, cfg)
        assert_valid(S, P)

    @settings(max_examples=15)
    @given(point_sets(min_n=10, max_n=60), st.integers(0, 1000))
    def test_marks_restriction_matches_full_run(self, P, seed):
        rng = np.random.default_rng(seed)
        marks = rng.random(P.n) < 0.2
        cfg = SspdConfig(eps=0.5, seed=seed, base_threshold=4)
        full, _ = sspd_optimal(P.all_indices(), P, cfg)
        part, _ = sspd_optimal(P.all_indices(), P, cfg, marks=marks)
        Q = np.flatnonzero(marks)
        a = sorted(p.key() for p in split_decomposition(full, Q, P))
        b = sorted(p.key() for p in split_decomposition(part, Q, P))
        assert a == b

    def test_deterministic(self):
        P = uniform(300, seed=8)
        a, _ = sspd_optimal(P.all_indices(), P, SspdConfig(seed=4))
        b, _ = sspd_optimal(P.all_indices(), P, SspdConfig(seed=4))
        assert [p.key() for p in a] == [p.key() for p in b]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SspdConfig(eps=0)
        with pytest.raises(ValueError):
            SspdConfig(eps=0.5, short_rho=0.6)
        with pytest.raises(ValueError):
            SspdConfig(long_clusters="nope")
        assert SspdConfig(eps=0.25).n0(3) == 64 and SspdConfig(eps=1).n0(2) == 32


class TestReduce:
    def _short(self, pairs, rho=0.5):
        return PairDecomposition([Pair(a, b, "short") for a, b in pairs], 2.0, "sspd",
                                 {"short_rho": rho})

    def test_single_short_pair(self):
        P = PointSet([[0, 0], [10, 0]])
        R = reduce_pairs(self._short([([0], [1])]), P, 0.5)
        assert [(p.key(), p.tag) for p in R] == [(((0,), (1,)), "merged")]

    def test_two_pairs_merge(self):
        P = PointSet([[0, 0], [0.1, 0], [10, 0], [10.1, 0]])
        R = reduce_pairs(self._short([([0], [2]), ([1], [3])]), P, 0.5)
        assert [p.key() for p in R] == [((0, 1), (2, 3))]

    def test_rejects_untagged(self):
        S = PairDecomposition([Pair([0], [1], "plain")], 2.0, "sspd", {"short_rho": 0.5})
        with pytest.raises(DecompositionError):
            reduce_pairs(S, PointSet([[0, 0], [1, 0]]), 0.5)

    @settings(max_examples=20)
    @given(point_sets(max_n=60), st.sampled_from([0.25, 0.5, 1.0]), st.integers(0, 1000))
    def test_valid_both_regimes(self, P, eps, seed):
        for rho in (None, eps / 8):
            cfg = SspdConfig(eps=eps, seed=seed, base_threshold=4, short_rho=rho, reduce=True)
            S, _ = sspd_optimal(P.all_indices(), P, cfg)
            assert S.meta["reduced"]
            assert_valid(S, P)

    def test_pair_count_stable(self):
        per_n = []
        for n in (512, 1024):
            P = uniform(n, seed=n)
            S, _ = sspd_optimal(P.all_indices(), P, SspdConfig(eps=0.5, seed=1, reduce=True))
            if n == 512:
                assert_valid(S, P)
            per_n.append(len(S) / n)
        assert max(per_n) / min(per_n) <= 1.5
