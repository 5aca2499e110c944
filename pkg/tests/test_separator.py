import io
import math

import numpy as np
import pytest
from hypothesis import given

from pairdecomp import (GeometryError, PairDecomposition, PointSet, RingGap,
                        SeparatorCertificate, SpannerGraph, cut, mild_sspd, mild_wspd,
                        separator_spanner_build, spanner_from_sspd, sspd_with_separator,
                        stretch_factor, verify_separator)
from pairdecomp.cli import generate_points
from pairdecomp.pairs import failing_pairs, per_point_counts, verify_coverage
from pairdecomp.separator import (ring_parameter, separator_from_record, stage_b_diameter,
                                  write_certificate)

from conftest import point_sets, uniform


def circles(m, r_in, r_out):
    """Center point 0, then m points on each of two concentric circles."""
    a = np.linspace(0, 2 * np.pi, m, endpoint=False)
    ring = np.c_[np.cos(a), np.sin(a)]
    return PointSet(np.vstack([[[0.0, 0.0]], ring * r_in, ring * r_out]))


def decomposition(pairs, eps):
    return PairDecomposition(pairs, 1.0 / eps, "sspd")


class TestRingGap:
    def test_invalid_parameters(self):
        with pytest.raises(GeometryError):
            RingGap(0, 1.0, 0.0, 2.0)
        with pytest.raises(GeometryError):
            RingGap(0, 1.0, 0.5, 1.2)

    def test_violation_names_witness(self):
        P = PointSet([[0, 0], [1, 0], [1.05, 0], [1.9, 0]])
        with pytest.raises(GeometryError, match="outer point 2"):
            mild_sspd([0, 1], [2, 3], RingGap(0, 1.0, 0.1, 2.0), P, 0.5)
        with pytest.raises(GeometryError, match="inner point 1"):
            mild_sspd([0, 1], [3], RingGap(0, 0.5, 0.1, 2.0), P, 0.5)


class TestMildSspd:
    def test_single_pair(self):
        P = PointSet([[0, 0], [5, 0]])
        out = mild_sspd([0], [1], RingGap(0, 1.0, 1.0, 6.0), P, 0.5)
        assert len(out) == 1
        assert {out[0].left.tolist()[0], out[0].right.tolist()[0]} == {0, 1}

    def test_empty_side(self):
        P = PointSet([[0, 0], [5, 0]])
        assert mild_sspd([0], [], RingGap(0, 1.0, 1.0, 6.0), P, 0.5) == []

    @pytest.mark.parametrize("eps", [0.25, 0.5, 1.0])
    def test_concentric_circles(self, eps):
        P = circles(16, 1.0, 1.5)
        Pin, Pout = np.arange(17), np.arange(17, 33)
        out = mild_sspd(Pin, Pout, RingGap(0, 1.0, 0.4, 1.6), P, eps)
        S = decomposition(out, eps)
        rep = verify_coverage(S, P, expect=cut(Pin))
        assert rep.ok and rep.n_missing == 0
        assert not failing_pairs(S, P)
        assert all(p.tag == "stageC" for p in out)

    @given(point_sets(min_n=4, max_n=40, dims=(2, 3)))
    def test_annulus_split_of_random_sets(self, P):
        c = P.coords.mean(axis=0)
        dist = np.linalg.norm(P.coords - c, axis=1)
        order = np.argsort(dist, kind="stable")
        k = len(order) // 2
        r, r2 = dist[order[k - 1]], dist[order[k]]
        if r2 - r <= 1e-9 * max(1.0, r2):
            return
        P = PointSet(np.vstack([P.coords, c]))
        center = P.n - 1
        Pin = np.append(order[:k], center)
        Pout = order[k:]
        gap = RingGap(center, r, (r2 - r) / 2, float(dist.max()) + 1.0)
        out = mild_sspd(Pin, Pout, gap, P, 0.5)
        S = decomposition(out, 0.5)
        assert verify_coverage(S, P, expect=cut(Pin)).ok
        assert not failing_pairs(S, P)

    def test_wspd_count_tracks_gap_width(self):
        # dense circles straddling the gap; halving the gap doubles the
        # number of pairs along it (x 2^(d-1) in the plane)
        m = 4000
        counts = []
        for t in (0.04, 0.02):
            P = circles(m, 1.0, 1.0 + 1.0001 * t)
            counts.append(len(mild_wspd(np.arange(m + 1), np.arange(m + 1, 2 * m + 1),
                                        RingGap(0, 1.0, t, 2.5), P, 0.5)))
        assert 1.5 <= counts[1] / counts[0] <= 2.5


class TestSspdWithSeparator:
    def test_ring_parameter(self):
        assert ring_parameter(1024, 2) == 16
        assert ring_parameter(1, 2) == 1
        assert ring_parameter(1000, 3) == 5

    def test_stage_b_modes(self):
        assert stage_b_diameter(0.5, 2.0) == pytest.approx(0.1)
        assert stage_b_diameter(0.5, 2.0, "gap") == 1.0
        with pytest.raises(ValueError):
            sspd_with_separator(np.arange(3), uniform(3), 0.5, stage_b="nope")

    def test_three_points(self):
        P = uniform(3, seed=4)
        S, rec = sspd_with_separator(P.all_indices(), P, 0.5)
        assert verify_coverage(S, P).ok
        assert not failing_pairs(S, P)
        assert rec is not None and rec.t == 1

    def test_duplicates_rejected(self):
        P = PointSet([[0, 0], [1, 1], [0, 0]])
        with pytest.raises(GeometryError):
            sspd_with_separator(P.all_indices(), P, 0.5)

    @pytest.mark.parametrize("n", [128, 512])
    def test_uniform_exact(self, n):
        P = uniform(n, seed=n)
        S, rec = sspd_with_separator(P.all_indices(), P, 0.5, seed=0)
        assert verify_coverage(S, P).ok
        assert not failing_pairs(S, P)
        assert {p.tag for p in S} <= {"stageA", "stageB", "stageC", "base"}

    @given(point_sets(min_n=2, max_n=40, dims=(1, 2, 3)))
    def test_valid_on_random_sets(self, P):
        S, _ = sspd_with_separator(P.all_indices(), P, 1.0, seed=3)
        assert verify_coverage(S, P).ok
        assert not failing_pairs(S, P)

    def test_top_level_partition(self):
        P = uniform(512, seed=9)
        S, rec = sspd_with_separator(P.all_indices(), P, 0.5, seed=2)
        parts = [rec.p_in, rec.p_ring, rec.p_out, rec.p_outer]
        assert sum(len(x) for x in parts) == P.n
        assert np.array_equal(np.sort(np.concatenate(parts)), P.all_indices())
        d = np.linalg.norm(P.coords - P.coords[rec.center], axis=1)
        assert np.all(d[rec.p_in] <= rec.r)
        assert np.all((d[rec.p_ring] > rec.r) & (d[rec.p_ring] <= rec.r_outer))
        assert np.all((d[rec.p_out] > rec.r_outer) & (d[rec.p_out] <= 2 * rec.r))
        assert np.all(d[rec.p_outer] > 2 * rec.r)
        lo, hi = rec.stage_b
        assert all(S.pairs[i].tag == "stageB" for i in range(lo, hi))
        lo, hi = rec.stage_c
        assert all(S.pairs[i].tag == "stageC" for i in range(lo, hi))

    @pytest.mark.parametrize("d,n", [(2, 600), (3, 600)])
    def test_ring_size_every_level(self, d, n):
        P = uniform(n, d, seed=d)
        trace = []
        sspd_with_separator(P.all_indices(), P, 0.5, seed=5, n0=8, trace=trace)
        assert len(trace) > 1
        for _, m, t, ring in trace:
            assert t == ring_parameter(m, d)
            assert ring <= math.ceil(m ** (1 - 1 / d))

    @pytest.mark.xfail(strict=True, reason="ball-versus-far pairs accumulate along the "
                       "outer recursion branch; max pairs per point is about n - 1 at "
                       "both sizes, so C grows x2.4 between 128 and 512")
    def test_per_point_log_squared_constant(self):
        C = []
        for n in (128, 512):
            P = uniform(n, seed=n)
            S, _ = sspd_with_separator(P.all_indices(), P, 0.5, seed=0)
            C.append(per_point_counts(S.pairs, n).max() / math.log2(n) ** 2)
        assert C[1] <= 1.5 * C[0]


class TestCertificate:
    def test_verify_empty_graph(self):
        G = SpannerGraph(4, np.empty((0, 2)), weights=[])
        cert = SeparatorCertificate(np.array([0]), np.array([1, 2]), np.array([3]))
        assert verify_separator(G, cert).ok

    def test_verify_triangle(self):
        P = PointSet([[0, 0], [1, 0], [0, 1]])
        G = SpannerGraph(3, [(0, 1), (1, 2), (0, 2)], P)
        cert = SeparatorCertificate(np.array([0]), np.array([1]), np.array([2]))
        rep = verify_separator(G, cert)
        assert not rep.ok and rep.crossing_edges == [(1, 2)]

    def test_verify_rejects_bad_partition(self):
        G = SpannerGraph(3, np.empty((0, 2)), weights=[])
        overlap = SeparatorCertificate(np.array([0]), np.array([0, 1]), np.array([2]))
        assert verify_separator(G, overlap).reason == "sets overlap"
        short = SeparatorCertificate(np.array([0]), np.array([1]), np.array([], dtype=int))
        assert not verify_separator(G, short).ok

    def test_two_points(self):
        P = PointSet([[0, 0], [1, 0]])
        S, rec = sspd_with_separator(P.all_indices(), P, 1 / 16)
        G, hubs = spanner_from_sspd(S, P, 1.0)
        cert = separator_from_record(rec, hubs)
        assert verify_separator(G, cert).ok
        assert len(cert.separator) >= 1
        expected = np.union1d(rec.p_ring, hubs.hubs[slice(*rec.stage_b)])
        expected = np.union1d(expected, hubs.hubs[slice(*rec.stage_c)])
        assert cert.separator.tolist() == expected.tolist()

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_record_certificate_on_uniform(self, seed):
        # coarse SSPD with the margin check off: the edge scan still holds
        P = uniform(512, seed=seed)
        S, rec = sspd_with_separator(P.all_indices(), P, 0.5, seed=seed)
        G, hubs = spanner_from_sspd(S, P, 1.0, require_margin=False)
        cert = separator_from_record(rec, hubs)
        rep = verify_separator(G, cert)
        assert rep.ok, rep.crossing_edges[:3]
        n_in = len(rec.p_in)
        assert len(cert.side_a) >= n_in - len(cert.separator)

    @pytest.mark.parametrize("n,seed", [(50, 1), (100, 1), (100, 3)])
    def test_build_expspread(self, n, seed):
        P = generate_points("expspread", n, 2, 0)
        B = separator_spanner_build(P.all_indices(), P, 0.5, seed=seed)
        assert B.attempts >= 1 and B.sspd_eps == 0.5 / 16
        assert len(B.certificate.side_a) and len(B.certificate.side_b)
        assert verify_separator(B.graph, B.certificate).ok
        assert stretch_factor(B.graph, P) <= 1.5 + 1e-9

    def test_build_degenerate_on_uniform(self):
        # every ball point becomes a hub at the spanner's required separation
        P = uniform(256, seed=0)
        with pytest.raises(GeometryError, match="degenerate separator"):
            separator_spanner_build(P.all_indices(), P, 0.5)

    def test_build_rejects_single_point(self):
        with pytest.raises(GeometryError):
            separator_spanner_build([0], uniform(1), 0.5)

    def test_dump_format(self):
        cert = SeparatorCertificate(np.array([4]), np.array([0, 2]), np.array([], dtype=int))
        fh = io.StringIO()
        write_certificate(cert, fh)
        assert fh.getvalue() == "SEP: 4\nA: 0 2\nB:\n"
