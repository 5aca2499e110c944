import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pairdecomp import (GeometryError, PointSet, cluster_by_diameter, diameter, read_points,
                        set_distance, snap_to_grid, spread, write_points)
from pairdecomp.geometry import dist

from conftest import point_sets


def brute_diameter(C):
    if len(C) < 2:
        return 0.0
    return max(np.linalg.norm(a - b) for a in C for b in C)


class TestPointSet:
    def test_rejects_non_finite(self):
        with pytest.raises(GeometryError, match="finite"):
            PointSet([[0, np.nan]])

    def test_rejects_huge_coordinates(self):
        PointSet([[2.0 ** 500, 0]])
        with pytest.raises(GeometryError, match="2\\^500"):
            PointSet([[2.0 ** 501, 0]])


class TestSetDistance:
    def test_single_points(self):
        P = PointSet([[0, 0], [3, 4]])
        assert set_distance([0], [1], P) == 5

    def test_shared_coordinate(self):
        P = PointSet([[0, 0], [1, 0], [1, 0], [5, 5]])
        assert set_distance([0, 1], [2, 3], P) == 0

    def test_square_against_pair(self):
        P = PointSet([[0, 0], [1, 0], [0, 1], [1, 1], [3, 0], [3, 1]])
        brute = min(dist(P, i, j) for i in range(4) for j in (4, 5))
        assert set_distance([0, 1, 2, 3], [4, 5], P) == brute == 2

    def test_empty_raises(self):
        P = PointSet([[0, 0]])
        with pytest.raises(GeometryError, match="empty-set"):
            set_distance([], [0], P)


class TestDiameter:
    def test_singleton(self):
        P = PointSet([[0, 0]])
        assert diameter([0], P, "exact") == 0
        assert diameter([0], P, "approx") == 0

    def test_right_triangle(self):
        P = PointSet([[0, 0], [3, 0], [0, 4]])
        assert diameter([0, 1, 2], P, "exact") == 5

    def test_collinear_anchor(self):
        P = PointSet([[0, 0], [1, 0], [2, 0]])
        assert diameter([0, 1, 2], P, "approx") == 2
        assert diameter([0, 1, 2], P, "exact") == 2

    @given(point_sets(max_n=30))
    def test_approx_within_factor_two(self, P):
        X = P.all_indices()
        exact = diameter(X, P, "exact")
        approx = diameter(X, P, "approx")
        assert exact == pytest.approx(brute_diameter(P.coords))
        assert exact / 2 <= approx <= exact


class TestSpread:
    def test_two_points(self):
        assert spread(PointSet([[0, 0], [1, 0]])) == 1

    def test_collinear(self):
        assert spread(PointSet([[0, 0], [1, 0], [3, 0]])) == 3

    def test_lattice(self):
        g = np.indices((4, 4)).reshape(2, -1).T
        assert spread(PointSet(g)) == pytest.approx(3 * math.sqrt(2))

    def test_duplicates_rejected(self):
        with pytest.raises(GeometryError, match="infinite spread"):
            spread(PointSet([[0, 0], [0, 0], [1, 1]]))


class TestClusters:
    def test_far_points_split(self):
        P = PointSet([[0, 0], [10, 10]])
        assert [c.tolist() for c in cluster_by_diameter([0, 1], P, 1)] == [[0], [1]]

    def test_close_points_merge(self):
        P = PointSet([[0, 0], [0.1, 0]])
        assert [c.tolist() for c in cluster_by_diameter([0, 1], P, 1)] == [[0, 1]]

    def test_lattice_clusters_small(self):
        P = PointSet(np.indices((4, 4)).reshape(2, -1).T)
        clusters = cluster_by_diameter(P.all_indices(), P, 1.0)
        assert sorted(np.concatenate(clusters).tolist()) == list(range(16))
        for c in clusters:
            assert brute_diameter(P.coords[c]) <= 1.0

    @given(point_sets(), st.floats(0.05, 20))
    def test_partition_with_bounded_diameter(self, P, delta):
        clusters = cluster_by_diameter(P.all_indices(), P, delta)
        flat = np.concatenate(clusters)
        assert sorted(flat.tolist()) == list(range(P.n))
        for c in clusters:
            assert diameter(c, P, "exact") <= delta


class TestSnap:
    def test_single_cell_center(self):
        P = PointSet([[0.2, 0.2]])
        S, m = snap_to_grid([0], P, 1.0)
        assert S.coords.tolist() == [[0.5, 0.5]] and m.tolist() == [0]

    def test_same_cell(self):
        P = PointSet([[0.1, 0.1], [0.2, 0.3]])
        S, m = snap_to_grid([0, 1], P, 1.0)
        assert S.n == 1 and m.tolist() == [0, 0]

    def test_neighbouring_cells(self):
        P = PointSet([[0.9, 0], [1.1, 0]])
        S, m = snap_to_grid([0, 1], P, 1.0)
        assert S.coords.tolist() == [[0.5, 0.5], [1.5, 0.5]]
        assert m.tolist() == [0, 1]

    @given(point_sets(), st.floats(0.01, 5))
    def test_snap_moves_at_most_half_cell_diagonal(self, P, side):
        S, m = snap_to_grid(P.all_indices(), P, side)
        moved = np.linalg.norm(S.coords[m] - P.coords, axis=1)
        assert moved.max() <= side * math.sqrt(P.dim) / 2 * (1 + 1e-9)


class TestPointFile:
    def test_round_trip(self):
        P = PointSet(np.random.default_rng(3).random((7, 3)))
        buf = io.StringIO()
        write_points(P, buf)
        Q = read_points(io.StringIO(buf.getvalue()))
        assert np.array_equal(P.coords, Q.coords)

    def test_comments_ignored(self):
        text = "# header comment\n2 2\n0 0\n# mid\n1.5 2\n"
        assert read_points(io.StringIO(text)).coords.tolist() == [[0, 0], [1.5, 2]]

    @pytest.mark.parametrize("text", ["", "2\n", "2 2\n0 0\n", "2 1\n0 0 0\n", "1 1\nnan\n"])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            read_points(io.StringIO(text))
