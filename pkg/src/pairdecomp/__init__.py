"""Well- and semi-separated pair decompositions, spanners and separators."""
from .geometry import (Ball, GeometryError, PointSet, Ring, as_index_set, cluster_by_diameter,
                       diameter, read_points, set_distance, snap_to_grid, spread,
                       write_points)
from .pairs import (DecompositionError, OracleTooLarge, Pair, PairDecomposition,
                    check_separation, cut, decomposition_stats, split_decomposition,
                    verify_coverage)
from .partition import ring_separator, small_ball
from .quadtree import (CompressedQuadtree, LevelTree, build_level_tree, locate_pair,
                       wspd_bounded_spread, wspd_general)
from .sspd import SspdConfig, reduce_pairs, sspd_optimal, sspd_simple
from .spanner import (ConeSet, HubRecord, SpannerGraph, build_cones, graph_stats,
                      spanner_from_sspd, stretch_factor)
from .separator import (RingGap, SeparatorCertificate, mild_sspd, mild_wspd,
                        separator_spanner_build, sspd_with_separator, verify_separator)

__version__ = "0.1.0"
