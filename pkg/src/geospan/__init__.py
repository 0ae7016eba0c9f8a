"""Balanced spanning trees in unit-cube radius graphs.

Library layout:

* :mod:`geospan.geometry` -- cube tessellations, central blocks, homothety
  images, enlarged cubes, l_p distances.
* :mod:`geospan.pointcloud` -- seeded point samples, radius graphs with a
  grid index, hop distances, per-cube occupancy.
* :mod:`geospan.trees` -- implicit balanced trees over degree sequences.
* :mod:`geospan.matching` -- star partitions via integral max flow, with the
  duplication construction and exhaustive Hall checks as oracles.
* :mod:`geospan.embedder` -- the three-phase spanning-tree embedding and its
  independent verifier.
* :mod:`geospan.oracle` -- exact brute-force containment at tiny scale.
* :mod:`geospan.experiments` -- Monte Carlo sweeps, diameter witnesses,
  occupancy trials, CSV/JSON export.
* :mod:`geospan.cli` -- the ``geospan`` command.
"""

__version__ = "0.1.0"

from .embedder import (  # noqa: F401
    EmbedParams, EmbedReport, PreconditionError, VerifyResult,
    build_params, check_preconditions, embed, plan_path, step_caps,
    tessellation_depth, threshold_radius, verify_embedding,
)
from .geometry import (  # noqa: F401
    CubeId, Region, central_block, cube_center, cube_of_point,
    enlarged_cube, homothety_image, lp_distance,
)
from .pointcloud import (  # noqa: F401
    GeometricGraph, OccupancyTable, PointSet, build_graph, load_points,
    occupancy, sample_uniform, save_points,
)
from .trees import (  # noqa: F401
    BalancedTree, DegreeSequence, TreeVertex, build_tree, children_of,
    height_from_order, parent_of, regular_tree_threshold,
    select_base_degree, select_base_degree_minimal, tree_size,
)
