"""Numerical checks of waist inequalities for the ball, ellipsoids and boxes."""

__version__ = "0.1.0"

from .geom import VolumeTable, log_gamma, sphere_measure, unit_ball_volume
from .sampling import RandomStream, archimedes_project, radial_cdf_distance, sample_ball, sample_sphere
from .minkowski import (
    ContentEstimate,
    PointCloud,
    SpatialIndex,
    build_spatial_index,
    exact_neighborhood_oracle,
    minkowski_content,
    neighborhood_volume,
)
from .maplang import LinearMapSpec, MapExpr, eval_jacobian, eval_map, parse_map
from .fibers import (
    ContentParams,
    DomainSpec,
    ball_waist_check,
    ellipsoid_waist_check,
    extract_fiber,
    fiber_content,
    parallelotope_waist_check,
    waist_profile,
)
from .linmap import (
    DiagonalMap,
    SegmentFamily,
    homothety_content_check,
    sandwich_check,
    shrink_centers,
    shrink_lemma_check,
    union_length,
)
