"""Monte Carlo estimation of t-neighborhood volumes and lower Minkowski content.

For a set X in R^n sampled by a point cloud, the ratio

    vol_n(X + t) / (v_k t^k),        k = n - content_dim,

tends to the content_dim-dimensional Minkowski content as t -> 0.  Only
finite t can be probed, so :func:`minkowski_content` evaluates the ratio over
a decreasing schedule of t, fits ``c0 + c1 t`` by least squares and reports
``c0``.  The whole ratio curve and its minimum are kept alongside.

The neighborhood of a point cloud is a union of balls and sits slightly
inside the neighborhood of the set it samples; the shortfall grows like
``(spacing / t)**2``, so content estimates from random clouds come out a
percent or two low at the default resolution margin.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .geom import unit_ball_volume
from .sampling import RandomStream, chunked

__all__ = [
    "PointCloud",
    "SpatialIndex",
    "ContentEstimate",
    "build_spatial_index",
    "neighborhood_volume",
    "default_schedule",
    "minkowski_content",
    "exact_neighborhood_oracle",
    "segment_cloud",
    "circle_cloud",
    "disk_cloud",
]

RESOLUTION_FACTOR = 5.0


@dataclass
class PointCloud:
    """Finite sample of a set in R^n.

    ``resolution`` is an upper bound on the covering radius of the underlying
    set by the points.
    """

    points: np.ndarray
    resolution: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution!r}")
        self.points = pts
        self.resolution = float(self.resolution)

    @classmethod
    def from_points(cls, points, resolution=None, safety=3.0):
        """Build a cloud, estimating the resolution as ``safety`` times the
        median nearest-neighbour spacing when it is not given."""
        pts = np.asarray(points, dtype=float)
        if resolution is None:
            resolution = safety * median_spacing(pts)
        return cls(pts, resolution)

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    @property
    def bbox(self) -> Tuple[np.ndarray, np.ndarray]:
        if len(self.points) == 0:
            raise ValueError("empty cloud has no bounding box")
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def diameter_bound(self) -> float:
        """Diagonal length of the bounding box."""
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    def scaled(self, factors) -> "PointCloud":
        """Image under ``x -> factors * x`` (a scalar or one factor per axis)."""
        f = np.broadcast_to(np.asarray(factors, dtype=float), (self.ambient_dim,))
        return PointCloud(self.points * f, self.resolution * float(np.max(np.abs(f))))


def median_spacing(points) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        raise ValueError("need at least two points to estimate a spacing")
    dist, _ = cKDTree(pts).query(pts, k=2)
    spacing = float(np.median(dist[:, 1]))
    if spacing <= 0:
        # heavy duplication; fall back to the mean over distinct neighbours
        positive = dist[:, 1][dist[:, 1] > 0]
        if len(positive) == 0:
            raise ValueError("all points coincide")
        spacing = float(np.median(positive))
    return spacing


class SpatialIndex:
    """Exact nearest-point distance queries over a :class:`PointCloud` (k-d tree)."""

    def __init__(self, cloud: PointCloud):
        if len(cloud) == 0:
            raise ValueError("cannot index an empty cloud")
        self.cloud = cloud
        self._tree = cKDTree(cloud.points)

    def distance(self, queries) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        d, _ = self._tree.query(q, k=1)
        return d

    def within(self, queries, t: float) -> np.ndarray:
        """Boolean mask of queries at distance <= t from the cloud."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        # pad the pruning radius so the final test decides ties
        d, _ = self._tree.query(q, k=1, distance_upper_bound=t * (1.0 + 1e-9) + 1e-300)
        return d <= t


def build_spatial_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud)


def neighborhood_volume(cloud, t: float, budget: int, stream: RandomStream,
                        index: Optional[SpatialIndex] = None, workers: int = 1):
    """Monte Carlo volume of ``{q : dist(q, cloud) <= t}`` in the ambient R^n.

    Samples ``budget`` points uniformly in the bounding box of the cloud
    inflated by ``t`` on every side.  Returns ``(estimate, stderr)`` with the
    binomial standard error scaled by the box volume.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    if budget < 1:
        raise ValueError(f"budget must be at least 1, got {budget!r}")
    if index is None:
        index = SpatialIndex(cloud)
    lo, hi = cloud.bbox
    lo, hi = lo - t, hi + t
    box_volume = float(np.prod(hi - lo))

    def count(size, s):
        q = lo + (hi - lo) * s.generator().random((size, len(lo)))
        return int(np.count_nonzero(index.within(q, t)))

    hits = sum(chunked(budget, stream, count, workers))
    p = hits / budget
    return box_volume * p, box_volume * math.sqrt(p * (1.0 - p) / budget)


@dataclass
class ContentEstimate:
    """Minkowski-content estimate over a schedule of t values.

    ``codim`` is the normalizer dimension k in ``v_k t^k``; the content
    dimension is ``ambient_dim - codim``.
    """

    codim: int
    ambient_dim: int
    t_values: List[float]
    volumes: List[Tuple[float, float]]
    ratios: List[float] = field(init=False)
    value: float = field(init=False)
    stderr: float = field(init=False)
    min_ratio: float = field(init=False)

    def __post_init__(self):
        t = np.asarray(self.t_values, dtype=float)
        if len(t) == 0 or np.any(t <= 0) or np.any(np.diff(t) >= 0):
            raise ValueError("t_values must be positive and strictly decreasing")
        if len(self.volumes) != len(t):
            raise ValueError("need one volume per t value")
        self.t_values = [float(x) for x in t]
        self.volumes = [(float(v), float(e)) for v, e in self.volumes]
        norm = [self.normalizer(x) for x in self.t_values]
        self.ratios = [v / z for (v, _), z in zip(self.volumes, norm)]
        ratio_err = np.array([e / z for (_, e), z in zip(self.volumes, norm)])
        weights = extrapolation_weights(self.t_values)
        self.value = float(weights @ np.asarray(self.ratios))
        self.stderr = float(math.sqrt(np.sum((weights * ratio_err) ** 2)))
        self.min_ratio = float(min(self.ratios))

    @property
    def content_dim(self) -> int:
        return self.ambient_dim - self.codim

    def normalizer(self, t: float) -> float:
        return unit_ball_volume(self.codim) * t ** self.codim

    def to_dict(self) -> dict:
        return {
            "codim": self.codim,
            "ambient_dim": self.ambient_dim,
            "t_values": self.t_values,
            "volumes": [list(v) for v in self.volumes],
            "ratios": self.ratios,
            "value": self.value,
            "stderr": self.stderr,
            "min_ratio": self.min_ratio,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "volume", "stderr", "ratio"])
            for t, (v, e), r in zip(self.t_values, self.volumes, self.ratios):
                writer.writerow([f"{t:.17g}", f"{v:.17g}", f"{e:.17g}", f"{r:.17g}"])
            writer.writerow(["value", "stderr", "k", "n"])
            writer.writerow([f"{self.value:.17g}", f"{self.stderr:.17g}", self.codim, self.ambient_dim])


def extrapolation_weights(t_values) -> np.ndarray:
    """Weights w with ``w @ ratios`` equal to the intercept of the LSQ line through (t, ratio)."""
    t = np.asarray(t_values, dtype=float)
    if len(t) == 1:
        return np.ones(1)
    design = np.column_stack([np.ones_like(t), t])
    return np.linalg.pinv(design)[0]


def default_schedule(cloud: PointCloud, count: int = 5) -> List[float]:
    """Geometric schedule from ``0.1 * diam(bbox)`` down to ``max(5 h, t_max / 16)``.

    Larger t_max lets the curvature term of the ratio leak into the linear
    extrapolation; at 0.2 * diam the central disk of B^3 is underestimated
    by about 4% at 10^5 points.
    """
    diam = cloud.diameter_bound
    # a single point has no scale of its own
    t_max = 0.1 * diam if diam > 0 else 1.0
    t_min = max(RESOLUTION_FACTOR * cloud.resolution, t_max / 16.0)
    if t_min >= t_max:
        raise ValueError(
            f"cloud resolution {cloud.resolution:.3g} is too coarse for its size "
            f"(need 5h < {t_max:.3g})"
        )
    return [float(x) for x in np.geomspace(t_max, t_min, count)]


def minkowski_content(cloud: PointCloud, content_dim: int, schedule: Optional[Sequence[float]] = None,
                      budget: int = 200_000, stream: Optional[RandomStream] = None,
                      workers: int = 1) -> ContentEstimate:
    """Estimate the ``content_dim``-dimensional lower Minkowski content of a cloud.

    Every t in the schedule must be at least 5 times the cloud resolution;
    smaller t would measure the gaps between points rather than the set.
    """
    n = cloud.ambient_dim
    if not 0 <= content_dim < n:
        raise ValueError(f"content_dim must lie in [0, {n}), got {content_dim}")
    if schedule is None:
        schedule = default_schedule(cloud)
    schedule = [float(t) for t in schedule]
    if len(schedule) == 0 or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be non-empty and strictly decreasing")
    if min(schedule) < RESOLUTION_FACTOR * cloud.resolution:
        raise ValueError(
            f"schedule minimum {min(schedule):.4g} is below 5 x resolution "
            f"({RESOLUTION_FACTOR * cloud.resolution:.4g}); refine the cloud or raise t"
        )
    stream = stream or RandomStream()
    index = SpatialIndex(cloud)
    volumes = [
        neighborhood_volume(cloud, t, budget, stream.substream(i), index=index, workers=workers)
        for i, t in enumerate(schedule)
    ]
    return ContentEstimate(n - content_dim, n, schedule, volumes)


def exact_neighborhood_oracle(shape: str, t: float, n: int = 2, length: float = 1.0,
                              radius: float = 1.0) -> float:
    """Closed-form volume of the t-neighborhood of a few simple sets.

    ``point``      a point in R^n:                       v_n t^n
    ``segment``    a segment of ``length`` in R^2:       2 l t + pi t^2
    ``circle``     a circle of ``radius`` in R^2:        4 pi r t   (t <= r)
    ``disk_slab``  a flat disk of ``radius`` in R^3:     2 pi r^2 t + pi^2 r t^2 + 4/3 pi t^3
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    if shape == "point":
        return unit_ball_volume(n) * t ** n
    if not (length > 0 and radius > 0):
        raise ValueError("shape parameters must be positive")
    if shape == "segment":
        return 2.0 * length * t + math.pi * t * t
    if shape == "circle":
        if t <= radius:
            return 4.0 * math.pi * radius * t
        return math.pi * (radius + t) ** 2
    if shape == "disk_slab":
        r = radius
        return 2.0 * math.pi * r * r * t + math.pi ** 2 * r * t * t + 4.0 / 3.0 * math.pi * t ** 3
    raise ValueError(f"unsupported shape {shape!r}")


def segment_cloud(length: float = 1.0, count: int = 1000, ambient_dim: int = 2) -> PointCloud:
    """Evenly spaced points on ``[0, length]`` along the first axis."""
    pts = np.zeros((count, ambient_dim))
    pts[:, 0] = np.linspace(0.0, length, count)
    return PointCloud(pts, length / max(count - 1, 1))


def circle_cloud(radius: float = 1.0, count: int = 4000, center=(0.0, 0.0)) -> PointCloud:
    """Evenly spaced points on a circle in R^2."""
    theta = 2.0 * np.pi * np.arange(count) / count
    pts = np.column_stack([np.cos(theta), np.sin(theta)]) * radius + np.asarray(center, float)
    return PointCloud(pts, radius * math.sin(math.pi / count) * 1.01)


def disk_cloud(radius: float = 1.0, spacing: float = 0.005, ambient_dim: int = 3) -> PointCloud:
    """Concentric rings covering a flat disk in the plane of the first two axes.

    The outermost ring sits exactly on the rim.
    """
    rings = max(int(math.ceil(radius / spacing)), 1)
    parts = [np.zeros((1, 2))]
    for j in range(1, rings + 1):
        r = radius * j / rings
        m = max(int(math.ceil(2.0 * math.pi * r / spacing)), 3)
        theta = 2.0 * np.pi * (np.arange(m) + 0.5 * (j % 2)) / m
        parts.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    flat = np.concatenate(parts)
    pts = np.zeros((len(flat), ambient_dim))
    pts[:, :2] = flat
    return PointCloud(pts, spacing)
