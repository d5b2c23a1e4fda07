"""Diagonal linear maps and the content bounds they satisfy.

For ``L = diag(a_1, ..., a_n)`` with sorted factors ``a_(1) <= ... <= a_(n)``
and a k-dimensional set X,

    a_(1) ... a_(k) M_k(X)  <=  M_k(L X)  <=  a_(n-k+1) ... a_(n) M_k(X).

The one-axis shrink step reduces to a statement about segments on a line:
moving the centers of a family of segments towards the origin by a factor
``0 < a <= 1`` never increases the length of their union.  That part is
checked exactly with :func:`union_length`; the content bounds are checked
statistically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .minkowski import RESOLUTION_FACTOR, PointCloud, minkowski_content
from .sampling import RandomStream

__all__ = [
    "DiagonalMap",
    "SegmentFamily",
    "union_length",
    "shrink_centers",
    "shrink_lemma_check",
    "random_family",
    "shrink_lemma_suite",
    "homothety_content_check",
    "sandwich_check",
    "common_schedule",
    "SHRINK_FACTORS",
]

SHRINK_FACTORS = (0.1, 0.25, 0.5, 0.75, 0.9, 1.0)


@dataclass(frozen=True, eq=False)
class DiagonalMap:
    factors: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=float).reshape(-1)
        if len(f) == 0 or np.any(~(f > 0)):
            raise ValueError("diagonal factors must be positive")
        object.__setattr__(self, "factors", f)

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def sorted_factors(self) -> np.ndarray:
        return np.sort(self.factors)

    def lower_factor(self, k: int) -> float:
        """Product of the k smallest factors."""
        return float(np.prod(self.sorted_factors[:k]))

    def upper_factor(self, k: int) -> float:
        """Product of the k largest factors."""
        return float(np.prod(self.sorted_factors[self.n - k:]))

    def apply(self, cloud: PointCloud) -> PointCloud:
        if cloud.ambient_dim != self.n:
            raise ValueError(f"map acts on R^{self.n}, cloud lives in R^{cloud.ambient_dim}")
        return cloud.scaled(self.factors)


@dataclass(frozen=True, eq=False)
class SegmentFamily:
    """Closed segments ``[c - h, c + h]`` on the real line."""

    centers: np.ndarray
    half_lengths: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).reshape(-1)
        h = np.asarray(self.half_lengths, dtype=float).reshape(-1)
        if c.shape != h.shape:
            raise ValueError("need one half-length per center")
        if np.any(h < 0):
            raise ValueError("half-lengths must be non-negative")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "half_lengths", h)

    @classmethod
    def from_intervals(cls, intervals) -> "SegmentFamily":
        iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
        return cls((iv[:, 0] + iv[:, 1]) / 2, (iv[:, 1] - iv[:, 0]) / 2)

    def intervals(self) -> np.ndarray:
        return np.column_stack([self.centers - self.half_lengths, self.centers + self.half_lengths])

    def __len__(self):
        return len(self.centers)


def union_length(family: SegmentFamily) -> float:
    """Length of the union of the segments (sort by left end, sweep).

    >>> union_length(SegmentFamily.from_intervals([(0, 1), (0.5, 2)]))
    2.0
    """
    if len(family) == 0:
        return 0.0
    iv = family.intervals()
    iv = iv[np.argsort(iv[:, 0], kind="stable")]
    left, right = iv[:, 0], iv[:, 1]
    reach = np.maximum.accumulate(right)
    before = np.concatenate([[-np.inf], reach[:-1]])
    # each segment adds whatever sticks out past everything to its left
    return float(np.sum(np.maximum(reach - np.maximum(left, before), 0.0)))


def shrink_centers(family: SegmentFamily, a: float) -> SegmentFamily:
    if not 0 < a <= 1:
        raise ValueError(f"shrink factor must lie in (0, 1], got {a!r}")
    return SegmentFamily(family.centers * a, family.half_lengths)


class ShrinkResult(NamedTuple):
    holds: bool
    before: float
    after: float


def shrink_lemma_check(family: SegmentFamily, a: float, slack: float = 1e-12) -> ShrinkResult:
    before = union_length(family)
    after = union_length(shrink_centers(family, a))
    return ShrinkResult(after <= before + slack, before, after)


def random_family(rng: np.random.Generator, max_segments=50, center_range=10.0,
                  max_half_length=3.0) -> SegmentFamily:
    """Random family: 1..max_segments segments, centers uniform in
    ``[-center_range, center_range]``, half-lengths uniform in ``[0, max_half_length]``."""
    m = int(rng.integers(1, max_segments + 1))
    return SegmentFamily(
        rng.uniform(-center_range, center_range, m), rng.uniform(0.0, max_half_length, m)
    )


def shrink_lemma_suite(cases: int = 10_000, factors: Sequence[float] = SHRINK_FACTORS,
                       stream: Optional[RandomStream] = None, slack: float = 1e-12) -> dict:
    """Run the shrink check on random families for every factor.

    Also counts violations of monotonicity in the factor, which follows from
    applying the shrink step to the family at the larger factor.
    """
    stream = stream or RandomStream()
    factors = sorted(float(a) for a in factors)
    per_factor = np.zeros(len(factors), dtype=int)
    excess = np.full(len(factors), -np.inf)
    monotone_violations = 0
    for case in range(cases):
        fam = random_family(stream.substream(case).generator())
        base = union_length(fam)
        lengths = np.array([union_length(shrink_centers(fam, a)) for a in factors])
        per_factor += lengths > base + slack
        excess = np.maximum(excess, lengths - base)
        monotone_violations += int(np.count_nonzero(np.diff(lengths) < -slack))
    violations = int(per_factor.sum())
    return {
        "cases": cases,
        "factors": factors,
        "violations": violations,
        "violations_per_factor": per_factor.tolist(),
        "max_excess_per_factor": excess.tolist(),
        "max_excess": float(excess.max()),
        "monotone_violations": int(monotone_violations),
        "pass": violations == 0,
    }


def common_schedule(clouds, count: int = 5, t_max: Optional[float] = None):
    """Geometric schedule valid for every cloud: above 5x the coarsest resolution."""
    h = max(c.resolution for c in clouds)
    if t_max is None:
        t_max = 0.1 * min(c.diameter_bound for c in clouds)
    t_min = max(RESOLUTION_FACTOR * h, t_max / 16.0)
    if t_min >= t_max:
        raise ValueError("clouds are too coarse for a common schedule")
    return [float(t) for t in np.geomspace(t_max, t_min, count)]


def homothety_content_check(cloud: PointCloud, k: int, lam: float, schedule=None,
                            budget: int = 200_000, stream: Optional[RandomStream] = None,
                            workers: int = 1) -> dict:
    """Compare contents of X and lam*X, measuring lam*X at the scaled schedule lam*t.

    Passes when the content ratio is within 3 combined relative standard
    errors of ``lam**k``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    stream = stream or RandomStream()
    if schedule is None:
        schedule = common_schedule([cloud])
    base = minkowski_content(cloud, k, schedule, budget, stream.substream(0), workers)
    image = minkowski_content(cloud.scaled(lam), k, [lam * t for t in schedule], budget,
                              stream.substream(1), workers)
    ratio = image.value / base.value
    rel = math.hypot(base.stderr / base.value, image.stderr / image.value)
    expected = lam ** k
    low, high = expected * (1 - 3 * rel), expected * (1 + 3 * rel)
    return {
        "name": "homothety",
        "bound_low": low,
        "estimate": ratio,
        "bound_high": high,
        "expected": expected,
        "content_x": base.value,
        "content_image": image.value,
        "stderr": ratio * rel,
        "pass": bool(low <= ratio <= high),
    }


def sandwich_check(cloud: PointCloud, k: int, dmap: DiagonalMap, schedule=None,
                   budget: int = 200_000, stream: Optional[RandomStream] = None,
                   allowance: float = 0.03, workers: int = 1) -> dict:
    """Check ``lower * M_k(X) <= M_k(L X) <= upper * M_k(X)`` on estimates.

    Both sides use the same t schedule.  The bounds are widened by
    ``delta = 3 * combined relative stderr + allowance``.
    """
    stream = stream or RandomStream()
    image_cloud = dmap.apply(cloud)
    if schedule is None:
        schedule = common_schedule([cloud, image_cloud])
    base = minkowski_content(cloud, k, schedule, budget, stream.substream(0), workers)
    image = minkowski_content(image_cloud, k, schedule, budget, stream.substream(1), workers)
    rel = math.hypot(base.stderr / base.value, image.stderr / image.value)
    delta = 3 * rel + allowance
    low = dmap.lower_factor(k) * base.value
    high = dmap.upper_factor(k) * base.value
    return {
        "name": "sandwich",
        "bound_low": low,
        "estimate": image.value,
        "bound_high": high,
        "content_x": base.value,
        "stderr": image.stderr,
        "delta": delta,
        "pass": bool(low * (1 - delta) <= image.value <= high * (1 + delta)),
    }
