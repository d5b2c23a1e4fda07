"""Fibers f^{-1}(y) of maps on the ball, ellipsoids and boxes.

A fiber is sampled by drawing points of the domain, keeping those with
``|f(x) - y|`` below a loose gate, and pulling each one onto the level set
with a damped Gauss-Newton iteration.  Its content is then estimated with
:func:`waistlab.minkowski.minkowski_content` in the ambient R^n; the domain
only restricts where fiber points may lie.

A waist profile scans a grid of y values and records the largest fiber.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .geom import unit_ball_volume
from .minkowski import ContentEstimate, PointCloud, median_spacing, minkowski_content
from .sampling import CHUNK_SIZE, RandomStream, sample_ball

__all__ = [
    "FiberError",
    "EmptyFiberError",
    "NonConvergenceError",
    "DomainSpec",
    "FiberCloud",
    "ContentParams",
    "WaistProfile",
    "WaistReport",
    "extract_fiber",
    "gauss_newton_project",
    "fiber_content",
    "default_y_grid",
    "waist_profile",
    "ball_waist_check",
    "ellipsoid_waist_check",
    "parallelotope_waist_check",
]

_PILOT = 4096
_BATCH_CHUNKS = 8


class FiberError(RuntimeError):
    status = "failed"


class EmptyFiberError(FiberError):
    status = "empty"


class NonConvergenceError(FiberError):
    status = "nonconvergent"


@dataclass(frozen=True)
class DomainSpec:
    """Unit ball, axis-aligned ellipsoid, or open box ``(0, a_1) x ... x (0, a_n)``."""

    kind: str
    dims: tuple

    def __post_init__(self):
        if self.kind not in ("ball", "ellipsoid", "box"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        dims = tuple(float(a) for a in self.dims)
        if len(dims) == 0 or any(not a > 0 for a in dims):
            raise ValueError("domain axes must be positive")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def ball(cls, n: int) -> "DomainSpec":
        return cls("ball", (1.0,) * int(n))

    @classmethod
    def ellipsoid(cls, axes) -> "DomainSpec":
        return cls("ellipsoid", tuple(sorted(axes)))

    @classmethod
    def box(cls, dims) -> "DomainSpec":
        return cls("box", tuple(sorted(dims)))

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def axes(self) -> np.ndarray:
        return np.asarray(self.dims)

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.kind == "box":
            return np.all((X > 0) & (X < self.axes), axis=1)
        return np.sum((X / self.axes) ** 2, axis=1) <= 1.0

    def sample(self, count: int, stream: RandomStream) -> np.ndarray:
        if self.kind == "box":
            return self.axes * stream.generator().random((count, self.n))
        return sample_ball(self.n, count, stream) * self.axes

    def to_dict(self) -> dict:
        if self.kind == "ball":
            return {"kind": "ball", "n": self.n}
        key = "axes" if self.kind == "ellipsoid" else "dims"
        return {"kind": self.kind, key: list(self.dims)}


@dataclass
class FiberCloud:
    cloud: PointCloud
    y: np.ndarray
    residual: float
    tol: float

    def __post_init__(self):
        if self.residual > self.tol:
            raise ValueError(f"fiber residual {self.residual:.3g} exceeds tolerance {self.tol:.3g}")


@dataclass
class ContentParams:
    """Knobs shared by fiber extraction and content estimation."""

    tol: float = 1e-8
    target_points: int = 20_000
    budget: int = 200_000
    schedule: Optional[Sequence[float]] = None
    candidate_budget: Optional[int] = None
    gate: float = 0.05
    max_iter: int = 50
    workers: int = 1

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.target_points < 2 or self.budget < 1:
            raise ValueError("target_points must be >= 2 and budget >= 1")
        if not self.gate > 0:
            raise ValueError("gate must be positive")

    @property
    def candidates(self) -> int:
        if self.candidate_budget is not None:
            return int(self.candidate_budget)
        return max(1_000_000, 500 * self.target_points)


def _residual_norm(fx, y):
    r = np.linalg.norm(fx - y, axis=1)
    return np.where(np.isfinite(r), r, np.inf)


def gauss_newton_project(f, X, y, tol=1e-8, max_iter=50, halvings=10):
    """Move each row of ``X`` onto ``{f = y}`` with damped Gauss-Newton steps.

    Steps are minimum-norm, ``-pinv(J) r``; a step that does not reduce the
    residual is halved up to ``halvings`` times before the point is given up.
    Returns ``(X, residuals, converged)``.
    """
    X = np.array(X, dtype=float)
    y = np.asarray(y, dtype=float)
    res = _residual_norm(f.evaluate(X, errors="nan"), y)
    stuck = ~np.isfinite(res)
    for _ in range(max_iter):
        active = np.flatnonzero((res > tol) & ~stuck)
        if len(active) == 0:
            break
        xa = X[active]
        r = f.evaluate(xa, errors="nan") - y
        J = f.jacobian(xa, errors="nan")
        ok = np.all(np.isfinite(J), axis=(1, 2)) & np.all(np.isfinite(r), axis=1)
        J = np.where(ok[:, None, None], J, 0.0)
        step = -np.einsum("nij,nj->ni", np.linalg.pinv(J), np.where(ok[:, None], r, 0.0))
        alpha = np.ones(len(active))
        pending = ok.copy()
        for _ in range(halvings + 1):
            idx = np.flatnonzero(pending)
            if len(idx) == 0:
                break
            trial = xa[idx] + alpha[idx, None] * step[idx]
            new_res = _residual_norm(f.evaluate(trial, errors="nan"), y)
            better = new_res < res[active[idx]]
            X[active[idx[better]]] = trial[better]
            res[active[idx[better]]] = new_res[better]
            pending[idx[better]] = False
            alpha[idx[~better]] *= 0.5
        stuck[active[pending | ~ok]] = True
    return X, res, res <= tol


def _output_scale(f, domain, stream):
    fx = f.evaluate(domain.sample(_PILOT, stream), errors="nan")
    fx = fx[np.all(np.isfinite(fx), axis=1)]
    if len(fx) == 0:
        return 1.0, None
    span = float(np.max(fx.max(axis=0) - fx.min(axis=0)))
    return (span if span > 0 else 1.0), fx


def extract_fiber(f, y, domain: DomainSpec, tol: float = 1e-8, target_points: int = 20_000,
                  stream: Optional[RandomStream] = None, params: Optional[ContentParams] = None,
                  workers: int = 1) -> FiberCloud:
    """Sample the fiber ``f^{-1}(y)`` inside ``domain``.

    Raises :class:`EmptyFiberError` when no candidate passes the gate (y is
    outside the image) and :class:`NonConvergenceError` when more than half
    the candidates fail to refine.
    """
    if params is None:
        params = ContentParams(tol=tol, target_points=target_points, workers=workers)
    stream = stream or RandomStream()
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (f.k,):
        raise ValueError(f"y must have length {f.k}, got {y.shape}")
    if f.n != domain.n:
        raise ValueError(f"map takes {f.n} inputs but the domain has dimension {domain.n}")
    if not f.k < f.n:
        raise ValueError("fibers need k < n")

    scale, _ = _output_scale(f, domain, stream.substream(0))
    gate = params.gate * scale
    target = params.target_points
    kept: List[np.ndarray] = []
    n_kept = n_candidates = n_failed = drawn = 0
    batch = 0
    while n_kept < target and drawn < params.candidates:
        sizes = []
        for _ in range(_BATCH_CHUNKS):
            size = min(CHUNK_SIZE, params.candidates - drawn - sum(sizes))
            if size <= 0:
                break
            sizes.append(size)
        streams = [stream.substream(1, batch, i) for i in range(len(sizes))]

        def gated(task):
            size, s = task
            X = domain.sample(size, s)
            return X[_residual_norm(f.evaluate(X, errors="nan"), y) <= gate]

        tasks = list(zip(sizes, streams))
        if params.workers > 1:
            with ThreadPoolExecutor(max_workers=params.workers) as pool:
                cands = list(pool.map(gated, tasks))
        else:
            cands = [gated(t) for t in tasks]
        drawn += sum(sizes)
        batch += 1
        cand = np.concatenate(cands)
        if len(cand) == 0:
            continue
        X, res, conv = gauss_newton_project(f, cand, y, params.tol, params.max_iter)
        n_candidates += len(cand)
        n_failed += int(np.count_nonzero(~conv))
        good = conv & domain.contains(X)
        kept.append(X[good])
        n_kept += int(np.count_nonzero(good))

    if n_candidates == 0:
        raise EmptyFiberError(
            f"no candidate within {gate:.3g} of y={y.tolist()} among {drawn} draws"
        )
    if n_failed > 0.5 * n_candidates:
        raise NonConvergenceError(
            f"{n_failed} of {n_candidates} candidates failed to reach tolerance {params.tol:g}"
        )
    if n_kept < max(target / 2, 2):
        raise FiberError(f"only {n_kept} fiber points found, need at least {target / 2:g}")
    pts = np.concatenate(kept)[:target]
    res = _residual_norm(f.evaluate(pts, errors="nan"), y)
    cloud = PointCloud(pts, 3.0 * median_spacing(pts))
    return FiberCloud(cloud, y, float(res.max()), params.tol)


def fiber_content(f, y, domain: DomainSpec, params: Optional[ContentParams] = None,
                  stream: Optional[RandomStream] = None) -> ContentEstimate:
    """Content of dimension ``n - k`` of the fiber ``f^{-1}(y)``."""
    params = params or ContentParams()
    stream = stream or RandomStream()
    fiber = extract_fiber(f, y, domain, stream=stream.substream(0), params=params)
    return minkowski_content(
        fiber.cloud, f.n - f.k, params.schedule, params.budget, stream.substream(1),
        workers=params.workers,
    )


def default_y_grid(f, domain: DomainSpec, size: int = 5, stream: Optional[RandomStream] = None):
    """Interior grid over the sampled range of f: ``size`` values per output axis."""
    stream = stream or RandomStream()
    _, fx = _output_scale(f, domain, stream)
    if fx is None:
        raise FiberError("map is undefined on the sampled domain")
    axes = [np.linspace(lo, hi, size + 2)[1:-1] for lo, hi in zip(fx.min(axis=0), fx.max(axis=0))]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass
class WaistProfile:
    y_grid: np.ndarray
    contents: List[Optional[ContentEstimate]]
    statuses: List[str]
    argmax_y: int = field(init=False)

    def __post_init__(self):
        self.y_grid = np.atleast_2d(np.asarray(self.y_grid, dtype=float))
        if len(self.y_grid) == 0:
            raise ValueError("y grid must be non-empty")
        if not len(self.contents) == len(self.statuses) == len(self.y_grid):
            raise ValueError("one content and status per grid point")
        self.argmax_y = int(np.argmax(self.values))

    @property
    def values(self) -> np.ndarray:
        return np.array([c.value if c is not None else 0.0 for c in self.contents])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([c.stderr if c is not None else 0.0 for c in self.contents])

    @property
    def max_content(self) -> float:
        return float(self.values[self.argmax_y])

    @property
    def best_y(self) -> np.ndarray:
        return self.y_grid[self.argmax_y]

    def write_csv(self, path) -> None:
        k = self.y_grid.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"y{i + 1}" for i in range(k)] + ["content", "stderr", "status"])
            for y, v, e, s in zip(self.y_grid, self.values, self.stderrs, self.statuses):
                writer.writerow([f"{c:.17g}" for c in y] + [f"{v:.17g}", f"{e:.17g}", s])


def waist_profile(f, domain: DomainSpec, y_grid, params: Optional[ContentParams] = None,
                  stream: Optional[RandomStream] = None) -> WaistProfile:
    """Fiber content at every grid value; failed grid points count as content 0."""
    params = params or ContentParams()
    stream = stream or RandomStream()
    grid = np.asarray(y_grid, dtype=float).reshape(-1, f.k) if np.size(y_grid) else np.empty((0, f.k))
    if len(grid) == 0:
        raise ValueError("y grid must be non-empty")
    contents, statuses = [], []
    for i, y in enumerate(grid):
        try:
            contents.append(fiber_content(f, y, domain, params, stream.substream(i)))
            statuses.append("ok")
        except FiberError as exc:
            contents.append(None)
            statuses.append(exc.status)
        except ValueError:
            # schedule incompatible with this fiber's resolution
            contents.append(None)
            statuses.append("underresolved")
    return WaistProfile(grid, contents, statuses)


@dataclass
class WaistReport:
    name: str
    bound: float
    tolerance: float
    profile: WaistProfile

    @property
    def estimate(self) -> float:
        return self.profile.max_content

    @property
    def stderr(self) -> float:
        return float(self.profile.stderrs[self.profile.argmax_y])

    @property
    def passed(self) -> bool:
        return self.estimate >= self.bound * (1.0 - self.tolerance)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bound": self.bound,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "argmax_y": self.profile.best_y.tolist(),
            "pass": self.passed,
        }


def _check(name, bound, f, domain, y_grid, params, stream, tolerance):
    stream = stream or RandomStream()
    if y_grid is None:
        y_grid = default_y_grid(f, domain, stream=stream.substream(1 << 32))
    profile = waist_profile(f, domain, y_grid, params, stream)
    return WaistReport(name, bound, tolerance, profile)


def ball_waist_check(f, n: int, y_grid=None, params=None, stream=None, tolerance=0.05) -> WaistReport:
    """Largest fiber of ``f`` on B^n against ``v_(n-k)``."""
    return _check("ball-waist", unit_ball_volume(n - f.k), f, DomainSpec.ball(n),
                  y_grid, params, stream, tolerance)


def ellipsoid_waist_check(axes, f, y_grid=None, params=None, stream=None, tolerance=0.05) -> WaistReport:
    """Largest fiber on the ellipsoid against ``v_(n-k)`` times the ``n-k`` shortest axes."""
    domain = DomainSpec.ellipsoid(axes)
    m = domain.n - f.k
    bound = unit_ball_volume(m) * math.prod(domain.dims[:m])
    return _check("ellipsoid-waist", bound, f, domain, y_grid, params, stream, tolerance)


def parallelotope_waist_check(dims, f, y_grid=None, params=None, stream=None, tolerance=0.05) -> WaistReport:
    """Largest fiber on the open box against the product of the ``n-k`` shortest sides."""
    domain = DomainSpec.box(dims)
    bound = math.prod(domain.dims[: domain.n - f.k])
    return _check("parallelotope-waist", bound, f, domain, y_grid, params, stream, tolerance)
