"""Reproducible random streams and uniform samplers on spheres and balls.

Every sampler is a pure function of its arguments and a :class:`RandomStream`.
Large draws are cut into fixed-size chunks and chunk ``i`` is drawn from
``stream.substream(i)``, so the output never depends on how many workers
produced the chunks.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CHUNK_SIZE",
    "RandomStream",
    "chunked",
    "sample_sphere",
    "archimedes_project",
    "sample_ball",
    "radial_cdf_distance",
    "sign_balance",
    "write_points_csv",
]

CHUNK_SIZE = 1 << 16
_MASK64 = (1 << 64) - 1
# norms below this are redrawn before normalizing
_TINY_NORM = 1e-12


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RandomStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    The generator is Philox4x64 with key ``(seed, stream_id)`` and its block
    counter starting at ``counter``.  Streams with equal keys replay the same
    sequence; distinct ``stream_id`` values give independent sequences.
    """

    seed: int = 0
    stream_id: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id", "counter"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or not 0 <= value <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(
            key=np.array([self.seed, self.stream_id], dtype=np.uint64),
            counter=np.array([self.counter, 0, 0, 0], dtype=np.uint64),
        )
        return np.random.Generator(bitgen)

    def substream(self, *path: int) -> "RandomStream":
        """Derive a child stream; ``s.substream(i, j) == s.substream(i).substream(j)``."""
        sid = self.stream_id
        for index in path:
            sid = _splitmix64(_splitmix64(sid) ^ (int(index) & _MASK64))
        return RandomStream(self.seed, sid, 0)


def chunked(count, stream, draw, workers=1, chunk_size=CHUNK_SIZE):
    """Run ``draw(size, stream)`` over fixed chunks and concatenate the results.

    The chunk layout only depends on ``count`` and ``chunk_size``, never on
    ``workers``.
    """
    sizes = [min(chunk_size, count - start) for start in range(0, count, chunk_size)]
    tasks = [(size, stream.substream(i)) for i, size in enumerate(sizes)]
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda task: draw(*task), tasks))
    else:
        parts = [draw(*task) for task in tasks]
    return parts


def _sphere_chunk(m, size, stream):
    rng = stream.generator()
    pts = rng.standard_normal((size, m + 1))
    norms = np.linalg.norm(pts, axis=1)
    bad = norms < _TINY_NORM
    while bad.any():
        pts[bad] = rng.standard_normal((int(bad.sum()), m + 1))
        norms[bad] = np.linalg.norm(pts[bad], axis=1)
        bad = norms < _TINY_NORM
    return pts / norms[:, None]


def sample_sphere(m: int, count: int, stream: RandomStream, workers: int = 1) -> np.ndarray:
    """Uniform sample of ``count`` points on S^m, returned as a ``(count, m+1)`` array."""
    if m < 0 or count < 0:
        raise ValueError("m and count must be non-negative")
    if count == 0:
        return np.empty((0, m + 1))
    parts = chunked(count, stream, lambda size, s: _sphere_chunk(m, size, s), workers)
    return np.concatenate(parts)


def archimedes_project(p) -> np.ndarray:
    """Orthogonal projection S^(n+1) -> B^n keeping the first n coordinates.

    Accepts a single point of length n+2 or an array of shape ``(N, n+2)``.
    The uniform measure on S^(n+1) is pushed to 2*pi times Lebesgue measure
    on the unit ball B^n.
    """
    p = np.asarray(p, dtype=float)
    if p.shape[-1] < 3:
        raise ValueError(
            f"expected a point of S^(n+1) with n >= 1 (length >= 3), got length {p.shape[-1]}"
        )
    return p[..., :-2].copy()


def _ball_chunk_direct(n, size, stream):
    rng = stream.generator()
    # radius from an independent child so directions match sample_sphere's chunk
    direction = _sphere_chunk(n - 1, size, stream.substream(0))
    radius = rng.random(size) ** (1.0 / n)
    return direction * radius[:, None]


def _ball_chunk_archimedes(n, size, stream):
    return archimedes_project(_sphere_chunk(n + 1, size, stream))


def sample_ball(n: int, count: int, stream: RandomStream, backend: str = "direct",
                workers: int = 1) -> np.ndarray:
    """Uniform sample of ``count`` points in the unit ball B^n.

    ``backend="direct"`` draws a uniform direction and a radius ``u**(1/n)``;
    ``backend="archimedes"`` draws from S^(n+1) and projects.
    """
    if n < 1:
        raise ValueError(f"ball dimension must be positive, got {n}")
    if count < 0:
        raise ValueError("count must be non-negative")
    if count == 0:
        return np.empty((0, n))
    if backend == "direct":
        draw = lambda size, s: _ball_chunk_direct(n, size, s)
    elif backend == "archimedes":
        draw = lambda size, s: _ball_chunk_archimedes(n, size, s)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return np.concatenate(chunked(count, stream, draw, workers))


def radial_cdf_distance(points, n: int) -> float:
    """Kolmogorov-Smirnov distance between the radii of ``points`` and ``r**n``.

    ``r**n`` is the radial CDF of the uniform distribution on B^n.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, n)
    if len(pts) == 0:
        raise ValueError("radial_cdf_distance needs at least one point")
    r = np.sort(np.linalg.norm(pts, axis=1))
    if r[-1] > 1.0 + 1e-9:
        raise ValueError(f"point with norm {r[-1]!r} lies outside the closed unit ball")
    cdf = np.minimum(r, 1.0) ** n
    count = len(r)
    above = np.arange(1, count + 1) / count - cdf
    below = cdf - np.arange(count) / count
    return float(max(above.max(), below.max()))


def sign_balance(points) -> np.ndarray:
    """Per-coordinate mean of ``sign(x_i)``; near 0 for a centrally symmetric sample."""
    pts = np.asarray(points, dtype=float)
    return np.sign(pts).mean(axis=0)


def write_points_csv(path, points) -> None:
    pts = np.asarray(points, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(pts.shape[1])])
        for row in pts:
            writer.writerow([f"{v:.17g}" for v in row])
