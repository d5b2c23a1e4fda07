"""The twelve acceptance criteria, each at its stated tolerance and time limit.

Every test appends one ``PASS``/``FAIL`` line to ``RESULTS``; the lines are
printed as they happen and again in the pytest terminal summary.
"""
import csv
import json
import math
import time

import numpy as np
import pytest
from scipy import integrate

from waistlab.cli import load_config, run_config, validate
from waistlab.geom import VolumeTable, unit_ball_volume
from waistlab.minkowski import PointCloud, disk_cloud, exact_neighborhood_oracle, neighborhood_volume, segment_cloud
from waistlab.sampling import RandomStream, archimedes_project, radial_cdf_distance, sample_sphere

from conftest import CONFIGS

RESULTS = []


def record(number, title, ok, detail, elapsed=None, limit=None):
    in_time = limit is None or elapsed <= limit
    timing = "" if elapsed is None else f" [{elapsed:.1f}s / limit {limit:g}s]"
    line = f"{'PASS' if ok and in_time else 'FAIL'} {number}: {title}: {detail}{timing}"
    RESULTS.append(line)
    print(line)
    assert ok, line
    assert in_time, line


class Runs:
    """Runs each bundled config once per worker count and keeps the output directory."""

    def __init__(self, base):
        self.base = base
        self.done = {}

    def get(self, name, workers=1):
        key = (name, workers)
        if key not in self.done:
            cfg = validate(load_config(CONFIGS / f"{name}.json"))
            cfg.workers = workers
            cfg.out = str(self.base / f"{name}-w{workers}")
            start = time.perf_counter()
            report = run_config(cfg)
            self.done[key] = (report, self.base / f"{name}-w{workers}", time.perf_counter() - start)
        return self.done[key]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    return Runs(tmp_path_factory.mktemp("acceptance"))


def profile(out_dir):
    with open(out_dir / "profile.csv") as fh:
        rows = list(csv.DictReader(fh))
    ys = np.array([float(r["y1"]) for r in rows])
    vals = np.array([float(r["content"]) for r in rows])
    return ys, vals, [r["status"] for r in rows]


def test_01_volume_identities():
    start = time.perf_counter()
    table = VolumeTable(101)
    arch = max(table.archimedes_residuals()[n] for n in range(101))
    rec = max(table.recurrence_residuals().values())
    elapsed = time.perf_counter() - start
    record(1, "volume identities", arch <= 1e-12 and rec <= 1e-12,
           f"max |s_(n+1) - 2 pi v_n|/s_(n+1) = {arch:.2e}, recurrence {rec:.2e} (<= 1e-12)", elapsed, 1)


def test_02_archimedes_pushforward():
    start = time.perf_counter()
    projected = archimedes_project(sample_sphere(4, 1_000_000, RandomStream(42).substream(0)))
    d = radial_cdf_distance(projected, 3)
    elapsed = time.perf_counter() - start
    record(2, "Archimedes pushforward", d <= 0.005, f"radial KS = {d:.5f} (<= 0.005)", elapsed, 20)


def test_03_projection_lipschitz():
    start = time.perf_counter()
    root = RandomStream(42)
    u = sample_sphere(4, 100_000, root.substream(2))
    v = sample_sphere(4, 100_000, root.substream(3))
    excess = np.linalg.norm(archimedes_project(u) - archimedes_project(v), axis=1) - np.linalg.norm(u - v, axis=1)
    bad = int(np.count_nonzero(excess > 1e-12))
    elapsed = time.perf_counter() - start
    record(3, "1-Lipschitz projection", bad == 0, f"{bad} violations in 1e5 pairs", elapsed, 5)


def test_04_estimator_vs_oracle():
    start = time.perf_counter()
    root = RandomStream(4)
    cases = [
        ("point", PointCloud(np.zeros((1, 3)), 1e-9), dict(n=3), (0.05, 0.1, 0.2)),
        ("segment", segment_cloud(1.0, 2001), dict(length=1.0), (0.02, 0.05, 0.1)),
        ("disk_slab", disk_cloud(1.0, 0.0025), dict(radius=1.0), (0.05, 0.1, 0.2)),
    ]
    worst, lines = 0.0, []
    for i, (shape, cloud, kw, ts) in enumerate(cases):
        for j, t in enumerate(ts):
            est, err = neighborhood_volume(cloud, t, 1_000_000, root.substream(i, j))
            exact = exact_neighborhood_oracle(shape, t, **kw)
            z = abs(est - exact) / err
            worst = max(worst, z)
            lines.append(f"{shape}@{t}:{z:.2f}")
    elapsed = time.perf_counter() - start
    record(4, "estimator vs oracle", worst <= 3.0, f"max |est - exact|/stderr = {worst:.2f} (<= 3)", elapsed, 60)


def test_05_linear_tightness(runs):
    report, out, elapsed = runs.get("waist_ball3")
    ys, vals, _ = profile(out)
    central = float(vals[np.argmin(np.abs(ys))])
    rel = central / math.pi - 1
    record(5, "linear tightness", abs(rel) <= 0.05,
           f"content(x1 = 0) on B3 = {central:.4f} vs pi ({rel:+.2%}, within 5%)", elapsed, 60)


def test_06_slice_law(runs):
    _, out, elapsed = runs.get("slice_law")
    ys, vals, _ = profile(out)
    np.testing.assert_allclose(ys, [0.0, 0.3, 0.6])
    rel = vals / unit_ball_volume(2) / (1 - ys ** 2) - 1
    worst = float(np.max(np.abs(rel)))
    detail = ", ".join(f"y={y:g}: {r:+.2%}" for y, r in zip(ys, rel))
    record(6, "slice law", worst <= 0.05, f"{detail} (within 5%)", elapsed, 180)


def test_07_nonlinear_waist(runs):
    _, out, elapsed = runs.get("waist_nonlinear")
    ys, vals, _ = profile(out)
    best = int(np.argmax(vals))
    expected = 2 * math.pi * math.sqrt(ys[best])
    rel = vals[best] / expected - 1
    ok = vals[best] >= unit_ball_volume(1) and abs(rel) <= 0.05
    record(7, "nonlinear waist", ok,
           f"max content {vals[best]:.4f} at y={ys[best]:g} (>= 2), vs 2 pi sqrt(y) {rel:+.2%}", elapsed, 120)


def test_08_ellipsoid(runs):
    report, out, elapsed = runs.get("ellipsoid")
    _, vals, _ = profile(out)
    bound = 0.95 * 2 * math.pi
    record(8, "ellipsoid corollary", vals.max() >= bound and report["pass"],
           f"max content {vals.max():.4f} >= {bound:.4f}", elapsed, 180)


def test_09_parallelotope(runs):
    report, out, elapsed = runs.get("parallelotope")
    _, vals, _ = profile(out)
    record(9, "parallelotope corollary", vals.max() >= 1.9 and report["pass"],
           f"max content {vals.max():.4f} >= 1.9", elapsed, 120)


def test_10_sandwich(runs):
    _, out, elapsed = runs.get("sandwich")
    est = json.loads((out / "sandwich.json").read_text())["estimate"]
    perimeter = integrate.quad(lambda s: math.hypot(2 * math.sin(s), 3 * math.cos(s)), 0, 2 * math.pi,
                               epsabs=1e-12)[0]
    rel = est / perimeter - 1
    lo, hi = 4 * math.pi * 0.97, 6 * math.pi * 1.03
    ok = abs(rel) <= 0.02 and lo < est < hi and abs(perimeter - 15.8654) < 5e-5
    record(10, "sandwich", ok, f"content {est:.4f} vs perimeter {perimeter:.4f} ({rel:+.2%}), "
           f"inside ({lo:.3f}, {hi:.3f})", elapsed, 120)


def test_11_shrink_lemma(runs):
    report, out, elapsed = runs.get("shrink_lemma")
    with open(out / "shrink.csv") as fh:
        rows = list(csv.DictReader(fh))
    violations = sum(int(r["violations"]) for r in rows)
    excess = max(float(r["max_excess"]) for r in rows)
    ok = len(rows) == 6 and report["config"]["cases"] == 10_000 and violations == 0 and report["pass"]
    record(11, "shrink lemma", ok, f"{violations} violations over 1e4 families x 6 factors, "
           f"max excess {excess:.1e}", elapsed, 10)


def test_12_reproducibility(runs):
    names = sorted(p.stem for p in CONFIGS.glob("*.json"))
    differing = []
    for name in names:
        _, out1, _ = runs.get(name, 1)
        _, out4, _ = runs.get(name, 4)
        files = sorted(p.name for p in out1.iterdir() if p.name != "timing.json")
        if files != sorted(p.name for p in out4.iterdir() if p.name != "timing.json"):
            differing.append(f"{name}: file sets differ")
            continue
        differing += [f"{name}/{f}" for f in files if (out1 / f).read_bytes() != (out4 / f).read_bytes()]
    record(12, "reproducibility", not differing,
           f"{len(names)} configs, workers 1 vs 4: " + ("byte-identical" if not differing else ", ".join(differing)))
