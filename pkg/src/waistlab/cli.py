"""Run a named experiment from a JSON config and write ``report.json`` plus CSVs.

    waistlab --experiment volumes --out runs/volumes
    waistlab --config waist.json --seed 42 --workers 4 --out runs/waist

Exit status is 0 when every check passes, 2 when a check fails and 1 when
the run itself errors (bad config, unreadable file, ...).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from . import __version__
from .fibers import (
    ContentParams,
    DomainSpec,
    ball_waist_check,
    ellipsoid_waist_check,
    fiber_content,
    parallelotope_waist_check,
    waist_profile,
)
from .geom import VolumeTable, unit_ball_volume
from .linmap import DiagonalMap, SHRINK_FACTORS, homothety_content_check, sandwich_check, shrink_lemma_suite
from .maplang import MapSyntaxError, map_from_config
from .minkowski import circle_cloud, disk_cloud, minkowski_content, segment_cloud
from .sampling import (
    RandomStream,
    archimedes_project,
    radial_cdf_distance,
    sample_ball,
    sample_sphere,
    sign_balance,
    write_points_csv,
)

__all__ = ["ConfigError", "ExperimentConfig", "parse_cli", "load_config", "run_config", "main"]

_U64 = (1 << 64) - 1
_X1_BALL3 = {"kind": "expr", "n": 3, "k": 1, "text": "x1"}
_CONTENT_KNOBS = {
    "schedule": None,
    "budget": 200_000,
    "target_points": 100_000,
    "tol": 1e-8,
    "tolerance": 0.05,
}

# experiment -> allowed keys with defaults
DEFAULTS: Dict[str, dict] = {
    "volumes": {"max_dim": 20, "threshold": 1e-12},
    "archimedes": {"n": 3, "samples": 1_000_000, "pairs": 100_000, "threshold": 0.005,
                   "dump_samples": 0},
    "content": {"domain": {"kind": "ball", "n": 3}, "map": _X1_BALL3, "y": [0.0],
                "cloud": None, "k": None, "expected": None, **_CONTENT_KNOBS},
    "waist": {"domain": {"kind": "ball", "n": 3}, "map": _X1_BALL3, "grid": None,
              "grid_size": 5, **_CONTENT_KNOBS},
    "ellipsoid": {"axes": [1.0, 2.0, 3.0], "map": {"kind": "expr", "n": 3, "k": 1, "text": "x3"},
                  "grid": None, "grid_size": 5, **_CONTENT_KNOBS},
    "parallelotope": {"dims": [1.0, 2.0, 3.0], "map": {"kind": "expr", "n": 3, "k": 1, "text": "x3"},
                      "grid": None, "grid_size": 5, **_CONTENT_KNOBS},
    "sandwich": {"cloud": {"kind": "circle", "radius": 1.0, "count": 4000}, "k": 1,
                 "factors": [2.0, 3.0], "schedule": None, "budget": 1_000_000,
                 "allowance": 0.03, "homothety": None},
    "shrink-lemma": {"cases": 10_000, "factors": list(SHRINK_FACTORS)},
}
EXPERIMENTS = tuple(DEFAULTS)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    out: str = "waistlab-out"
    workers: int = 1

    def echo(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, **self.params}


# --- validation --------------------------------------------------------------

def _positive_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{path}: expected a positive integer, got {value!r}")
    return value


def _nonneg_int(value, path):
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(f"{path}: expected a non-negative integer, got {value!r}")
    return value


def _positive(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{path}: expected a positive number, got {value!r}")
    return float(value)


def _positive_list(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty list of positive numbers")
    return [_positive(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _seed(value, path="seed"):
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value <= _U64:
        raise ConfigError(f"{path}: seed must be an unsigned 64-bit integer, got {value!r}")
    return value


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        where = ", ".join(f"{path}.{key}" for key in unknown)
        raise ConfigError(f"{where}: unknown key (allowed: {', '.join(sorted(allowed))})")


def _domain(spec, path):
    _check_keys(spec, {"kind", "n", "axes", "dims"}, path)
    kind = spec.get("kind")
    if kind == "ball":
        _check_keys(spec, {"kind", "n"}, path)
        return DomainSpec.ball(_positive_int(spec.get("n"), f"{path}.n"))
    if kind == "ellipsoid":
        _check_keys(spec, {"kind", "axes"}, path)
        return DomainSpec.ellipsoid(_positive_list(spec.get("axes"), f"{path}.axes"))
    if kind == "box":
        _check_keys(spec, {"kind", "dims"}, path)
        return DomainSpec.box(_positive_list(spec.get("dims"), f"{path}.dims"))
    raise ConfigError(f"{path}.kind: expected ball, ellipsoid or box, got {kind!r}")


def _map(spec, path):
    _check_keys(spec, {"kind", "n", "k", "text", "matrix", "offset"}, path)
    if spec.get("kind") == "expr":
        _check_keys(spec, {"kind", "n", "k", "text"}, path)
        _positive_int(spec.get("n"), f"{path}.n")
        _positive_int(spec.get("k"), f"{path}.k")
        if not isinstance(spec.get("text"), str):
            raise ConfigError(f"{path}.text: expected a string")
    elif spec.get("kind") == "linear":
        _check_keys(spec, {"kind", "matrix", "offset"}, path)
    else:
        raise ConfigError(f"{path}.kind: expected expr or linear, got {spec.get('kind')!r}")
    try:
        return map_from_config(spec)
    except (MapSyntaxError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _cloud(spec, path):
    _check_keys(spec, {"kind", "radius", "count", "length", "spacing", "ambient_dim"}, path)
    kind = spec.get("kind")
    if kind == "circle":
        _check_keys(spec, {"kind", "radius", "count"}, path)
        return circle_cloud(_positive(spec.get("radius", 1.0), f"{path}.radius"),
                            _positive_int(spec.get("count", 4000), f"{path}.count"))
    if kind == "segment":
        _check_keys(spec, {"kind", "length", "count", "ambient_dim"}, path)
        return segment_cloud(_positive(spec.get("length", 1.0), f"{path}.length"),
                             _positive_int(spec.get("count", 1000), f"{path}.count"),
                             _positive_int(spec.get("ambient_dim", 2), f"{path}.ambient_dim"))
    if kind == "disk":
        _check_keys(spec, {"kind", "radius", "spacing", "ambient_dim"}, path)
        return disk_cloud(_positive(spec.get("radius", 1.0), f"{path}.radius"),
                          _positive(spec.get("spacing", 0.005), f"{path}.spacing"),
                          _positive_int(spec.get("ambient_dim", 3), f"{path}.ambient_dim"))
    raise ConfigError(f"{path}.kind: expected circle, segment or disk, got {kind!r}")


def _schedule(value, path):
    if value is None:
        return None
    sched = _positive_list(value, path)
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ConfigError(f"{path}: schedule must be strictly decreasing")
    return sched


def _content_params(p, path, workers):
    return ContentParams(
        tol=_positive(p["tol"], f"{path}.tol"),
        target_points=_positive_int(p["target_points"], f"{path}.target_points"),
        budget=_positive_int(p["budget"], f"{path}.budget"),
        schedule=_schedule(p["schedule"], f"{path}.schedule"),
        workers=workers,
    )


def _grid(value, k, path):
    if value is None:
        return None
    try:
        grid = np.asarray(value, dtype=float).reshape(-1, k)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a list of {k}-vectors") from None
    if len(grid) == 0:
        raise ConfigError(f"{path}: grid must be non-empty")
    return grid


def validate(raw: dict) -> ExperimentConfig:
    """Check a raw config mapping and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    experiment = raw.get("experiment")
    if experiment is None:
        raise ConfigError("config.experiment: required (one of " + ", ".join(EXPERIMENTS) + ")")
    if experiment not in DEFAULTS:
        raise ConfigError(f"config.experiment: unknown experiment {experiment!r}")
    defaults = DEFAULTS[experiment]
    _check_keys(raw, {"experiment", "seed", *defaults}, "config")
    params = json.loads(json.dumps(defaults))
    params.update({k: v for k, v in raw.items() if k not in ("experiment", "seed")})
    cfg = ExperimentConfig(experiment, _seed(raw.get("seed", 0), "config.seed"), params)
    # build every object once so errors surface before any work starts
    _prepare(cfg)
    return cfg


def _prepare(cfg: ExperimentConfig) -> dict:
    p, path, w = cfg.params, "config", cfg.workers
    e = cfg.experiment
    if e == "volumes":
        return {"max_dim": _nonneg_int(p["max_dim"], f"{path}.max_dim"),
                "threshold": _positive(p["threshold"], f"{path}.threshold")}
    if e == "archimedes":
        return {"n": _positive_int(p["n"], f"{path}.n"),
                "samples": _positive_int(p["samples"], f"{path}.samples"),
                "pairs": _positive_int(p["pairs"], f"{path}.pairs"),
                "threshold": _positive(p["threshold"], f"{path}.threshold"),
                "dump_samples": _nonneg_int(p["dump_samples"], f"{path}.dump_samples")}
    if e == "shrink-lemma":
        factors = _positive_list(p["factors"], f"{path}.factors")
        if any(a > 1 for a in factors):
            raise ConfigError(f"{path}.factors: shrink factors must lie in (0, 1]")
        return {"cases": _positive_int(p["cases"], f"{path}.cases"), "factors": factors}
    if e == "sandwich":
        cloud = _cloud(p["cloud"], f"{path}.cloud")
        k = _positive_int(p["k"], f"{path}.k")
        if k >= cloud.ambient_dim:
            raise ConfigError(f"{path}.k: content dimension must be below {cloud.ambient_dim}")
        factors = _positive_list(p["factors"], f"{path}.factors")
        if len(factors) != cloud.ambient_dim:
            raise ConfigError(f"{path}.factors: need {cloud.ambient_dim} factors")
        lam = p["homothety"]
        return {"cloud": cloud, "k": k, "dmap": DiagonalMap(factors),
                "schedule": _schedule(p["schedule"], f"{path}.schedule"),
                "budget": _positive_int(p["budget"], f"{path}.budget"),
                "allowance": _positive(p["allowance"], f"{path}.allowance"),
                "homothety": None if lam is None else _positive(lam, f"{path}.homothety")}

    prepared = {"params": _content_params(p, path, w),
                "tolerance": _positive(p["tolerance"], f"{path}.tolerance")}
    if e == "content" and p["cloud"] is not None:
        cloud = _cloud(p["cloud"], f"{path}.cloud")
        k = p["k"]
        if k is None or _nonneg_int(k, f"{path}.k") >= cloud.ambient_dim:
            raise ConfigError(f"{path}.k: content dimension below {cloud.ambient_dim} required with a cloud")
        prepared.update(cloud=cloud, k=k)
    else:
        f = _map(p["map"], f"{path}.map")
        if e == "content" or e == "waist":
            domain = _domain(p["domain"], f"{path}.domain")
        elif e == "ellipsoid":
            domain = DomainSpec.ellipsoid(_positive_list(p["axes"], f"{path}.axes"))
        else:
            domain = DomainSpec.box(_positive_list(p["dims"], f"{path}.dims"))
        if f.n != domain.n:
            raise ConfigError(f"{path}.map: map has {f.n} inputs, domain has dimension {domain.n}")
        if not f.k < f.n:
            raise ConfigError(f"{path}.map: need k < n")
        prepared.update(map=f, domain=domain)
        if e == "content":
            y = _grid(p["y"], f.k, f"{path}.y")
            if y is None or len(y) != 1:
                raise ConfigError(f"{path}.y: expected a single {f.k}-vector")
            prepared["y"] = y[0]
        else:
            prepared["grid"] = _grid(p["grid"], f.k, f"{path}.grid")
            prepared["grid_size"] = _positive_int(p["grid_size"], f"{path}.grid_size")
    if e == "content" and p["expected"] is not None:
        prepared["expected"] = _positive(p["expected"], f"{path}.expected")
    return prepared


# --- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def _build_parser():
    parser = _Parser(prog="waistlab", description="Waist-inequality verification experiments.")
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    parser.add_argument("--out", default="waistlab-out", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="worker threads")
    parser.add_argument("--experiment", choices=EXPERIMENTS, help="experiment (overrides the config)")
    return parser


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno} (offset {exc.pos}): {exc.msg}"
        ) from None


def parse_cli(args: List[str]) -> ExperimentConfig:
    ns = _build_parser().parse_args(args)
    raw = load_config(ns.config) if ns.config else {}
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    if ns.experiment is not None:
        if raw.get("experiment") not in (None, ns.experiment):
            # keys of another experiment would be rejected as unknown
            raw = {k: v for k, v in raw.items() if k in DEFAULTS[ns.experiment] or k == "seed"}
        raw["experiment"] = ns.experiment
    if ns.seed is not None:
        raw["seed"] = _seed(ns.seed, "--seed")
    if ns.workers < 1:
        raise ConfigError(f"--workers: expected a positive integer, got {ns.workers}")
    cfg = validate(raw)
    cfg.out = ns.out
    cfg.workers = ns.workers
    return cfg


# --- experiments -------------------------------------------------------------

def _row(name, bound, estimate, stderr, passed):
    return {"name": name, "bound": bound, "estimate": estimate, "stderr": stderr, "pass": bool(passed)}


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def _csv(rows, header):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _run_volumes(cfg, prep, files):
    table = VolumeTable(prep["max_dim"])
    rows = list(table.rows())
    files["volumes.csv"] = _csv(rows, ["l", "v_l", "s_l", "recurrence_residual", "archimedes_residual"])
    rec = max(table.recurrence_residuals().values(), default=0.0)
    arch = max(table.archimedes_residuals().values(), default=0.0)
    thr = prep["threshold"]
    return [_row("recurrence", thr, rec, 0.0, rec <= thr),
            _row("archimedes-identity", thr, arch, 0.0, arch <= thr)]


def _run_archimedes(cfg, prep, files):
    n, count, thr = prep["n"], prep["samples"], prep["threshold"]
    root, w = RandomStream(cfg.seed), cfg.workers
    projected = archimedes_project(sample_sphere(n + 1, count, root.substream(0), w))
    direct = sample_ball(n, count, root.substream(1), "direct", w)
    d_arch = radial_cdf_distance(projected, n)
    d_direct = radial_cdf_distance(direct, n)
    u = sample_sphere(n + 1, prep["pairs"], root.substream(2), w)
    v = sample_sphere(n + 1, prep["pairs"], root.substream(3), w)
    excess = np.linalg.norm(archimedes_project(u) - archimedes_project(v), axis=1) - np.linalg.norm(u - v, axis=1)
    lipschitz = int(np.count_nonzero(excess > 1e-12))
    sign_bound = 5.0 / math.sqrt(count)
    balance = float(np.max(np.abs(sign_balance(projected))))
    files["archimedes.csv"] = _csv(
        [["archimedes", d_arch, balance], ["direct", d_direct, float(np.max(np.abs(sign_balance(direct))))]],
        ["backend", "ks_distance", "max_sign_balance"],
    )
    if prep["dump_samples"]:
        files["samples.csv"] = _csv(projected[: prep["dump_samples"]].tolist(), [f"x{i + 1}" for i in range(n)])
    return [
        _row("radial-ks-archimedes", thr, d_arch, 0.0, d_arch <= thr),
        _row("radial-ks-direct", thr, d_direct, 0.0, d_direct <= thr),
        _row("sign-balance-archimedes", sign_bound, balance, 1.0 / math.sqrt(count), balance <= sign_bound),
        _row("lipschitz-violations", 0, lipschitz, 0.0, lipschitz == 0),
    ]


def _run_content(cfg, prep, files):
    params, root = prep["params"], RandomStream(cfg.seed)
    if "cloud" in prep:
        est = minkowski_content(prep["cloud"], prep["k"], params.schedule, params.budget,
                                root, workers=cfg.workers)
    else:
        est = fiber_content(prep["map"], prep["y"], prep["domain"], params, root)
    files["content.csv"] = _content_csv(est)
    expected = prep.get("expected")
    if expected is None:
        return [_row("content", None, est.value, est.stderr, True)]
    ok = abs(est.value - expected) <= prep["tolerance"] * expected
    return [_row("content", expected, est.value, est.stderr, ok)]


def _content_csv(est):
    rows = [[t, v, e, r] for t, (v, e), r in zip(est.t_values, est.volumes, est.ratios)]
    text = _csv(rows, ["t", "volume", "stderr", "ratio"])
    return text + _csv([[est.value, est.stderr, est.codim, est.ambient_dim]], ["value", "stderr", "k", "n"])


def _run_waist(cfg, prep, files):
    f, domain, params = prep["map"], prep["domain"], prep["params"]
    root = RandomStream(cfg.seed)
    grid = prep["grid"]
    if grid is None:
        from .fibers import default_y_grid
        grid = default_y_grid(f, domain, prep["grid_size"], root.substream(1 << 32))
    kwargs = dict(y_grid=grid, params=params, stream=root, tolerance=prep["tolerance"])
    if cfg.experiment == "waist" and domain.kind == "ball":
        report = ball_waist_check(f, domain.n, **kwargs)
    elif cfg.experiment == "waist":
        report = _generic_waist(f, domain, **kwargs)
    elif cfg.experiment == "ellipsoid":
        report = ellipsoid_waist_check(domain.dims, f, **kwargs)
    else:
        report = parallelotope_waist_check(domain.dims, f, **kwargs)
    prof = report.profile
    rows = [list(y) + [v, e, s] for y, v, e, s in zip(prof.y_grid.tolist(), prof.values.tolist(),
                                                       prof.stderrs.tolist(), prof.statuses)]
    files["profile.csv"] = _csv(rows, [f"y{i + 1}" for i in range(f.k)] + ["content", "stderr", "status"])
    threshold = report.bound * (1 - report.tolerance)
    return [_row(report.name, threshold, report.estimate, report.stderr, report.passed)]


def _generic_waist(f, domain, y_grid, params, stream, tolerance):
    if domain.kind == "ellipsoid":
        return ellipsoid_waist_check(domain.dims, f, y_grid, params, stream, tolerance)
    return parallelotope_waist_check(domain.dims, f, y_grid, params, stream, tolerance)


def _run_sandwich(cfg, prep, files):
    root = RandomStream(cfg.seed)
    rep = sandwich_check(prep["cloud"], prep["k"], prep["dmap"], prep["schedule"], prep["budget"],
                         root.substream(0), prep["allowance"], cfg.workers)
    files["sandwich.json"] = json.dumps(
        {key: rep[key] for key in ("bound_low", "estimate", "bound_high", "pass")}, indent=2) + "\n"
    checks = [_row("sandwich-lower", rep["bound_low"] * (1 - rep["delta"]), rep["estimate"], rep["stderr"],
                   rep["estimate"] >= rep["bound_low"] * (1 - rep["delta"])),
              _row("sandwich-upper", rep["bound_high"] * (1 + rep["delta"]), rep["estimate"], rep["stderr"],
                   rep["estimate"] <= rep["bound_high"] * (1 + rep["delta"]))]
    if prep["homothety"] is not None:
        hom = homothety_content_check(prep["cloud"], prep["k"], prep["homothety"], prep["schedule"],
                                      prep["budget"], root.substream(1), cfg.workers)
        checks.append(_row("homothety", hom["expected"], hom["estimate"], hom["stderr"], hom["pass"]))
    return checks


def _run_shrink(cfg, prep, files):
    res = shrink_lemma_suite(prep["cases"], prep["factors"], RandomStream(cfg.seed))
    rows = zip(res["factors"], res["violations_per_factor"], res["max_excess_per_factor"])
    files["shrink.csv"] = _csv([list(r) for r in rows], ["factor", "violations", "max_excess"])
    return [_row("shrink-violations", 0, res["violations"], 0.0, res["violations"] == 0),
            _row("shrink-monotone-violations", 0, res["monotone_violations"], 0.0,
                 res["monotone_violations"] == 0)]


RUNNERS: Dict[str, Callable] = {
    "volumes": _run_volumes,
    "archimedes": _run_archimedes,
    "content": _run_content,
    "waist": _run_waist,
    "ellipsoid": _run_waist,
    "parallelotope": _run_waist,
    "sandwich": _run_sandwich,
    "shrink-lemma": _run_shrink,
}


def run_config(cfg: ExperimentConfig, write: bool = True) -> dict:
    """Run one experiment; returns the report and writes it with the CSVs into ``cfg.out``.

    ``report.json`` and the CSVs depend only on the config and seed.
    """
    start = time.perf_counter()
    prep = _prepare(cfg)
    files: Dict[str, str] = {}
    checks = RUNNERS[cfg.experiment](cfg, prep, files)
    report = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
        "version": __version__,
    }
    elapsed = time.perf_counter() - start
    if write:
        os.makedirs(cfg.out, exist_ok=True)
        files["report.json"] = json.dumps(report, indent=2) + "\n"
        # wall time and worker count vary between identical runs, so they stay out of the report
        files["timing.json"] = json.dumps({"elapsed_s": elapsed, "workers": cfg.workers}, indent=2) + "\n"
        # single writer, after all work is done
        for name, text in files.items():
            with open(os.path.join(cfg.out, name), "w", newline="\n", encoding="utf-8") as fh:
                fh.write(text)
    return report


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_cli(argv)
        report = run_config(cfg)
    except ConfigError as exc:
        print(f"waistlab: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any failure is an engineering error here
        print(f"waistlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for check in report["checks"]:
        status = "PASS" if check["pass"] else "FAIL"
        print(f"{status}  {check['name']}: estimate={check['estimate']!r} bound={check['bound']!r}")
    return 0 if report["pass"] else 2
