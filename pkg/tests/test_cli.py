import csv
import json
import subprocess
import sys

import pytest

from waistlab.cli import ConfigError, load_config, main, parse_cli, run_config, validate

from conftest import CONFIGS


def write(tmp_path, obj, name="c.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def test_defaults_from_experiment_flag():
    cfg = parse_cli(["--experiment", "volumes"])
    assert cfg.experiment == "volumes" and cfg.seed == 0 and cfg.workers == 1
    assert cfg.params["max_dim"] == 20


def test_seed_flag_overrides_config(tmp_path):
    cfg = parse_cli(["--config", write(tmp_path, {"experiment": "volumes", "seed": 3}), "--seed", "9"])
    assert cfg.seed == 9


def test_missing_config_file():
    with pytest.raises(ConfigError, match="not found: missing.json"):
        parse_cli(["--config", "missing.json"])


@pytest.mark.parametrize("seed", ["-1", str(1 << 64)])
def test_seed_out_of_range(seed):
    with pytest.raises(ConfigError, match="--seed"):
        parse_cli(["--experiment", "volumes", "--seed", seed])


def test_unknown_flag():
    with pytest.raises(ConfigError, match="usage"):
        parse_cli(["--experiment", "volumes", "--frobnicate"])


def test_bad_workers():
    with pytest.raises(ConfigError, match="--workers"):
        parse_cli(["--experiment", "volumes", "--workers", "0"])


def test_malformed_json_location(tmp_path):
    path = write(tmp_path, '{"experiment": "volumes",\n "seed": }')
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert "line 2" in str(exc.value) and "offset" in str(exc.value)


@pytest.mark.parametrize(
    "raw, field",
    [
        ({}, "config.experiment"),
        ({"experiment": "nope"}, "config.experiment"),
        ({"experiment": "volumes", "max_dims": 3}, "config.max_dims"),
        ({"experiment": "volumes", "max_dim": -1}, "config.max_dim"),
        ({"experiment": "volumes", "seed": 1.5}, "config.seed"),
        ({"experiment": "waist", "map": {"kind": "expr", "n": 3, "k": 1, "text": "x1 +"}}, "config.map"),
        ({"experiment": "waist", "map": {"kind": "expr", "n": 2, "k": 1, "text": "x1"}}, "config.map"),
        ({"experiment": "waist", "domain": {"kind": "torus", "n": 3}}, "config.domain"),
        ({"experiment": "shrink-lemma", "factors": [0.5, 1.5]}, "config.factors"),
        ({"experiment": "sandwich", "factors": [1.0, 2.0, 3.0]}, "config.factors"),
    ],
)
def test_validation_errors_name_the_field(raw, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        validate(raw)


def test_config_echo_round_trip(tmp_path):
    raw = json.loads((CONFIGS / "waist_ball3.json").read_text())
    cfg = validate(raw)
    again = validate(json.loads(json.dumps(cfg.echo())))
    assert again.echo() == cfg.echo()
    assert cfg.echo()["grid"] == raw["grid"]


def test_bundled_configs_validate():
    names = sorted(p.name for p in CONFIGS.glob("*.json"))
    assert len(names) == 10
    for name in names:
        validate(load_config(CONFIGS / name))


def test_volumes_run(tmp_path):
    out = tmp_path / "v"
    assert main(["--config", str(CONFIGS / "volumes.json"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report) == {"experiment", "seed", "config", "checks", "pass", "version"}
    assert report["pass"] is True
    for check in report["checks"]:
        assert set(check) == {"name", "bound", "estimate", "stderr", "pass"}
    rows = list(csv.DictReader((out / "volumes.csv").open()))
    assert len(rows) == 102
    assert all(float(r["recurrence_residual"]) <= 1e-12 for r in rows)
    assert all(float(r["archimedes_residual"]) <= 1e-12 for r in rows[:-1])
    assert json.loads((out / "timing.json").read_text())["elapsed_s"] >= 0


def test_failed_check_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, {"experiment": "archimedes", "samples": 2000, "pairs": 100, "threshold": 1e-6})
    assert main(["--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_error_exits_1(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "none.json")]) == 1
    assert "not found" in capsys.readouterr().err


def test_shrink_run_without_write():
    cfg = validate({"experiment": "shrink-lemma", "cases": 200, "seed": 5})
    report = run_config(cfg, write=False)
    assert report["pass"] and [c["estimate"] for c in report["checks"]] == [0, 0]


def test_archimedes_sample_dump(tmp_path):
    cfg = validate({"experiment": "archimedes", "samples": 5000, "pairs": 100, "dump_samples": 10,
                    "threshold": 0.05})
    cfg.out = str(tmp_path)
    run_config(cfg)
    lines = (tmp_path / "samples.csv").read_bytes().split(b"\n")
    assert lines[0] == b"x1,x2,x3" and len(lines) == 12 and b"\r" not in lines[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "waistlab", "--experiment", "volumes", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.count("PASS") == 2
