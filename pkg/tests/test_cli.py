import csv
import json
import shutil
import subprocess

import pytest

from lrsim.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, format_cell, run
from lrsim.experiments import ConfigError, run_experiment, validate_config


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_missing_seed_defaults_to_zero():
    cfg = validate_config("experiment: light-cone-table\nalphas: [3]\n")
    assert cfg.seed == 0
    assert "seed" in cfg.defaults_used


def test_params_block_and_top_level_are_equivalent():
    a = validate_config({"experiment": "hhkl-vs-qsp", "ns": [64, 128]})
    b = validate_config({"experiment": "hhkl-vs-qsp", "params": {"ns": [64, 128]}})
    assert a.params == b.params


def test_all_violations_reported():
    with pytest.raises(ConfigError) as info:
        validate_config("experiment: hhkl-vs-qsp\nalpha: 2\neps: 3\nbogus: 1\n")
    msgs = info.value.violations
    assert any("alpha must exceed 2D" in m for m in msgs)
    assert any("eps" in m for m in msgs)
    assert any("bogus" in m for m in msgs)


def test_block_constraint_named():
    with pytest.raises(ConfigError) as info:
        validate_config({"experiment": "decomp-error", "n": 20, "ells": [4, 6, 8, 11]})
    assert any("ell <= n^(1/D)/2" in m for m in info.value.violations)


@pytest.mark.parametrize(
    "raw",
    [
        "experiment: nope\n",
        "experiment: light-cone-table\nseed: -1\n",
        "experiment: light-cone-table\nalphas: 3\n",
        "experiment: [unclosed\n",
        "- just a list\n",
    ],
)
def test_bad_configs_rejected(raw):
    with pytest.raises(ConfigError):
        validate_config(raw)


def test_format_cell_keeps_full_precision():
    x = 0.1 + 0.2
    assert float(format_cell(x)) == x
    assert format_cell(True) == "true"
    assert format_cell(7) == "7"


def test_light_cone_table_run(tmp_path):
    cfg = _write(tmp_path, "alphas: [2.5, 3, 4, 6, 10]\ndims: [1]\n")
    out = tmp_path / "out"
    assert run(["light-cone-table", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "light_cone.csv")
    assert rows[0][:4] == ["D", "alpha", "ours", "prior"]
    assert len(rows) == 6
    assert all(r[6] == "true" for r in rows[1:])
    assert all(float(r[2]) > float(r[3]) for r in rows[1:])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 0 and "seed" in manifest["defaults_used"]
    assert manifest["params"]["alphas"] == [2.5, 3.0, 4.0, 6.0, 10.0]
    assert "wall_time_s" in manifest and "code_version" in manifest


def test_deterministic_csv_bodies(tmp_path):
    cfg = _write(tmp_path, "n: 60\nells: [4, 6, 8, 10]\nseed: 9\n")
    for k in (1, 2):
        assert run(["decomp-error", "--config", cfg, "--out", str(tmp_path / f"o{k}")]) == EXIT_OK
    for name in ("errors.csv", "fit.csv"):
        assert (tmp_path / "o1" / name).read_bytes() == (tmp_path / "o2" / name).read_bytes()
    rows = _rows(tmp_path / "o1" / "errors.csv")
    assert rows[0] == ["ell", "error", "n", "t", "alpha", "seed"]
    assert rows[1][5] == "9"
    fit = _rows(tmp_path / "o1" / "fit.csv")
    assert [r[0] for r in fit[1:]] == ["fixed", "free"]
    manifest = json.loads((tmp_path / "o1" / "manifest.json").read_text())
    assert len(manifest["fields"]) == 60


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path, "n: 40\nells: [4, 6, 8, 10]\nseed: 1\n")
    assert run(["decomp-error", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "5"]) == EXIT_OK
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 5


def test_config_error_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "alpha: 2\nns: [2]\n")
    assert run(["hhkl-vs-qsp", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "alpha must exceed 2D" in err
    assert "at least 4" in err


def test_unreadable_config(tmp_path):
    assert run(["light-cone-table", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_threads_env_fallback(tmp_path, monkeypatch):
    cfg = _write(tmp_path, "ns: [64, 128, 256]\n")
    monkeypatch.setenv("LRSIM_THREADS", "3")
    assert run(["hhkl-vs-qsp", "--config", cfg, "--out", str(tmp_path / "h")]) == EXIT_OK
    assert json.loads((tmp_path / "h" / "manifest.json").read_text())["threads"] == 3
    monkeypatch.setenv("LRSIM_THREADS", "zero")
    assert run(["hhkl-vs-qsp", "--config", cfg, "--out", str(tmp_path / "h2")]) == EXIT_CONFIG


def test_threaded_run_matches_serial(tmp_path):
    cfg = _write(tmp_path, "ns: [64, 128, 256, 512]\n")
    run(["hhkl-vs-qsp", "--config", cfg, "--out", str(tmp_path / "s"), "--threads", "1"])
    run(["hhkl-vs-qsp", "--config", cfg, "--out", str(tmp_path / "p"), "--threads", "4"])
    assert (tmp_path / "s" / "gates.csv").read_bytes() == (tmp_path / "p" / "gates.csv").read_bytes()


def test_infeasible_exit_code(tmp_path):
    cfg = _write(tmp_path, "ns: [4]\neps: 1.0e-12\nmax_steps: 4\n")
    out = tmp_path / "pf"
    assert run(["pf4-empirical", "--config", cfg, "--out", str(out)]) == EXIT_INFEASIBLE
    assert "infeasible" in json.loads((out / "manifest.json").read_text())


def test_sum_checks_and_lr_experiments_run():
    res = run_experiment(validate_config({"experiment": "sum-checks", "dims": [1], "radii": [10, 20], "separations": [5, 10]}))
    assert {"sums", "tail_fit"} <= set(res.tables)
    res = run_experiment(validate_config({"experiment": "lr-commutator", "n": 6, "distances": [2, 5], "times": [0.5]}))
    rows = res.tables["commutators"].rows
    assert all(0 <= r[2] <= 2 + 1e-12 for r in rows)


def test_shell_experiment_small():
    cfg = validate_config({"experiment": "shell-error", "n": 8, "ells": [1, 2], "M": 2, "T": 0.5})
    rows = run_experiment(cfg).tables["shell"].rows
    assert rows[0][1] >= rows[1][1]
    assert all(r[2] < 1e-12 for r in rows)


def test_console_script(tmp_path):
    exe = shutil.which("lrsim")
    if exe is None:
        pytest.skip("package not installed with its console script")
    cfg = _write(tmp_path, "alphas: [4]\n")
    proc = subprocess.run([exe, "light-cone-table", "--config", cfg, "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    bad = subprocess.run([exe, "hhkl-vs-qsp", "--config", _write(tmp_path, "alpha: 2\n", "b.yaml")], capture_output=True, text=True)
    assert bad.returncode == 2
