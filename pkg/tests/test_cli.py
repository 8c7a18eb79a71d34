import json
import os
import subprocess
import sys

import numpy as np
import pytest

from wzlab.cli import ConfigError, config_hash, main, parse_config, run


def test_parse_config_minimal_with_defaults():
    cfg = parse_config("experiment = linear-exact\na = -1.0\neps = 0.1\nT = 20.0\n")
    assert cfg.experiment == "linear-exact"
    assert cfg.get("m") == 64
    assert cfg.get("seed") == 0
    assert cfg.eps_values() == [0.1]


def test_parse_config_collects_all_violations():
    text = "experiment = coupled-error\nmodel = glub\neps = 0.3\nT = 1.0\nfrobnicate = 1\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    msgs = "\n".join(exc.value.violations)
    assert "glub" in msgs
    assert "not integral" in msgs
    assert "frobnicate" in msgs
    assert len(exc.value.violations) == 3


def test_parse_config_requires_experiment_keys():
    with pytest.raises(ConfigError, match="requires key"):
        parse_config("experiment = rates\nT = 5.0\n")
    with pytest.raises(ConfigError, match="unknown experiment"):
        parse_config("experiment = warp-drive\n")
    with pytest.raises(ConfigError, match="does not match"):
        parse_config("experiment = rates\neps_list = [0.1]\nT = 1.0\n",
                     experiment="coupled-error")


def test_config_hash_stable_and_ignores_out():
    a = parse_config("experiment = linear-exact\na = -1.0\neps = 0.1\nT = 2.0\nout = /x\n")
    b = parse_config("experiment = linear-exact\na = -1.0\neps = 0.1\nT = 2.0\nout = /y\n")
    c = parse_config("experiment = linear-exact\na = -2.0\neps = 0.1\nT = 2.0\n")
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


def _run_cli(tmp_path, name, text, *args):
    cfg = tmp_path / f"{name}.txt"
    cfg.write_text(text)
    out = tmp_path / f"out_{name}"
    code = main([name, "--config", str(cfg), "--out", str(out), *args])
    return code, out


def test_linear_exact_runner(tmp_path):
    code, out = _run_cli(tmp_path, "linear-exact",
                         "experiment = linear-exact\na = 2.0\neps = 0.01\nT = 5.0\n")
    assert code == 0
    body = (out / "linear_exact.csv").read_text().splitlines()
    assert body[3].startswith("eps,n,t_n,exact_var,lower_bound,upper_bound,pass")
    manifest = json.loads((out / "linear-exact-manifest.json").read_text())
    assert manifest["passed"] is True
    assert manifest["outputs"] == ["linear_exact.csv"]
    assert manifest["gates"]["bound_inequalities"] is True


def test_spectral_cert_runner(tmp_path):
    code, out = _run_cli(tmp_path, "spectral-cert",
                         "experiment = spectral-cert\nmodel = linear1d\na = -1.0\n")
    assert code == 0
    rows = (out / "spectral_cert.csv").read_text().splitlines()
    fields = rows[-1].split(",")
    assert fields[0] == "H_b"
    assert float(fields[1]) == pytest.approx(-1.0)
    assert float(fields[2]) == pytest.approx(1.0)


def test_spectral_cert_failure_exit_code(tmp_path):
    code, _ = _run_cli(tmp_path, "spectral-cert",
                       "experiment = spectral-cert\nmodel = linear1d\na = 0.5\n")
    assert code == 1


def test_drivers_check_runner(tmp_path):
    text = ("experiment = drivers-check\ndriver = polygonal\neps = 0.1\nT = 1.0\n"
            "m = 8\npaths = 4000\npositions = [0.25, 0.5]\n")
    code, out = _run_cli(tmp_path, "drivers-check", text)
    assert code == 0
    assert (out / "drivers_check.csv").exists()


def test_coupled_error_runner_and_thread_determinism(tmp_path):
    text = ("experiment = coupled-error\nmodel = linear1d\na = -1.0\neps = 0.1\n"
            "T = 1.0\nm = 8\npaths = 600\nchunk_paths = 128\n")
    code1, out1 = _run_cli(tmp_path, "coupled-error", text, "--threads", "1")
    cfg = tmp_path / "ce2.txt"
    cfg.write_text(text)
    out2 = tmp_path / "out_ce2"
    code2 = main(["coupled-error", "--config", str(cfg), "--out", str(out2),
                  "--threads", "2"])
    assert code1 == 0 and code2 == 0
    b1 = (out1 / "coupled_error.csv").read_bytes()
    b2 = (out2 / "coupled_error.csv").read_bytes()
    assert b1 == b2


def test_config_error_exit_code(tmp_path):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("experiment = coupled-error\nmodel = glub\neps = 0.1\nT = 1.0\n")
    code = main(["coupled-error", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2


def test_seed_override_changes_hash(tmp_path):
    text = ("experiment = coupled-error\nmodel = linear1d\na = -1.0\neps = 0.1\n"
            "T = 1.0\nm = 8\npaths = 200\n")
    _, out1 = _run_cli(tmp_path, "coupled-error", text)
    cfg = tmp_path / "seeded.txt"
    cfg.write_text(text)
    out2 = tmp_path / "out_seeded"
    main(["coupled-error", "--config", str(cfg), "--out", str(out2), "--seed", "7"])
    m1 = json.loads((out1 / "coupled-error-manifest.json").read_text())
    m2 = json.loads((out2 / "coupled-error-manifest.json").read_text())
    assert m1["config_hash"] != m2["config_hash"]
    assert m2["config"]["seed"] == 7


def test_console_entry_point(tmp_path):
    cfg = tmp_path / "cli.txt"
    cfg.write_text("experiment = linear-exact\na = -1.0\neps = 0.1\nT = 1.0\n")
    proc = subprocess.run(
        [sys.executable, "-m", "wzlab.cli", "linear-exact", "--config", str(cfg),
         "--out", str(tmp_path / "cli_out")],
        capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout


def test_moments_uniform_runner(tmp_path):
    text = ("experiment = moments-uniform\nmodel = stable_nonlinear1d\neps = 0.1\n"
            "T_list = [8.0, 16.0]\nx0 = 0.0\npaths = 400\nsubsteps = 8\n")
    code, out = _run_cli(tmp_path, "moments-uniform", text)
    assert code == 0
    rows = (out / "moments_uniform.csv").read_text().splitlines()
    assert rows[3].startswith("T,sup_node,t_sup")
