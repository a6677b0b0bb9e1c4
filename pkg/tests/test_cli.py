"""Command-line interface: config handling, outputs, exit codes, determinism."""

import csv
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from revqe.cli import load_config, main
from revqe.errors import ConfigError

GOOD_CONFIG = """\
[lattice]
Lx = 2
Ly = 2
J2 = 0.5

[ansatz]
kind = "su2"
V = 2
d = 2

[train]
mode = "exact"
gradient_engine = "adjoint"
steps = 4
batch = 64
lr = 0.1
seed = 0
record_fidelity = true
fidelity_every = 2
"""

STUDY_CONFIG = """\
[study]
kind = "u1"
sweep = "N"
values = [4, 6]
N = 6
V = 2
d = 1
draws = 6
shots_per_basis = 0
reps = 2
seed = 0
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text(GOOD_CONFIG)
    return str(p)


def run_cli(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


def test_load_config_rejects_unknown_key(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(GOOD_CONFIG + "\ntypo_key = 1\n")
    with pytest.raises(ConfigError):
        load_config(str(p), ("lattice", "ansatz", "train"))


def test_load_config_rejects_unknown_section(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(GOOD_CONFIG + "\n[plotting]\nstyle = 'x'\n")
    with pytest.raises(ConfigError):
        load_config(str(p), ("lattice", "ansatz", "train"))


def test_load_config_ignores_sections_other_commands_use(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text(GOOD_CONFIG)
    cfg = load_config(str(p), ("lattice", "ansatz"))
    assert "train" not in cfg


def test_bad_config_exits_2(tmp_path, cfg_file):
    p = tmp_path / "bad.toml"
    p.write_text(GOOD_CONFIG.replace('kind = "su2"', 'kind = "banana"'))
    r = run_cli(["train", "--config", str(p), "--out", str(tmp_path / "o")])
    assert r.exit_code == 2
    # and nothing half-written
    assert not (tmp_path / "o").exists()


def test_train_writes_expected_artifacts(tmp_path, cfg_file):
    out = tmp_path / "run"
    r = run_cli(["train", "--config", cfg_file, "--out", str(out),
                 "--dump-circuit", "--dump-hamiltonian"])
    assert r.exit_code == 0, r.output
    for name in ("trace.jsonl", "summary.csv", "params.json", "metadata.json",
                 "circuit.json", "hamiltonian.json"):
        assert (out / name).exists(), name
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["format_version"] == 1
    assert "config_hash" in meta
    assert meta["device_time_estimate_s"] > 0
    trace = [json.loads(l) for l in (out / "trace.jsonl").read_text().splitlines()]
    assert len(trace) == 4
    params = json.loads((out / "params.json").read_text())
    assert len(params["params"]) == params["param_count"]


def test_train_is_byte_deterministic(tmp_path, cfg_file):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(["train", "--config", cfg_file, "--out", str(out1)]).exit_code == 0
    assert run_cli(["train", "--config", cfg_file, "--out", str(out2)]).exit_code == 0
    for name in ("summary.csv", "params.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    # traces identical except wall_time
    for l1, l2 in zip((out1 / "trace.jsonl").read_text().splitlines(),
                      (out2 / "trace.jsonl").read_text().splitlines()):
        d1, d2 = json.loads(l1), json.loads(l2)
        d1.pop("wall_time"), d2.pop("wall_time")
        assert d1 == d2


def test_seed_override_changes_result(tmp_path, cfg_file):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run_cli(["train", "--config", cfg_file, "--out", str(out1)])
    run_cli(["train", "--config", cfg_file, "--out", str(out2), "--seed", "9"])
    assert (out1 / "params.json").read_text() != (out2 / "params.json").read_text()


def test_train_resume_roundtrip(tmp_path, cfg_file):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(["train", "--config", cfg_file, "--out", str(out1)]).exit_code == 0
    r = run_cli(["train", "--config", cfg_file, "--out", str(out2),
                 "--params", str(out1 / "params.json")])
    assert r.exit_code == 0, r.output
    e1 = json.loads((out1 / "trace.jsonl").read_text().splitlines()[-1])["energy"]
    e2 = json.loads((out2 / "trace.jsonl").read_text().splitlines()[-1])["energy"]
    assert e2 <= e1 + 1e-6  # continued descent from the saved point


def test_correlations_csv(tmp_path, cfg_file):
    out = tmp_path / "run"
    run_cli(["train", "--config", cfg_file, "--out", str(out)])
    corr = tmp_path / "corr.csv"
    r = run_cli(["correlations", "--config", cfg_file,
                 "--params", str(out / "params.json"),
                 "--out", str(corr), "--axis", "z"])
    assert r.exit_code == 0, r.output
    rows = list(csv.reader(corr.open()))
    assert rows[0] == ["site", "0", "1", "2", "3"]
    mat = [[float(v) for v in row[1:]] for row in rows[1:]]
    assert len(mat) == 4
    for i in range(4):
        assert mat[i][i] == pytest.approx(1.0)
        for j in range(4):
            assert mat[i][j] == pytest.approx(mat[j][i])


def test_gradvar_csv(tmp_path):
    p = tmp_path / "study.toml"
    p.write_text(STUDY_CONFIG)
    out = tmp_path / "gv.csv"
    r = run_cli(["gradvar", "--config", str(p), "--out", str(out)])
    assert r.exit_code == 0, r.output
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2
    for row in rows:
        assert float(row["sigma_g"]) > 0


def test_gradvar_rejects_degenerate_draws(tmp_path):
    p = tmp_path / "study.toml"
    p.write_text(STUDY_CONFIG.replace("draws = 6", "draws = 1"))
    r = run_cli(["gradvar", "--config", str(p), "--out", str(tmp_path / "x.csv")])
    assert r.exit_code == 2


def test_cluster_demo_prints_table():
    r = run_cli(["cluster-demo", "-n", "4", "--theta", "0.3", "--gamma", "0.9",
                 "--shots", "2000", "--seed", "1"])
    assert r.exit_code == 0, r.output
    for token in ("exact", "sampled", "analytic", "kept"):
        assert token in r.output


def test_version_flag():
    r = run_cli(["--version"])
    assert r.exit_code == 0
