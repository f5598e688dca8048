"""CLI harness tests: config validation, exit codes, output format, and
reproducibility across worker counts."""
import hashlib
import json
import math

import pytest

from stableheat import cli

KERNEL_CFG = """
model.alpha = 2
model.nu = 1.0
kernel.times = 1.0
kernel.xmax = 3.0
kernel.points = 5
"""

SIM_CFG = """
model.alpha = 2
model.nu = 1.0
model.beta = 0.5
grid.length = 8.0
grid.points = 64
sigma.family = linear
sigma.scale = 1.0
init.value = 1.0
run.horizon = 0.05
run.dt = 0.001
run.paths = 6
run.seed = 5
run.snapshots = 0.025, 0.05
"""

COMPARE_CFG = """
model.alpha = 2
model.nu = 1.0
model.beta = 0.5
grid.length = 8.0
grid.points = 64
sigma.family = linear
sigma.scale = 1.0
sigma_v.family = linear
sigma_v.scale = 1.0
init.value = 1.0
init_v.value = 1.0
run.horizon = 0.05
run.dt = 0.001
run.paths = 10
run.seed = 9
"""

NOISE_CFG = """
model.beta = 0.5
grid.length = 8.0
grid.points = 128
noise.samples = 400
noise.dt = 0.01
noise.lags = 0, 1, 4
run.seed = 3
"""


def _cfg(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _stdout_json(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


# -------------------------------------------------------------- validation

def test_missing_required_key_names_it(tmp_path, capsys):
    path = _cfg(tmp_path, "model.nu = 1.0\nkernel.times = 1.0\n"
                          "kernel.xmax = 3.0\n")
    code = cli.run("kernel-test", path, str(tmp_path / "out"))
    assert code == 2
    msg = _stdout_json(capsys)
    assert any("model.alpha" in e for e in msg["config_errors"])
    assert not (tmp_path / "out").exists()


def test_unknown_key_rejected(tmp_path, capsys):
    path = _cfg(tmp_path, KERNEL_CFG + "mystery.knob = 3\n")
    assert cli.run("kernel-test", path, str(tmp_path / "out")) == 2
    msg = _stdout_json(capsys)
    assert any("mystery.knob" in e for e in msg["config_errors"])


def test_unparsable_value_rejected_with_key(tmp_path, capsys):
    path = _cfg(tmp_path, KERNEL_CFG.replace("xmax = 3.0", "xmax = wide"))
    assert cli.run("kernel-test", path, str(tmp_path / "out")) == 2
    msg = _stdout_json(capsys)
    assert any("kernel.xmax" in e for e in msg["config_errors"])


def test_duplicate_key_rejected(tmp_path, capsys):
    path = _cfg(tmp_path, KERNEL_CFG + "model.nu = 2.0\n")
    assert cli.run("kernel-test", path, str(tmp_path / "out")) == 2
    msg = _stdout_json(capsys)
    assert any("duplicate" in e for e in msg["config_errors"])


def test_missing_config_file(tmp_path, capsys):
    assert cli.run("kernel-test", str(tmp_path / "nope.cfg"),
                   str(tmp_path / "out")) == 2
    assert "config_errors" in _stdout_json(capsys)


def test_unknown_subcommand_rejected_by_parser():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate", "--config", "x", "--out", "y"])
    assert exc.value.code == 2


def test_paths_override_not_applicable(tmp_path, capsys):
    path = _cfg(tmp_path, KERNEL_CFG)
    assert cli.run("kernel-test", path, str(tmp_path / "out"), paths=7) == 2
    msg = _stdout_json(capsys)
    assert any("--paths" in e for e in msg["config_errors"])


def test_domain_error_from_config_values(tmp_path, capsys):
    bad = SIM_CFG.replace("model.beta = 0.5", "model.beta = 1.5")
    path = _cfg(tmp_path, bad)
    assert cli.run("simulate", path, str(tmp_path / "out")) == 2
    assert "config_errors" in _stdout_json(capsys)


# ------------------------------------------------------------ happy paths

def test_kernel_test_reference_run(tmp_path, capsys):
    path = _cfg(tmp_path, KERNEL_CFG)
    out = tmp_path / "out"
    assert cli.run("kernel-test", path, str(out)) == 0
    msg = _stdout_json(capsys)
    assert msg["passed"] is True
    lines = (out / "kernel.csv").read_text().splitlines()
    assert lines[0] == "t,x,spectral,closed_form,rel_err"
    for line in lines[1:]:
        assert float(line.split(",")[-1]) < 1e-6


def test_compare_identical_sides_passes(tmp_path, capsys):
    path = _cfg(tmp_path, COMPARE_CFG)
    out = tmp_path / "out"
    assert cli.run("compare", path, str(out)) == 0
    lines = (out / "compare.csv").read_text().splitlines()
    # identical coefficients and data: excess is exactly zero on every path
    for line in lines[1:]:
        assert float(line.split(",")[1]) == 0.0


def test_noise_test_audit_failure_exit_code(tmp_path, capsys):
    path = _cfg(tmp_path, NOISE_CFG + "noise.max_z = 0.001\n")
    out = tmp_path / "out"
    assert cli.run("noise-test", path, str(out)) == 1
    msg = _stdout_json(capsys)
    assert msg["passed"] is False
    assert msg["failures"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["audit"]["passed"] is False
    assert manifest["audit"]["failures"] == msg["failures"]


def test_trichotomy_with_infinite_rate(tmp_path, capsys):
    cfg = ("model.beta = 0.5\ngrid.length = 16.0\ngrid.points = 64\n"
           "tri.rate = inf\n")
    path = _cfg(tmp_path, cfg)
    out = tmp_path / "out"
    assert cli.run("trichotomy", path, str(out)) == 0
    lines = (out / "profile.csv").read_text().splitlines()
    vals = {float(l.split(",")[1]) for l in lines[1:]}
    assert vals == {0.0, 1.0}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["tri.rate"] == "inf"


# ------------------------------------------------------- outputs, manifest

def test_manifest_checksums_and_echo(tmp_path):
    path = _cfg(tmp_path, SIM_CFG)
    out = tmp_path / "out"
    assert cli.run("simulate", path, str(out)) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    for name, digest in manifest["outputs"].items():
        data = (out / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == digest
    assert manifest["config"]["run.paths"] == 6
    assert manifest["config"]["model.alpha"] == 2.0
    assert manifest["subcommand"] == "simulate"
    assert "philox" in manifest["seed_rule"].lower() \
        or "master_seed" in manifest["seed_rule"]
    assert manifest["wall_clock_seconds"] >= 0.0


def test_csv_format_unix_newlines_and_precision(tmp_path):
    path = _cfg(tmp_path, SIM_CFG)
    out = tmp_path / "out"
    cli.run("simulate", path, str(out))
    raw = (out / "fields.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    value = lines[1].split(",")[-1]
    # 17 significant digits survive a round trip
    assert float(value) == float(format(float(value), ".17g"))
    assert len(value.replace(".", "").replace("-", "").lstrip("0")) >= 15


def test_seed_override_changes_output_and_is_recorded(tmp_path):
    path = _cfg(tmp_path, SIM_CFG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cli.run("simulate", path, str(out_a))
    cli.run("simulate", path, str(out_b), seed=99)
    assert (out_a / "fields.csv").read_bytes() \
        != (out_b / "fields.csv").read_bytes()
    manifest = json.loads((out_b / "manifest.json").read_text())
    assert manifest["cli_overrides"] == {"seed": 99}
    assert manifest["config"]["run.seed"] == 99


def test_paths_override_changes_row_count(tmp_path):
    path = _cfg(tmp_path, SIM_CFG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cli.run("simulate", path, str(out_a))
    cli.run("simulate", path, str(out_b), paths=3)
    rows_a = len((out_a / "fields.csv").read_text().splitlines())
    rows_b = len((out_b / "fields.csv").read_text().splitlines())
    assert rows_b - 1 == (rows_a - 1) // 2


# -------------------------------------------------------- reproducibility

def test_bit_identical_across_worker_counts(tmp_path):
    path = _cfg(tmp_path, SIM_CFG)
    digests = []
    for threads in (1, 2, 8):
        out = tmp_path / f"w{threads}"
        assert cli.run("simulate", path, str(out), threads=threads) == 0
        digests.append(hashlib.sha256(
            (out / "fields.csv").read_bytes()).hexdigest())
    assert digests[0] == digests[1] == digests[2]


def test_bit_identical_rerun_same_seed(tmp_path):
    path = _cfg(tmp_path, COMPARE_CFG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.run("compare", path, str(out_a)) == 0
    assert cli.run("compare", path, str(out_b)) == 0
    assert (out_a / "compare.csv").read_bytes() \
        == (out_b / "compare.csv").read_bytes()
    assert (out_a / "moment_checks.csv").read_bytes() \
        == (out_b / "moment_checks.csv").read_bytes()


def test_main_entry_point_round_trip(tmp_path):
    path = _cfg(tmp_path, KERNEL_CFG)
    out = tmp_path / "out"
    code = cli.main(["kernel-test", "--config", path, "--out", str(out),
                     "--threads", "2"])
    assert code == 0
    assert (out / "manifest.json").exists()
    assert (out / "kernel.csv").exists()


def test_config_parser_unit():
    raw = cli.parse_config_text(
        "# comment\n\na.b = 1.5  # trailing\nc.d = x, y\n")
    assert raw == {"a.b": "1.5", "c.d": "x, y"}
    with pytest.raises(cli.ConfigError, match="key = value"):
        cli.parse_config_text("just some words\n")


def test_tails_runs_and_reports(tmp_path, capsys):
    cfg = SIM_CFG.replace("run.paths = 6", "run.paths = 120") + \
        "tails.levels = 1.5, 2, 3, 5\n"
    path = _cfg(tmp_path, cfg)
    out = tmp_path / "out"
    code = cli.run("tails", path, str(out))
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["audit"]["details"]["fitted_A"] > 0.0
    lines = (out / "tails.csv").read_text().splitlines()
    assert lines[0] == "level,empirical,ci_low,ci_high,bound,resolved"
    assert len(lines) == 5


def test_moments_audit_failure_on_unfittable_order(tmp_path, capsys):
    cfg = SIM_CFG.replace("run.paths = 6", "run.paths = 120") + \
        "moments.orders = 2, 3, 4, 5, 6\n"
    path = _cfg(tmp_path, cfg)
    # two snapshots only: the fit needs four usable time points
    code = cli.run("moments", path, str(out_dir := tmp_path / "out"))
    assert code == 1
    msg = _stdout_json(capsys)
    assert any("estimation failed" in f for f in msg["failures"])
    assert (out_dir / "manifest.json").exists()
