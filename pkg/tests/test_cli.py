import json
import math
import os

import numpy as np
import pytest
from click.testing import CliRunner

from grushin.cli import Workspace, main
from grushin.errors import ConfigError
from grushin.fields import load_field


@pytest.fixture()
def runner():
    return CliRunner()


def read_manifest(root):
    with open(os.path.join(root, "manifest.json")) as fh:
        return json.load(fh)


def test_admissibility_table_contains_window_row(runner, tmp_path):
    out = str(tmp_path / "adm")
    res = runner.invoke(main, ["--out", out, "admissibility-table"])
    assert res.exit_code == 0, res.output
    text = open(os.path.join(out, "admissibility.csv")).read()
    assert text.startswith("# config sha256 ")
    assert "r,q,p,gamma,gamma_sob,gap" in text
    assert "6,2,6,1,4/3,1/3" in text
    man = read_manifest(out)
    assert man["experiments"][0]["config_sha256"]
    assert man["version"]
    assert man["artifacts"] == ["admissibility.csv"]


def test_config_file_overrides_flags(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"sigma": "3/2"}')
    out = str(tmp_path / "ov")
    res = runner.invoke(main, ["--config", str(cfg), "--out", out,
                               "admissibility-table", "--sigma", "1"])
    assert res.exit_code == 0, res.output
    man = read_manifest(out)
    assert man["experiments"][0]["config"]["sigma"] == "3/2"
    text = open(os.path.join(out, "admissibility.csv")).read()
    assert "6,2,6,1,4/3,1/3" not in text


def test_env_var_redirects_output(runner, tmp_path, monkeypatch):
    envdir = str(tmp_path / "envdir")
    flagdir = str(tmp_path / "flagdir")
    monkeypatch.setenv("GRUSHIN_OUT", envdir)
    res = runner.invoke(main, ["--out", flagdir, "admissibility-table"])
    assert res.exit_code == 0, res.output
    assert os.path.exists(os.path.join(envdir, "admissibility.csv"))
    assert not os.path.exists(os.path.join(flagdir, "admissibility.csv"))


def test_config_error_exits_2(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "admissibility-table",
                               "--d2", "1", "--sigma", "1"])
    assert res.exit_code == 2
    assert "config error" in res.output


def test_unknown_config_key_exits_2(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"bogus": 1}')
    res = runner.invoke(main, ["--config", str(cfg), "--out", str(tmp_path),
                               "admissibility-table"])
    assert res.exit_code == 2
    assert "bogus" in res.output


def test_malformed_config_reports_line(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{\n  "sigma": }')
    res = runner.invoke(main, ["--config", str(cfg), "--out", str(tmp_path),
                               "admissibility-table"])
    assert res.exit_code == 2
    assert "line 2" in res.output


def test_numerical_failure_exits_3(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "dispersion-scan",
                               "--t-max", "2000"])
    assert res.exit_code == 3
    assert "numerical failure" in res.output


def test_empty_experiment_list_writes_manifest_only(runner, tmp_path):
    cfg = tmp_path / "batch.json"
    cfg.write_text('{"experiments": []}')
    out = str(tmp_path / "empty")
    res = runner.invoke(main, ["--config", str(cfg), "--out", out, "run"])
    assert res.exit_code == 0, res.output
    assert os.listdir(out) == ["manifest.json"]
    assert read_manifest(out)["experiments"] == []


def test_run_requires_config(runner, tmp_path):
    res = runner.invoke(main, ["--out", str(tmp_path), "run"])
    assert res.exit_code == 2


def test_experiment_list_rejected_on_subcommand(runner, tmp_path):
    cfg = tmp_path / "batch.json"
    cfg.write_text('{"experiments": [{"kind": "admissibility-table"}]}')
    res = runner.invoke(main, ["--config", str(cfg), "--out", str(tmp_path),
                               "admissibility-table"])
    assert res.exit_code == 2
    assert "grushin run" in res.output


def test_batch_run_layout(runner, tmp_path):
    out = str(tmp_path / "batch")
    cfg = tmp_path / "batch.json"
    cfg.write_text(json.dumps({
        "seed": 4,
        "experiments": [
            {"kind": "admissibility-table", "sigma": "3/2"},
            {"kind": "counterexample", "N": 4},
        ],
    }))
    res = runner.invoke(main, ["--config", str(cfg), "--out", out, "run"])
    assert res.exit_code == 0, res.output
    man = read_manifest(out)
    assert [e["kind"] for e in man["experiments"]] \
        == ["admissibility-table", "counterexample"]
    for rel in man["artifacts"]:
        assert os.path.exists(os.path.join(out, rel))
    rep = json.load(open(os.path.join(
        out, "exp-001-counterexample", "counterexample.json")))
    assert rep["verdict"] == "non-dispersive confirmed"
    assert rep["translation_defect"] <= 1e-3


def test_reruns_are_byte_identical(runner, tmp_path):
    args = ["decompose", "--d2", "1", "--K-max", "8", "--m-max", "4"]
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        res = runner.invoke(main, ["--seed", "9", "--out", out] + args)
        assert res.exit_code == 0, res.output
        outs.append(open(os.path.join(out, "decompose.csv"), "rb").read())
    assert outs[0] == outs[1]


def test_basis_check_reports_clean_geometry(runner, tmp_path):
    out = str(tmp_path / "basis")
    res = runner.invoke(main, ["--out", out, "basis-check", "--d2", "1",
                               "--K-max", "4", "--m-max", "6"])
    assert res.exit_code == 0, res.output
    man = read_manifest(out)
    r = man["experiments"][0]["results"]
    assert r["verdict"] == "ok"
    assert r["max_gram_defect"] < 1e-9
    assert r["roundtrip_residual"] < 1e-12
    lines = open(os.path.join(out, "basis.csv")).read().splitlines()
    assert lines[1] == "shell,s,eta,gram_defect"


def test_scaling_check_confirms_invariance(runner, tmp_path):
    out = str(tmp_path / "scal")
    res = runner.invoke(main, ["--out", out, "scaling-check"])
    assert res.exit_code == 0, res.output
    rep = json.load(open(os.path.join(out, "scaling.json")))
    assert rep["verdict"] == "scaling holds"
    assert rep["rel_gap"] < 1e-9


def test_strichartz_scan_emits_csv_and_summary(runner, tmp_path):
    out = str(tmp_path / "str")
    res = runner.invoke(main, ["--out", out, "strichartz-scan",
                               "--a-max", "2", "--samples", "2",
                               "--k-max", "8", "--n-y", "24"])
    assert res.exit_code == 0, res.output
    lines = open(os.path.join(out, "strichartz.csv")).read().splitlines()
    assert lines[1] == "A,m,sample,quotient,constant,ratio"
    assert len(lines) == 2 + 3 * 2
    summary = json.load(open(os.path.join(out, "strichartz_summary.json")))
    assert summary["config_sha256"]
    assert summary["seed"] == 0
    assert summary["verdict"] in ("bounded", "insensitive control",
                                  "not bounded")


def test_nls_run_emits_ledger_and_checkpoints(runner, tmp_path):
    out = str(tmp_path / "nls")
    res = runner.invoke(main, [
        "--seed", "3", "--out", out, "nls-run", "--d2", "1",
        "--L", repr(4 * math.pi), "--K-max", "4", "--m-max", "6",
        "--sigma", "1.5", "--kappa", "3", "--s", "1.1", "--t", "0.01",
        "--amplitude", "0.4", "--checkpoints", "3"])
    assert res.exit_code == 0, res.output
    lines = open(os.path.join(out, "ledger.csv")).read().splitlines()
    assert lines[1] == "t,mass,energy,h_sigma,h_s"
    man = read_manifest(out)
    r = man["experiments"][0]["results"]
    assert r["coverage"] == "covered"
    assert r["mass_drift"] < 1e-8
    states = [a for a in man["artifacts"] if a.startswith("state_")]
    assert len(states) == 3
    u = load_field(os.path.join(out, states[0]))
    assert u.geometry.d2 == 1
    mass0 = float(lines[2].split(",")[1])
    assert u.l2_norm() ** 2 == pytest.approx(mass0, rel=1e-12)


def test_nls_run_flags_uncovered_regime(runner, tmp_path):
    out = str(tmp_path / "nlsflag")
    res = runner.invoke(main, [
        "--seed", "3", "--out", out, "nls-run", "--d2", "1",
        "--L", repr(4 * math.pi), "--K-max", "4", "--m-max", "6",
        "--sigma", "1.0", "--kappa", "3", "--s", "1.1", "--t", "0.005",
        "--amplitude", "0.2"])
    assert res.exit_code == 0, res.output
    man = read_manifest(out)
    assert man["experiments"][0]["results"]["coverage"] \
        == "outside proven range: (kappa, sigma) = (3, 1)"


def test_workspace_rejects_escaping_paths(tmp_path):
    ws = Workspace(str(tmp_path / "root"))
    with pytest.raises(ConfigError, match="escapes"):
        ws.path("../outside.csv")
    inner = ws.path("sub/inner.csv")
    assert inner.startswith(ws.root)


def test_thread_cap_validation(runner, tmp_path):
    res = runner.invoke(main, ["--threads", "0", "--out", str(tmp_path),
                               "admissibility-table"])
    assert res.exit_code == 2
    res = runner.invoke(main, ["--threads", "1", "--out", str(tmp_path),
                               "admissibility-table"])
    assert res.exit_code == 0, res.output
