import json

import pytest

from corona_tst import cli
from corona_tst.acceptance import CheckResult


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_domain_and_cubes(tmp_path, capsys):
    spec = tmp_path / "sf.json"
    assert run(["gen-domain", "--kind", "snowflake", "--params", "iter=1", "--out", str(spec)], capsys)[0] == 0
    data = json.loads(spec.read_text())
    assert data["kind"] == "snowflake" and data["config"]["seed"] == 12345
    lat = tmp_path / "lat.json"
    assert run(["cubes", "--domain", str(spec), "--k-max", "3", "--out", str(lat)], capsys)[0] == 0
    assert lat.exists()


def test_beta_writes_csv(tmp_path, capsys):
    code, _, _ = run(["beta", "--domain", "disk", "--resolution", "0.01", "--k-max", "2",
                      "--out", str(tmp_path / "dev")], capsys)
    assert code == 0
    rows = (tmp_path / "dev.csv").read_text().splitlines()
    assert rows[0] == "cube_id,level,side,beta,bbeta,contribution"
    summary = json.loads((tmp_path / "dev.json").read_text())
    assert summary["config"]["k_max"] == 2 and summary["total"] >= summary["top_term"]


def test_wos_json_and_seed_override(capsys, monkeypatch):
    argv = ["wos", "--domain", "disk", "--pole", "0,0", "--target", "1,0,0.5", "--walkers", "500"]
    code, out, _ = run(argv, capsys)
    first = json.loads(out)
    assert code == 0 and first["estimate"]["base_seed"] == 12345
    monkeypatch.setenv("CORONA_TST_SEED", "99")
    second = json.loads(run(argv, capsys)[1])
    assert second["config"]["seed"] == 99 and second["estimate"]["base_seed"] == 99


def test_artifacts_reproduce(capsys):
    argv = ["wos", "--domain", "cantor", "j=1", "--pole", "inf", "--target", "0.375,0.375,0.2",
            "--walkers", "300", "--threads", "1"]
    a = run(argv, capsys)[1]
    b = json.loads(run(argv[:-1] + ["3"], capsys)[1])
    assert json.loads(a)["estimate"] == b["estimate"]


def test_validation_exit_code(capsys):
    code, _, err = run(["wos", "--domain", "disk", "--pole", "5,0", "--target", "1,0,0.5"], capsys)
    assert code == 1 and "not inside" in err
    assert run(["cubes", "--domain", "snowflake"], capsys)[0] == 1
    assert run(["cubes", "--domain", "missing.json"], capsys)[0] == 1
    assert run(["gen-domain", "--kind", "polygon", "--params", "vertices=[[0,0],[1,1],[1,0],[0,1]]"], capsys)[0] == 1


def test_numerical_exit_code(capsys):
    code, _, err = run(["gen-domain", "--kind", "batakis", "--params", "N=1", "tau=0.01", "max_n=1",
                        "--walkers", "200"], capsys)
    assert code == 3 and "straddles" in err


def test_verify_exit_codes(capsys, monkeypatch):
    assert run(["verify", "--suite", "trivial"], capsys)[0] == 0
    failing = [CheckResult("1", "demo", False, "forced", {}, 0.0)]
    monkeypatch.setattr(cli, "run_suite", lambda *a, **k: failing)
    code, out, _ = run(["verify", "--only", "1"], capsys)
    assert code == 2 and "FAIL" in out


def test_green_dev_and_loginteg(tmp_path, capsys):
    code, out, _ = run(["green-dev", "--domain", "disk", "--resolution", "0.01", "--k-max", "2",
                        "--whitney-resolution", "0.125", "--walkers", "200", "--cells", str(tmp_path / "cells")], capsys)
    rep = json.loads(out)["report"]
    assert code == 0 and rep["lhs"] > 0 and (tmp_path / "cells.csv").exists()
    code, out, _ = run(["loginteg", "--domain", "cantor", "--j", "1", "--walkers", "500", "--k-max", "2",
                        "--depth", "2"], capsys)
    assert code == 0 and json.loads(out)["rows"][0]["value"] >= 1.0 - 1e-12


def test_corona(capsys):
    code, out, _ = run(["corona", "--domain", "disk", "--resolution", "0.01", "--k-max", "3", "--walkers", "300"], capsys)
    data = json.loads(out)
    assert code == 0 and data["verification"]["mode"] == "per-tree-pole" and data["corona"]["packing"] > 0
