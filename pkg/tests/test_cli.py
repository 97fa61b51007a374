import json
import subprocess
import sys

import pytest

from bdtree import MCConfig, validate
from bdtree.cli import emit_ratio_table, run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_spectrum(capsys, data_dir):
    code, out, _ = call(capsys, "spectrum", "--spec", str(data_dir / "binary3.json"))
    assert code == 0
    assert out == "v,mu_v,mult\n0,7.0,1\n1,3.0,1\n2,1.0,2\n"


def test_qp(capsys, data_dir):
    code, out, _ = call(capsys, "qp", "--spec", str(data_dir / "binary3.json"), "--format", "json")
    assert code == 0
    (rec,) = json.loads(out)
    assert rec["value"] == pytest.approx(4 / 7, abs=1e-12)
    assert rec["I"] == [0, 1, 2, 3] and rec["J"] == []


def test_validation_errors(capsys, tmp_path, data_dir):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call(capsys, "spectrum", "--spec", str(bad))[0] == 2
    bad.write_text('{"tau": [2, 1], "N": [2, 2], "T": 3}')
    code, _, err = call(capsys, "spectrum", "--spec", str(bad))
    assert code == 2 and "error" in err
    assert call(capsys, "spectrum", "--spec", str(tmp_path / "missing.json"))[0] == 2
    spec = str(data_dir / "two_branch.json")
    assert call(capsys, "mc", "--spec", spec, "--u", "2", "--n", "10")[0] == 2  # no seed
    assert call(capsys, "mc", "--spec", spec, "--u", "3,2", "--n", "10", "--seed", "1")[0] == 2
    assert call(capsys, "mc", "--spec", spec, "--u", "2", "--n", "0", "--seed", "1")[0] == 2
    assert call(capsys, "asym", "--spec", spec, "--u", "2", "--formula", "all_branch")[0] == 2
    assert call(capsys, "asym", "--spec", str(data_dir / "one_branch.json"), "--u", "2", "--formula", "diameter")[0] == 2
    assert call(capsys, "nosuch")[0] == 2


def test_numerical_failure_exit(capsys, monkeypatch):
    from bdtree import pickands
    from bdtree.errors import NoConvergence

    def stuck(*args, **kwargs):
        raise NoConvergence("did not settle")

    monkeypatch.setattr(pickands, "estimate_H", stuck)
    code, _, err = call(capsys, "pickands", "--N", "2", "--n", "50", "--seed", "1")
    assert code == 3 and "numerical" in err


def test_pickands_table(capsys):
    code, out, _ = call(capsys, "pickands", "--N", "1", "--L", "8", "--n", "2000", "--seed", "1", "--format", "json")
    assert code == 0
    (rec,) = json.loads(out)
    assert set(rec) == {"N", "lambda", "L", "value", "stderr"}
    assert abs(rec["value"] - 2) < 5 * rec["stderr"] + 0.05


def test_asym_table(capsys, data_dir):
    code, out, _ = call(capsys, "asym", "--spec", str(data_dir / "binary3.json"), "--u", "4,6", "--formula", "diameter")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "formula,u,value,log_value"
    assert len(lines) == 3 and lines[1].startswith("diameter,4.0,")


def test_forest_table(capsys, data_dir):
    code, out, _ = call(capsys, "forest", "--spec", str(data_dir / "forest_ab.json"))
    assert code == 0
    assert out.splitlines()[1:] == ["0,3.0,0.0,1,True", "1,1.75,0.0,4,False"]
    code, out, _ = call(capsys, "forest", "--spec", str(data_dir / "forest_ab.json"), "--u", "3", "--H", "2", "--format", "json")
    (rec,) = json.loads(out)
    assert rec["maximal"] == [0]


def test_mc_deterministic_and_roundtrip(tmp_path, data_dir):
    args = ["mc", "--spec", str(data_dir / "two_branch.json"), "--u", "1.5,2", "--n", "5000", "--seed", "7", "--tilted"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(args + ["--format", "json", "--out", str(a)]) == 0
    assert run(args + ["--format", "json", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    recs = json.loads(a.read_text())
    assert [r["u"] for r in recs] == [1.5, 2.0]
    assert json.loads(json.dumps(recs)) == recs
    c = tmp_path / "c.csv"
    assert run(args + ["--out", str(c)]) == 0
    rows = c.read_text().splitlines()
    assert rows[0] == "u,p,stderr,n,estimator,seed"
    assert float(rows[1].split(",")[1]) == recs[0]["p"]
    assert b"\r" not in c.read_bytes()


def test_ratio_table(capsys, data_dir):
    args = ["ratio", "--spec", str(data_dir / "one_branch.json"), "--u", "2,3", "--n", "20000", "--seed", "3"]
    code, out, _ = call(capsys, *args)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "u,mc_estimate,mc_stderr,asym_value,ratio,ratio_stderr"
    assert sum(l.startswith("u,") for l in lines) == 1 and len(lines) == 3
    assert call(capsys, *args)[1] == out


def test_ratio_one_branch_trend():
    spec = validate({"tau": [], "N": [], "c": 0.5, "T": 1})
    t = emit_ratio_table(spec, [2.0, 4.0, 8.0], MCConfig(n=20_000, seed=4))
    ratios = [r[4] for r in t.rows]
    assert ratios[0] < ratios[1] < ratios[2] < 1.05
    assert abs(ratios[2] - 1) < 0.1


def test_module_entry(data_dir):
    r = subprocess.run(
        [sys.executable, "-m", "bdtree", "spectrum", "--spec", str(data_dir / "binary3.json")],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0 and r.stdout.startswith("v,mu_v,mult")
