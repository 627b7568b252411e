import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

import shapkit as sk
from shapkit.cli import main

from conftest import double_cmd


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_explain_default(capsys):
    code, out, _ = run(capsys, "explain", "--rows", "120", "--n", "10", "--t", "2")
    assert code == 0
    d = json.loads(out)
    assert d["method"] == "er-shap"
    assert d["model_calls"] == 10 * 4
    assert [f["name"] for f in d["features"]] == ["x1", "x2", "x3", "x4", "x5"]


@pytest.mark.parametrize("explainer, method", [
    ("exact", "exact"), ("kernel", "kernel"), ("perm", "permutation"),
    ("erw-shap", "erw-shap"), ("er-shap-rf", "er-shap-rf"),
])
def test_explain_each_method(capsys, explainer, method):
    code, out, _ = run(capsys, "explain", "--rows", "120", "--explainer", explainer,
                       "--n", "5", "--neighbors", "50", "--samples", "40",
                       "--permutations", "20", "--no-members")
    assert code == 0
    assert json.loads(out)["method"] == method


def test_explain_csv_format(capsys):
    code, out, _ = run(capsys, "explain", "--rows", "100", "--n", "3", "--format", "csv",
                       "--instance", "row:2")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["index", "name", "phi", "selection_count", "unobserved"]
    assert len(rows) == 6


def test_error_is_json_exit_2(capsys):
    code, _, err = run(capsys, "explain", "--rows", "50", "--t", "9")
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "ConfigError"


def test_bad_csv_reports_location(capsys, tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,y\n1,2,0\n1,x,1\n")
    code, _, err = run(capsys, "explain", "--data", str(path), "--label", "y")
    assert code == 2
    assert "row 2, column b" in err


def test_compare_csv(capsys):
    code, out, _ = run(capsys, "compare", "--rows", "100", "--panel", "3", "--n", "10", "--t", "3")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["C", "E", "concordant", "discordant", "tied", "call_ratio", "time_ratio"]
    assert len(rows) == 4
    assert all(0 <= float(r[0]) <= 1 for r in rows[1:])
    assert float(rows[1][5]) == 10 * 8 / 32


def test_sweep_writes_companions(capsys, tmp_path):
    out = tmp_path / "grid.csv"
    code, _, _ = run(capsys, "sweep", "--rows", "100", "--panel", "2", "--n-list", "2,4",
                     "--t-list", "2,3", "--out", str(out))
    assert code == 0
    for name in ("grid.csv", "grid.E.csv", "grid.time_ratio.csv"):
        rows = list(csv.reader((tmp_path / name).open()))
        assert rows[0] == ["N", "t=2", "t=3"]
        assert [r[0] for r in rows[1:]] == ["2", "4"]


def test_bench(capsys):
    code, out, _ = run(capsys, "bench", "--rows", "80", "--repeats", "2",
                       "--explainers", "exact,er-shap", "--n", "4", "--format", "json")
    rows = json.loads(out)
    assert [r["explainer"] for r in rows] == ["exact", "er-shap"]
    assert rows[0]["model_calls"] == 32


def test_spec_file_defaults_and_override(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n": 7, "t": 2, "rows": 60}))
    _, out, _ = run(capsys, "explain", "--spec", str(spec))
    assert json.loads(out)["model_calls"] == 7 * 4
    _, out, _ = run(capsys, "explain", "--spec", str(spec), "--n", "3")
    assert json.loads(out)["model_calls"] == 3 * 4


def test_forest_model_and_csv_data(capsys, tmp_path):
    d = sk.generate_synthetic("stripe", 80, seed=0)
    d = sk.Dataset(d.X, d.names, d.y, "label")
    path = tmp_path / "d.csv"
    sk.save_csv(d, path)
    code, out, _ = run(capsys, "explain", "--data", f"csv:{path}", "--label", "label",
                       "--model", "forest", "--trees", "3", "--explainer", "exact")
    assert code == 0
    assert json.loads(out)["model_calls"] == 32


def test_external_model_cmd(capsys, tmp_path):
    # two-feature CSV to match the echo double
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n3,4\n")
    cmd = " ".join(double_cmd("echo_first.py"))
    code, out, _ = run(capsys, "explain", "--data", str(path), "--model-cmd", cmd,
                       "--explainer", "exact", "--instance", "5,0")
    assert code == 0
    phi = [f["phi"] for f in json.loads(out)["features"]]
    assert phi == [3.0, 0.0]  # f = first feature, background mean 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "shapkit", "explain", "--rows", "60", "--n", "2"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["model_calls"] == 2 * 8
