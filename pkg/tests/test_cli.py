from __future__ import annotations

import json
from pathlib import Path

import pytest

from polymat import cli

DATA = Path(__file__).resolve().parents[1] / "data"
EXAMPLE = str(DATA / "example22.json")


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_bound_example(capsys):
    code, out, _ = run(capsys, "bound", "--spec", EXAMPLE, "--dist", "rademacher", "--t", 2)
    doc = json.loads(out)
    assert code == 0
    assert doc["report"]["theorem"] == "homogeneous_multilinear" and len(doc["report"]["terms"]) == 6
    assert doc["config"]["dist"]["kind"] == "rademacher" and doc["config"]["spec"] == EXAMPLE


def test_bound_theorem_choice_and_csv(capsys):
    code, out, _ = run(capsys, "bound", "--spec", EXAMPLE, "--theorem", "quadratic", "--format", "csv")
    lines = out.strip().split("\n")
    assert code == 0 and lines[0].startswith("theorem,label") and len(lines) == 7
    code, out, _ = run(capsys, "bound", "--spec", EXAMPLE, "--dist", "gaussian")
    assert code == 0 and json.loads(out)["report"]["theorem"] == "gaussian"


def test_mc_example(capsys):
    code, out, _ = run(capsys, "mc", "--spec", EXAMPLE, "--t", 1, "--samples", 100_000, "--seed", 7)
    est = json.loads(out)["estimate"]
    assert code == 0 and abs(est["mean"] - 4.0) <= 4 * est["stderr"] + 1e-12
    code, out, _ = run(capsys, "mc", "--spec", EXAMPLE, "--dist", "pbiased:0.3", "--t", 1, "--samples", 50_000)
    est = json.loads(out)["estimate"]
    assert abs(est["mean"] - 4.0) <= 4 * est["stderr"]


def test_output_is_deterministic_across_threads(capsys, tmp_path):
    outs = []
    for threads in ("1", "4"):
        path = tmp_path / f"mc{threads}.json"
        code, _, _ = run(capsys, "mc", "--spec", EXAMPLE, "--t", 2, "--samples", 3000, "--seed", 3, "--threads", threads, "--out", path)
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_shape_check(capsys):
    code, out, _ = run(capsys, "shape", "--shape", DATA / "edge.json", "--n", 10, "--p", 0.5, "--t", 2, "--check", "--samples", 1000)
    doc = json.loads(out)
    assert code == 0 and doc["dominance"]["holds"]
    assert doc["config"]["shape"] == {"k": 2, "edges": [[1, 2]], "U": [1], "V": [2]}


def test_shape_tail(capsys):
    code, out, _ = run(capsys, "shape", "--shape", DATA / "edge.json", "--n", 100, "--eps", 0.01)
    assert code == 0 and json.loads(out)["tail"]["t"] == 4


def test_decouple_and_rosenthal(capsys):
    code, out, _ = run(capsys, "decouple", "--spec", EXAMPLE, "--samples", 5000, "--check")
    assert code == 0 and json.loads(out)["comparison"]["constant"] == 4.0
    code, out, _ = run(capsys, "decouple", "--shape", DATA / "path.json", "--n", 6, "--dist", "pbiased", "--p", 0.5, "--samples", 2000)
    assert code == 0 and json.loads(out)["comparison"]["constant"] == 27.0
    code, out, _ = run(capsys, "rosenthal", "--spec", DATA / "linear3.json", "--check", "--samples", 2000)
    doc = json.loads(out)
    assert code == 0 and doc["holds"] and [tm["label"] for tm in doc["report"]["terms"]] == ["row_variance", "column_variance", "diagonal"]


def test_melon_command(capsys):
    code, out, _ = run(capsys, "melon", "--n", 4, "--check", "--samples", 500)
    doc = json.loads(out)
    assert code == 0 and doc["dominance"]["holds"] and doc["config"]["mode"] == "closed_form"


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "bound", "--spec", tmp_path / "missing.json")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 2, "dims": [1, 1], "terms": [{"vars": [1, 1], "matrix": [[1]]}]}))
    code, _, err = run(capsys, "bound", "--spec", bad)
    assert code == 2 and "term 0" in err
    assert run(capsys, "bound", "--spec", EXAMPLE, "--t", 1)[0] == 2
    assert run(capsys, "bound", "--spec", EXAMPLE, "--dist", "pbiased:1.5")[0] == 2
    assert run(capsys, "rosenthal", "--spec", EXAMPLE)[0] == 2
    assert run(capsys, "melon", "--n", 20, "--mode", "exact")[0] == 3
    big = tmp_path / "big.json"
    big.write_text(json.dumps({"k": 6, "edges": [], "U": [1], "V": [2]}))
    assert run(capsys, "shape", "--shape", big, "--n", 40, "--check")[0] == 3
    with pytest.raises(SystemExit):
        cli.main(["bound", "--format", "xml"])


def test_suite_subset(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _, err = run(capsys, "suite", "--only", "2,8", "--out", path)
    doc = json.loads(path.read_text())
    assert code == 0 and [c["id"] for c in doc["criteria"]] == [2, 8]
    assert "PASS" in err
    assert run(capsys, "suite", "--only", "99")[0] == 2
