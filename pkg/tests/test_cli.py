from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from popproto.cli import main
from popproto.constructions import flock_binary
from popproto.interchange import dumps, load


def call(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


class TestBuild:
    def test_flock_binary_thirteen(self, capsys, tmp_path):
        path = tmp_path / "p.json"
        code, out, _ = call(capsys, "build", "flock-binary", "--n", "13", "-o", str(path))
        assert code == 0
        assert len(load(path).states) == 7
        assert "states: 7" in out and "lowered_states_bound" in out

    def test_majority(self, capsys, tmp_path):
        path = tmp_path / "m.json"
        code, out, _ = call(capsys, "build", "majority", "--n", "4", "-o", str(path))
        p = load(path)
        assert code == 0 and len(p.states) == 4 and p.num_leaders == 4
        assert "leaders: 4" in out

    def test_linear_within_bounds(self, capsys):
        code, out, err = call(capsys, "build", "linear", "--a", "1,-1", "--c", "0")
        assert code == 0
        p = json.loads(out)
        cert = p["meta"]["certificate"]
        assert cert["lowered_states"] <= cert["lowered_states_bound"]
        assert cert["leaders"] <= cert["leaders_bound"]
        assert "lowered_states_bound" in err

    def test_system(self, capsys):
        code, out, _ = call(capsys, "build", "system", "--A", "1,0;0,1", "--c", "0,0")
        assert code == 0 and json.loads(out)["meta"]["construction"] == "system"

    def test_semigroup(self, capsys):
        code, out, _ = call(capsys, "build", "semigroup")
        assert code == 0 and "x" in json.loads(out)["initial"]

    def test_stdout_matches_library(self, capsys):
        _, out, _ = call(capsys, "build", "flock-binary", "--n", "5")
        assert out == dumps(flock_binary(5))

    @pytest.mark.parametrize("argv", [["build", "flock-binary"], ["build", "flock-binary", "--n", "0"],
                                      ["build", "nope", "--n", "3"], ["build", "linear"],
                                      ["build", "linear", "--a", "1,x"],
                                      ["build", "system", "--A", "1,0;", "--c", "0"]])
    def test_bad_params(self, capsys, argv):
        assert call(capsys, *argv)[0] == 3


class TestCompile:
    def test_lowering(self, capsys, tmp_path):
        src = tmp_path / "p.json"
        call(capsys, "build", "flock-binary", "--n", "7", "-o", str(src))
        dst = tmp_path / "q.json"
        code, out, _ = call(capsys, "compile", str(src), "-o", str(dst))
        assert code == 0
        assert "states before: 6" in out and "states after: 9" in out
        assert load(dst).max_arity == 2

    def test_bad_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert call(capsys, "compile", str(bad))[0] == 3


class TestCheck:
    def test_pass(self, capsys):
        code, out, err = call(capsys, "check", "flock-binary(3)", "--predicate", "x>=3",
                              "--inputs", "x=1..6")
        assert code == 0 and "verdict: pass" in err
        rows = list(csv.reader(io.StringIO(out)))
        assert [r[2] for r in rows[1:]] == ["0", "0", "1", "1", "1", "1"]

    def test_wrong_predicate(self, capsys):
        code, _, err = call(capsys, "check", "flock-binary(3)", "--predicate", "x>=4",
                            "--inputs", "x=1..6")
        assert code == 1
        assert "counterexample: {'x': 3}" in err

    def test_empty_range(self, capsys):
        assert call(capsys, "check", "flock-binary(3)", "--inputs", "x=5..1")[0] == 3

    def test_inconclusive(self, capsys):
        code, _, _ = call(capsys, "check", "flock-standard(6)", "--predicate", "x>=6",
                          "--inputs", "x=12", "--node-limit", "20")
        assert code == 2

    def test_default_predicate_and_reports(self, capsys, tmp_path):
        p = tmp_path / "lin.json"
        call(capsys, "build", "linear", "--a", "1,-1", "--c", "0", "-o", str(p))
        rep, tab = tmp_path / "r.json", tmp_path / "r.csv"
        code, out, _ = call(capsys, "check", str(p), "--inputs", "x1=0..3,x2=0..3",
                            "--report", str(rep), "--csv", str(tab))
        assert code == 0 and out == ""
        doc = json.loads(rep.read_text())
        # leaders are present, so the all-zero input is included
        assert doc["verdict"] == "pass" and len(doc["entries"]) == 16
        assert tab.read_text().startswith("input,")

    def test_unknown_variable(self, capsys):
        assert call(capsys, "check", "flock-binary(3)", "--predicate", "y>=1",
                    "--inputs", "y=1..3")[0] == 3

    def test_missing_file(self, capsys, tmp_path):
        assert call(capsys, "check", str(tmp_path / "none.json"), "--inputs", "x=1")[0] == 3


class TestRunStats:
    def test_run_rows(self, capsys):
        code, out, _ = call(capsys, "run", "flock-binary(8)", "--input", "x=20", "--input", "x=3",
                            "--trials", "2", "--seed", "4")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert [r[0] for r in rows[1:]] == ["x=20", "x=20", "x=3", "x=3"]
        assert [r[3] for r in rows[1:]] == ["stabilized-1"] * 2 + ["stabilized-0"] * 2

    def test_run_reproducible(self, capsys):
        argv = ["run", "majority(3)", "--input", "x=5", "--trials", "5", "--seed", "11"]
        assert call(capsys, *argv)[1] == call(capsys, *argv)[1]

    def test_run_rejects_range(self, capsys):
        assert call(capsys, "run", "flock-binary(3)", "--input", "x=1..3")[0] == 3

    def test_run_rejects_bad_window(self, capsys):
        assert call(capsys, "run", "flock-binary(3)", "--input", "x=3", "--window", "0")[0] == 3

    def test_stats(self, capsys):
        code, out, _ = call(capsys, "stats", "flock-binary(3)", "--inputs", "x=1..4",
                            "--trials", "5")
        rows = list(csv.reader(io.StringIO(out)))
        assert code == 0 and [r[0] for r in rows[1:]] == ["x=1", "x=2", "x=3", "x=4"]
        assert rows[4][3] == "1.000000"


class TestInfo:
    def test_flock_binary(self, capsys):
        code, out, _ = call(capsys, "info", "flock-binary(3)")
        assert code == 0 and out.splitlines()[0] == "5 states, 2-way only"

    def test_majority(self, capsys):
        assert call(capsys, "info", "majority(2)")[1].startswith("4 states, 2 leaders")

    def test_compiled(self, capsys, tmp_path):
        src, dst = tmp_path / "p.json", tmp_path / "q.json"
        call(capsys, "build", "flock-binary", "--n", "7", "-o", str(src))
        call(capsys, "compile", str(src), "-o", str(dst))
        out = call(capsys, "info", str(dst))[1]
        assert "gadget states: 3" in out

    def test_bad_shorthand(self, capsys):
        assert call(capsys, "info", "linear(3)")[0] == 3


class TestRoundTrip:
    def test_build_file_load(self, capsys, tmp_path):
        path = tmp_path / "s.json"
        call(capsys, "build", "system", "--A=1,-1;0,1", "--c=0,0", "-o", str(path))
        text = path.read_text()
        assert dumps(load(path)) == text


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "popproto.cli", "info", "flock-binary(3)"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and res.stdout.startswith("5 states")
