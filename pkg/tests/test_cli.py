import io
import json
import subprocess
import sys

import pytest

from guardflow.cli import main

from conftest import CORPUS

FIG1 = str(CORPUS / "fig1.ir")


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


class TestCommands:
    def test_build_dot_and_stats(self):
        code, out, err = run("build", FIG1)
        assert code == 0
        assert out.startswith("digraph vfg {")
        assert err.startswith("functions=1 nodes=12 edges=10 pruned_unsat=0 constraints=")
        assert "load_edges_merged=4 load_edges_per_object=8" in err

    def test_build_json(self):
        code, out, _ = run("build", "--format", "json", FIG1)
        assert code == 0
        assert set(json.loads(out)) == {"nodes", "edges"}

    def test_slice(self):
        code, out, err = run("slice", "--seed", "e@12", "--stats", FIG1)
        assert (code, out) == (0, "SLICE main:e@12 -> 3,5,9,10,12\n")
        assert "paths=2" in err

    def test_check(self):
        assert run("check", FIG1)[:2] == (0, "")
        code, out, _ = run("check", "--path-insensitive", FIG1)
        assert code == 0
        assert out == f"DF {FIG1}:13 {FIG1}:14 cond=true trace=3,10,12\n"

    def test_check_many_files(self):
        twice = str(CORPUS / "twice.ir")
        code, out, _ = run("check", FIG1, twice)
        assert code == 0 and out.count("DF ") == 1

    def test_oracle(self):
        code, out, _ = run("oracle", FIG1)
        assert code == 0 and json.loads(out)["atoms"] == 2

    def test_diff_corpus(self):
        files = [str(p) for p in sorted(CORPUS.glob("*.ir"))]
        code, out, _ = run("diff", *files)
        assert code == 0
        assert out.count("OK ") == len(files)

    def test_warnings_go_to_stderr(self):
        code, _, err = run("build", str(CORPUS / "rec.ir"))
        assert code == 0 and "warning:" in err


class TestExitCodes:
    def test_usage_errors(self):
        assert run()[0] == 2
        assert run("frobnicate", FIG1)[0] == 2
        assert run("build", "--unroll", "0", FIG1)[0] == 2
        assert run("slice", FIG1)[0] == 2

    def test_missing_file(self):
        code, _, err = run("build", "/nonexistent.ir")
        assert code == 1 and err.startswith("guardflow: error:")

    def test_bad_program(self, tmp_path):
        bad = tmp_path / "bad.ir"
        bad.write_text("func f( {")
        assert run("check", str(bad))[0] == 1

    def test_bad_seed(self):
        assert run("slice", "--seed", "zz@99", FIG1)[0] == 1

    def test_oracle_refusal(self, tmp_path):
        body = "".join(f"  br (c{i}) b{i} b{i}x\nb{i}:\n  jmp j{i}\nb{i}x:\n  jmp j{i}\nj{i}:\n" for i in range(21))
        big = tmp_path / "big.ir"
        big.write_text("func f() {\nentry:\n" + body + "  ret\n}\n")
        code, _, err = run("oracle", str(big))
        assert code == 1 and "exceed" in err

    def test_help(self):
        assert run("--help")[0] == 0


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.ir")), ids=lambda p: p.stem)
@pytest.mark.parametrize("fmt", ["dot", "json"])
def test_jobs_do_not_change_output(path, fmt):
    one = run("build", "--format", fmt, "--jobs", "1", str(path))
    four = run("build", "--format", fmt, "--jobs", "4", str(path))
    assert one == four


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "guardflow", "check", "--path-insensitive", FIG1],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("DF ")
