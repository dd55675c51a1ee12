from pathlib import Path

import pytest

from ctxlang.__version__ import __version__
from ctxlang.cli import (
    EXIT_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    cmd,
)


TEST_DIR = Path(__file__).parent / "test_scripts"
CORPUS_DIR = Path(__file__).parent.parent / "corpus"


def script(name):
    return str(TEST_DIR / name)


def test_check(capsys):
    """Test checking files"""
    code = cmd(["check", "--path", str(CORPUS_DIR), script("hello.ctx"), script("counting.ctx")])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert f"{script('hello.ctx')}: ok" in out
    assert f"{script('counting.ctx')}: ok" in out


def test_check_reports_diagnostics(capsys):
    code = cmd(["check", "--path", str(CORPUS_DIR), script("hello.ctx"), script("fold_unbound.ctx")])
    captured = capsys.readouterr()
    assert code == EXIT_FAILURE
    assert f"{script('hello.ctx')}: ok" in captured.out
    assert f"{script('fold_unbound.ctx')}:" in captured.err
    assert ": error: " in captured.err


def test_check_with_stats(capsys):
    """Test that --stats prints one CSV row of parser counters"""
    code = cmd(["check", "--stats", "--path", str(CORPUS_DIR), script("squares.ctx")])
    row = capsys.readouterr().err.strip().splitlines()[-1]
    assert code == EXIT_OK
    fields = row.split(",")
    assert len(fields) == 5
    assert all(f.isdigit() for f in fields)


def test_run(capsys):
    """Test running a program with a virtual filesystem directory"""
    code = cmd(["run", "--path", str(CORPUS_DIR), "--vfs", str(TEST_DIR), script("open_lines.ctx")])
    assert code == EXIT_OK
    assert capsys.readouterr().out == "first\nsecond\n2\n"


def test_run_fault(capsys):
    code = cmd(["run", "--path", str(CORPUS_DIR), "--vfs", str(TEST_DIR), script("try_with_fault.ctx")])
    captured = capsys.readouterr()
    assert code == EXIT_FAILURE
    assert captured.out == "first\n"
    assert "fault: division by zero" in captured.err


def test_dump_core(capsys):
    code = cmd(["dump-core", "--path", str(CORPUS_DIR), script("hello.ctx")])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "; main" in out
    assert '(lit "hello, world")' in out


def test_bench(capsys):
    """Test a tiny benchmark run"""
    code = cmd(["bench", "--family", "UNIQUE_PREFIX", "--min-p", "1", "--max-p", "2", "--trials", "1", "--no-time"])
    lines = capsys.readouterr().out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "family,P,depth,L,memo_entries"
    assert [line.split(",")[1] for line in lines[1:]] == ["1", "2"]


def test_bench_to_file(tmp_path):
    out = tmp_path / "bench.csv"
    code = cmd(["bench", "--family", "SHARED_PREFIX", "--max-p", "1", "--trials", "1", "--out", str(out)])
    assert code == EXIT_OK
    assert out.read_text().splitlines()[0] == "family,P,depth,L,memo_entries,time_ns"


def test_priority_cycle(capsys):
    code = cmd(["check", script("priority_cycle.ctx")])
    assert code == EXIT_FAILURE
    assert "error: invalid operator priorities:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv, expected",
    [
        ([], EXIT_USAGE),
        (["frobnicate"], EXIT_USAGE),
        (["run"], EXIT_USAGE),
        (["--help"], EXIT_OK),
        (["check", "nowhere.ctx"], EXIT_FAILURE),
        (["check", "--path", "no/such/dir", script("hello.ctx")], EXIT_FAILURE),
    ],
)
def test_exit_codes(argv, expected):
    """Test exit codes of usage errors and missing files"""
    assert cmd(argv) == expected


def test_version(capsys):
    assert cmd(["--version"]) == EXIT_OK
    assert __version__ in capsys.readouterr().out
