from pathlib import Path

import pytest

from ctxlang import (
    CtxCompileError,
    CtxFileNotFoundError,
    CtxlangConfig,
    CtxlangInput,
    CtxlangRunnable,
    CtxTypeError,
    CtxValueError,
    RunResult,
)


# Get the path to the test directory
TEST_DIR = Path(__file__).parent / "test_scripts"
CORPUS_DIR = Path(__file__).parent.parent / "corpus"


@pytest.fixture
def ctxlang_runnable():
    """Create a CtxlangRunnable over the corpus with one virtual file."""
    config = CtxlangConfig(search_paths=[CORPUS_DIR], vfs={"data.txt": ["first", "second"]})
    return CtxlangRunnable(ctxlang_config=config)


def test_invoke_path(ctxlang_runnable):
    """Test invoke with a program file."""
    result = ctxlang_runnable.invoke(TEST_DIR / "hello.ctx")
    assert isinstance(result, RunResult)
    assert result.exit_code == 0
    assert result.stdout == "hello, world\n"
    assert result.stderr == ""


def test_invoke_source(ctxlang_runnable):
    """Test invoke with program text."""
    result = ctxlang_runnable.invoke('main { int x = 6 * 7; println("x=" + x); }')
    assert result.stdout == "x=42\n"
    assert result.locals == {"x": 42}


def test_invoke_dict(ctxlang_runnable):
    """Test invoke with a dict carrying extra virtual files."""
    result = ctxlang_runnable.invoke({"path": TEST_DIR / "open_lines.ctx", "vfs": {"data.txt": ["only"]}})
    assert result.exit_code == 0
    assert result.stdout == "only\n1\n"


def test_invoke_uses_config_vfs(ctxlang_runnable):
    result = ctxlang_runnable.invoke({"path": TEST_DIR / "open_lines.ctx"})
    assert result.stdout == "first\nsecond\n2\n"


def test_invoke_fault_is_a_result(ctxlang_runnable):
    """Test that a runtime fault is reported in the result, not raised."""
    result = ctxlang_runnable.invoke("main { int x = 1 / 0; }")
    assert result.exit_code == 1
    assert result.stderr.startswith("fault: division by zero")


def test_invoke_compile_error(ctxlang_runnable):
    with pytest.raises(CtxTypeError):
        ctxlang_runnable.invoke('main { int x = "s"; }')


def test_missing_program_file(ctxlang_runnable):
    with pytest.raises(CtxFileNotFoundError):
        ctxlang_runnable.invoke(TEST_DIR / "nowhere.ctx")


def test_missing_search_path():
    """Test that configuration errors surface at construction."""
    with pytest.raises(CtxFileNotFoundError):
        CtxlangRunnable(ctxlang_config={"search_paths": [TEST_DIR / "no_such_dir"]})


def test_config_from_dict():
    runnable = CtxlangRunnable(ctxlang_config={"search_paths": [str(CORPUS_DIR)]})
    assert runnable.ctxlang_config.search_paths == [CORPUS_DIR]
    assert "ctxlang" in runnable.tags
    assert "ctxlang_config" in runnable.metadata


@pytest.mark.parametrize(
    "input_data, message",
    [
        ("   ", "ctxlang source cannot be empty"),
        ({"source": "main { }", "args": []}, "Unsupported input keys"),
        ({"source": "main { }", "path": TEST_DIR / "hello.ctx"}, "exactly one of 'source' and 'path'"),
        ({"vfs": {}}, "exactly one of 'source' and 'path'"),
        (42, "Input must be source text"),
    ],
)
def test_invalid_input(ctxlang_runnable, input_data, message):
    """Test input validation."""
    with pytest.raises(CtxValueError, match=message):
        ctxlang_runnable.invoke(input_data)


def test_batch_processing(ctxlang_runnable):
    """Test batch processing with various input types."""
    batch_inputs: list[CtxlangInput] = [
        TEST_DIR / "hello.ctx",
        'main { println("two"); }',
        {"path": TEST_DIR / "colors.ctx"},
    ]
    results = ctxlang_runnable.batch(batch_inputs)
    assert len(results) == 3
    assert results[0].stdout == "hello, world\n"
    assert results[1].stdout == "two\n"
    assert all(r.exit_code == 0 for r in results)


def test_batch_return_exceptions(ctxlang_runnable):
    """Test that failing programs are returned in place when asked."""
    batch_inputs: list[CtxlangInput] = ['main { int x = "s"; }', TEST_DIR / "hello.ctx"]
    results = ctxlang_runnable.batch(batch_inputs, return_exceptions=True)
    assert isinstance(results[0], CtxCompileError)
    assert results[1].stdout == "hello, world\n"

    with pytest.raises(CtxCompileError):
        ctxlang_runnable.batch(batch_inputs)


def test_batch_needs_a_list(ctxlang_runnable):
    with pytest.raises(CtxValueError, match="batch inputs must be a list"):
        ctxlang_runnable.batch(TEST_DIR / "hello.ctx")
