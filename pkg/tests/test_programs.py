from pathlib import Path

import pytest

from ctxlang import (
    Compiler,
    CtxlangConfig,
    CtxTypeError,
    PriorityCycleError,
    VirtualFS,
)
from ctxlang.checker import priority_order
from ctxlang.syntax import QName


TEST_DIR = Path(__file__).parent / "test_scripts"
CORPUS_DIR = Path(__file__).parent.parent / "corpus"

DATA = {"data.txt": ["first", "second"]}

CYCLIC_DSL = """
dsl Cyc {
    priorities q1, q2 { q1 < q2, q2 < q1 }
    static int [q1] "one" () { return 1; }
}
"""


@pytest.fixture
def compiler():
    return Compiler(CtxlangConfig(search_paths=[CORPUS_DIR], vfs=DATA))


@pytest.fixture
def cyclic_dir(tmp_path):
    """A search directory holding a dsl whose own priorities are cyclic."""
    (tmp_path / "Cyc.ctx").write_text(CYCLIC_DSL)
    return tmp_path


def run_script(compiler, name, vfs=None):
    compilation = compiler.compile(path=TEST_DIR / name)
    return compiler.run(compilation, vfs)


@pytest.mark.parametrize(
    "name, stdout",
    [
        ("hello.ctx", "hello, world\n"),
        ("counting.ctx", "{x=2, y=1}\n"),
        ("squares.ctx", "14\n"),
        ("lambda.ctx", "hi!\n"),
        ("match.ctx", "goodbye, world\n"),
        ("colors.ctx", "red\n"),
        ("dangling_else.ctx", "b\n"),
        ("nested_plain.ctx", "1\n11\n"),
        ("open_lines.ctx", "first\nsecond\n2\n"),
    ],
)
def test_program_output(compiler, name, stdout):
    """Test that each sample program prints what it should"""
    result = run_script(compiler, name)
    assert result.stderr == ""
    assert result.exit_code == 0
    assert result.stdout == stdout


def test_try_with_closes_resource(compiler):
    """Test that the resource of try-with is closed exactly once"""
    vfs = VirtualFS(DATA)
    result = run_script(compiler, "try_with.ctx", vfs)
    assert result.stdout == "first\n"
    assert vfs.opens["data.txt"] == 1
    assert vfs.closes["data.txt"] == 1
    assert vfs.open_handles == []


def test_try_with_closes_on_fault(compiler):
    """Test that a fault inside try-with still closes the resource"""
    vfs = VirtualFS(DATA)
    result = run_script(compiler, "try_with_fault.ctx", vfs)
    assert result.stdout == "first\n"
    assert result.exit_code == 1
    assert result.stderr.startswith("fault: division by zero")
    assert vfs.closes["data.txt"] == 1


def test_missing_file_faults(compiler):
    """Test opening a file that is not in the virtual filesystem"""
    result = run_script(compiler, "open_lines.ctx", VirtualFS())
    assert result.exit_code == 1
    assert "no such file: data.txt" in result.stderr


@pytest.mark.parametrize(
    "name",
    ["fold_unbound.ctx", "open_misuse.ctx", "nested_ranked.ctx", "return_in_operand.ctx"],
)
def test_rejected_programs(compiler, name):
    """Test programs that do not type-check"""
    with pytest.raises(CtxTypeError) as exc_info:
        compiler.compile(path=TEST_DIR / name)
    assert exc_info.value.diagnostics.has_errors
    assert all(d.file.endswith(name) for d in exc_info.value.diagnostics)


def test_return_inside_operand_block(compiler):
    """Test that a block operand cannot return from the enclosing function"""
    with pytest.raises(CtxTypeError, match="return is not allowed inside an operand block"):
        compiler.compile(path=TEST_DIR / "return_in_operand.ctx")


def test_return_inside_closure_body(compiler):
    source = "main { Function<int, int> inc = fun (int x) { return x + 1; }; int y = inc.apply(1); }"
    assert compiler.run(compiler.compile(source)).locals["y"] == 2


def test_priority_cycle(compiler):
    """Test that cyclic priorities are reported with the cycle"""
    with pytest.raises(PriorityCycleError) as exc_info:
        compiler.compile(path=TEST_DIR / "priority_cycle.ctx")
    assert str(exc_info.value).startswith("invalid operator priorities: ")


def test_plain_and_ranked_imports_differ_only_in_priorities(compiler):
    """Test that the unranked MapUtils accepts what the ranked one rejects"""
    plain = (TEST_DIR / "nested_plain.ctx").read_text()
    ranked = (TEST_DIR / "nested_ranked.ctx").read_text()
    assert plain.replace("MapUtilsPlain", "MapUtils") == ranked


def test_main_locals_are_reported(compiler):
    """Test that the locals of main are kept in the result"""
    result = compiler.run(compiler.compile("main { int x = 6 * 7; String s = \"a\" + x; }"))
    assert result.locals == {"x": 42, "s": "a42"}


def test_vfs_dir(tmp_path):
    """Test mapping a directory into the virtual filesystem"""
    (tmp_path / "data.txt").write_text("first\nsecond\n")
    compiler = Compiler(CtxlangConfig(search_paths=[CORPUS_DIR], vfs_dir=tmp_path))
    result = run_script(compiler, "open_lines.ctx")
    assert result.stdout == "first\nsecond\n2\n"


def test_strings_and_comments_do_not_link_classes(cyclic_dir):
    """Test that a class named only inside a string or a comment is not loaded"""
    compiler = Compiler(CtxlangConfig(search_paths=[cyclic_dir]))
    compilation = compiler.compile('main {\n    // Cyc\n    println("Cyc");\n}\n')
    assert "Cyc" not in compilation.linked.classes
    assert compiler.run(compilation).stdout == "Cyc\n"


def test_referenced_dsl_adds_no_priorities(cyclic_dir):
    """Test that only imported DSLs contribute to the priority order of a file"""
    compiler = Compiler(CtxlangConfig(search_paths=[cyclic_dir]))
    compilation = compiler.compile('void touch(Cyc c) { }\nmain { println("ok"); }\n')
    linked = compilation.linked
    assert "Cyc" in linked.classes
    assert QName(("Cyc", "q1")) not in priority_order(linked, linked.program.origin).rank
    assert compiler.run(compilation).stdout == "ok\n"


def test_imported_cyclic_dsl(cyclic_dir):
    compiler = Compiler(CtxlangConfig(search_paths=[cyclic_dir]))
    with pytest.raises(PriorityCycleError):
        compiler.compile("import dsl Cyc;\nmain { int x = one; }\n")
