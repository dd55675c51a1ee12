from pathlib import Path

import pytest

from ctxlang import (
    Compiler,
    CtxlangConfig,
    CtxTypeError,
)
from ctxlang.checker import check_program
from ctxlang.loader import (
    read_file,
    read_program,
    resolve_imports,
)
from ctxlang.syntax import (
    Block,
    ExprStmt,
    OperatorApp,
)


TEST_DIR = Path(__file__).parent / "test_scripts"
CORPUS_DIR = Path(__file__).parent.parent / "corpus"


@pytest.fixture
def compiler():
    return Compiler(CtxlangConfig(search_paths=[CORPUS_DIR]))


def test_bodies_are_checked_where_they_are_defined(compiler):
    """Test that a broken operator body is reported even if nothing uses it"""
    source = 'dsl Bad {\n    static int "bad" () { return "s"; }\n}\nmain { }\n'
    with pytest.raises(CtxTypeError) as exc_info:
        compiler.compile(source)
    diagnostics = list(exc_info.value.diagnostics)
    assert len(diagnostics) == 1
    assert source.index("dsl Bad") < diagnostics[0].offset < source.index("main")


def test_unknown_priority_annotation(compiler):
    """Test an operator naming a priority that no dsl declares"""
    source = 'dsl Odd {\n    static int [nope] "odd" () { return 1; }\n}\nmain { }\n'
    with pytest.raises(CtxTypeError) as exc_info:
        compiler.compile(source)
    assert "unknown operator priority Odd.nope" in str(exc_info.value)


@pytest.mark.parametrize(
    "body",
    [
        'int x = "s";',
        "int x = 1; x = true;",
        "boolean b = 1 + 2;",
        "List<int> xs = new List<String>();",
    ],
)
def test_main_type_errors(compiler, body):
    """Test mismatches between declared and inferred types"""
    with pytest.raises(CtxTypeError):
        compiler.compile(f"main {{ {body} }}")


def test_main_uses_typed_operator_applications():
    """Test that the statements of main are replaced by typed trees"""
    linked = resolve_imports(read_file(TEST_DIR / "hello.ctx"), [CORPUS_DIR])
    checked = check_program(linked)
    stmt = checked.main.stmts[0]
    assert isinstance(stmt, ExprStmt)
    assert isinstance(stmt.expr, OperatorApp)
    assert stmt.expr.decl.owner == "Hello"
    assert isinstance(checked.classes["Hello"].operators[0], Block)


def test_context_operands_need_their_frame(compiler):
    """Test that an instance operator is not in effect outside its context"""
    with pytest.raises(CtxTypeError):
        compiler.compile("import dsl FileRead;\nmain { String s = read line; }")


def test_generic_names_must_be_bound(compiler):
    """Test that fold-for names are only usable as they were bound"""
    source = (TEST_DIR / "squares.ctx").read_text().replace("a = a + i * i", "a = a + j * j")
    with pytest.raises(CtxTypeError):
        compiler.compile(source)


def test_stats_only_when_asked():
    """Test that parse statistics are kept only with collect_stats"""
    plain = Compiler(CtxlangConfig(search_paths=[CORPUS_DIR]))
    assert plain.compile(path=TEST_DIR / "counting.ctx").stats is None

    counting = Compiler(CtxlangConfig(search_paths=[CORPUS_DIR], collect_stats=True))
    stats = counting.compile(path=TEST_DIR / "counting.ctx").stats
    assert stats is not None
    assert stats.input_length > 0
    assert stats.memo_entries > 0
    assert stats.evaluations >= stats.memo_entries
    assert stats.languages_seen > 1


def test_program_without_main():
    """Test checking a file that only declares classes"""
    linked = resolve_imports(read_program('dsl Only { static int "one" () { return 1; } }'))
    assert check_program(linked).main is None
