from pathlib import Path

import pytest

from ctxlang.exceptions import (
    CtxLinkError,
    CtxSyntaxError,
)
from ctxlang.loader import (
    read_file,
    read_program,
    render_declarations,
    resolve_imports,
)
from ctxlang.syntax import (
    Assign,
    ExprStmt,
    LocalDecl,
    NameOperand,
    NamePart,
    Operand,
    ParamKind,
    QName,
    Repetition,
    TurnstileType,
)


CORPUS_DIR = Path(__file__).parent.parent / "corpus"
TEST_DIR = Path(__file__).parent / "test_scripts"


MAP_UTILS_LIKE = """
dsl Lookup {
    priorities p1, p2 { p1 < p2 }
    static <K, V> void [p1] "if-exists" "(" _ "[" _ "]" ")" _ "else" _ [p1]
        (Map<K, V> map, K key, MapEntryRef<K, V> |- void thn, Lazy |- void els) {
        if (map.contains(key)) thn.apply(new MapEntryRef<K, V>(map, key));
        else els.apply(new Lazy());
    }
    static <K, V> V [p2] _ "[" _ "]" (Map<K, V> map, K key) { return map.get(key); }
    int size(Map<String, int> m) { return m.size(); }
    Lookup() { }
    private int hits;
}
"""


class TestReadProgram:
    def test_operator_syntax(self):
        program = read_program(MAP_UTILS_LIKE)
        cls = program.class_named("Lookup")
        assert cls is not None and cls.is_dsl
        if_exists = cls.operators[0]
        assert if_exists.is_static
        assert if_exists.priority == QName.parse("p1")
        assert if_exists.syntax[0] == NamePart("if-exists")
        assert if_exists.syntax[-1] == Operand(priority=QName.parse("p1"))
        assert len(if_exists.value_operands) == len(if_exists.params) == 4
        assert isinstance(if_exists.params[2].type, TurnstileType)
        assert cls.operators[1].starts_with_operand

    def test_members(self):
        cls = read_program(MAP_UTILS_LIKE).class_named("Lookup")
        assert [m.name for m in cls.methods] == ["size"]
        assert len(cls.constructors) == 1
        assert cls.fields[0].name == "hits" and cls.fields[0].is_private
        assert cls.priorities.names == ("p1", "p2")

    def test_generic_names_and_literals(self):
        program = read_file(CORPUS_DIR / "FoldFor.ctx")
        fold_for = program.class_named("FoldFor")
        assert [p.kind for p in fold_for.type_params] == [ParamKind.TYPE, ParamKind.TYPE, ParamKind.NAME, ParamKind.NAME]
        static_op = fold_for.operators[0]
        assert static_op.syntax[2] == NameOperand("id1")
        getter = fold_for.operators[1]
        assert getter.syntax == (NameOperand("id1"),) and not getter.is_static

        letters = read_file(CORPUS_DIR / "Letter.ctx").class_named("Letter")
        assert len(letters.operators) == 26
        assert all(op.is_literal and op.is_native for op in letters.operators)

    def test_repeated_operand(self):
        program = read_file(CORPUS_DIR / "MatchDSL.ctx")
        match = program.class_named("MatchDSL").operators[0]
        assert match.syntax[3] == Operand(repetition=Repetition.PLUS)
        assert match.variadic_param.name == "cases"

    def test_statements(self):
        program = read_program(
            """
            main {
                int x = 1;
                x = x + 1;
                p "hello";
            }
            """
        )
        stmts = program.main.stmts
        assert isinstance(stmts[0], LocalDecl) and stmts[0].init.text == "1"
        assert isinstance(stmts[1], Assign) and stmts[1].value.text == "x + 1"
        assert isinstance(stmts[2], ExprStmt) and stmts[2].expr.text == 'p "hello"'

    def test_if_exists_is_not_an_if_statement(self):
        program = read_program("main { if-exists (m[k]) it = 1 else m[k] = 2; }")
        stmt = program.main.stmts[0]
        assert isinstance(stmt, ExprStmt)
        assert stmt.expr.text.startswith("if-exists")

    def test_functions_with_requires(self):
        program = read_file(TEST_DIR / "open_lines.ctx")
        fn = program.functions[0]
        assert fn.name == "getLines" and fn.is_static
        assert [str(r) for r in fn.requires] == ["FileRead"]

    @pytest.mark.parametrize(
        "source, message",
        [
            ("class Plain { static int \"x\" () { return 1; } }", "operators may only be declared in a dsl class"),
            ("dsl D { static int \"x\" _ () { return 1; } }", "1 operands but 0 parameters"),
            ("dsl D { static int \"x\" y () { return 1; } }", "is not a name parameter"),
            ("dsl D { static int _* \"x\" (int... xs) { return 1; } }", "cannot start with a repeated operand"),
            ("main { int x = (1; }", "unbalanced"),
        ],
    )
    def test_errors(self, source, message):
        with pytest.raises(CtxSyntaxError) as exc_info:
            read_program(source)
        assert message in str(exc_info.value)

    def test_diagnostics_carry_offsets(self):
        with pytest.raises(CtxSyntaxError) as exc_info:
            read_program("class Plain { static int \"x\" () { return 1; } }", "plain.ctx")
        diagnostic = next(iter(exc_info.value.diagnostics))
        assert diagnostic.file == "plain.ctx"
        assert str(diagnostic).startswith("plain.ctx:14: error:")


class TestRender:
    @pytest.mark.parametrize("name", ["MapUtils.ctx", "FoldFor.ctx", "MatchDSL.ctx", "TryWith.ctx", "Letter.ctx"])
    def test_render_is_a_fixpoint(self, name):
        rendered = render_declarations(read_file(CORPUS_DIR / name))
        assert render_declarations(read_program(rendered)) == rendered

    def test_render_import_constraints(self):
        program = read_program("import dsl A { A.p < B.q };\nmain { }")
        assert render_declarations(program).splitlines()[0] == "import dsl A { A.p < B.q };"


class TestResolveImports:
    def test_loads_referenced_classes(self):
        linked = resolve_imports(read_file(TEST_DIR / "counting.ctx"), [CORPUS_DIR])
        assert linked.imports == ("Predef", "FoldFor", "MapUtils")
        for name in ("FoldFor", "MapUtils", "MapEntryRef", "Id", "Letter", "Lazy"):
            assert name in linked.classes
        assert linked.class_origins["MapEntryRef"].endswith("MapEntryRef.ctx")

    def test_duplicate_import_is_idempotent(self):
        program = read_program("import dsl Hello;\nimport dsl Hello;\nmain { p \"x\"; }")
        assert resolve_imports(program, [CORPUS_DIR]).imports == ("Predef", "Hello")

    def test_unresolved_import(self):
        with pytest.raises(CtxLinkError) as exc_info:
            resolve_imports(read_program("import dsl Nowhere;\nmain { }"), [CORPUS_DIR])
        assert "unresolved dsl import Nowhere" in str(exc_info.value)

    def test_import_of_plain_class(self):
        program = read_program("import dsl Plain;\nclass Plain { }\nmain { }")
        with pytest.raises(CtxLinkError) as exc_info:
            resolve_imports(program)
        assert "Plain is not a dsl class" in str(exc_info.value)

    def test_class_in_two_files(self, tmp_path):
        (tmp_path / "Hello.ctx").write_text('dsl Hello { static void "q" () { } }\n')
        with pytest.raises(CtxLinkError) as exc_info:
            resolve_imports(read_program("import dsl Hello;\nmain { }"), [CORPUS_DIR, tmp_path])
        assert "resolves to two files" in str(exc_info.value)
