import random
from pathlib import Path

import pytest

from ctxlang import (
    Compiler,
    CtxlangConfig,
    VirtualFS,
)
from ctxlang.lowering import LoweredProgram
from ctxlang.runtime import (
    BUILTINS,
    CounterV,
    Interpreter,
    OptionalV,
)


CORPUS_DIR = Path(__file__).parent.parent / "corpus"


@pytest.fixture
def compiler():
    return Compiler(CtxlangConfig(search_paths=[CORPUS_DIR]))


@pytest.fixture
def interpreter():
    return Interpreter(LoweredProgram("<test>", {}, {}, None))


def run(compiler, source, vfs=None):
    return compiler.run(compiler.compile(source), vfs)


class TestBuiltins:
    @pytest.mark.parametrize(
        "name, args, expected",
        [
            ("Int.div", (7, 2), 3),
            ("Int.div", (-7, 2), -3),
            ("Int.mod", (-7, 2), -1),
            ("Int.parse", (" 42 ",), 42),
            ("Str.substring", ("hello", 1, 3), "el"),
            ("Str.split", ("a,b", ","), ["a", "b"]),
            ("Str.indexOf", ("hello", "z"), -1),
            ("Objects.equals", (1, True), False),
            ("Objects.equals", ("a", "a"), True),
            ("List.of", (1, 2, 3), [1, 2, 3]),
            ("Map.get", ({"a": 1}, "b"), None),
            ("Optional.isPresent", (OptionalV(),), False),
        ],
    )
    def test_builtin(self, interpreter, name, args, expected):
        assert interpreter.builtin_call(name, args) == expected

    def test_every_builtin_is_callable(self):
        assert all(callable(impl) for impl in BUILTINS.values())

    def test_counter(self, interpreter):
        counter = CounterV()
        interpreter.builtin_call("Counter.inc", [counter])
        interpreter.builtin_call("Counter.inc", [counter])
        assert interpreter.builtin_call("Counter.get", [counter]) == 2

    def test_console(self, interpreter):
        interpreter.builtin_call("Console.print", ["a"])
        interpreter.builtin_call("Console.println", ["b"])
        assert interpreter.out.getvalue() == "ab\n"

    @pytest.mark.parametrize(
        "value, text",
        [
            (None, "null"),
            (True, "true"),
            (12, "12"),
            ([1, "a", False], "[1, a, false]"),
            ({"x": 2, "y": [1]}, "{x=2, y=[1]}"),
            (OptionalV(3, True), "Optional[3]"),
            (OptionalV(), "Optional.empty"),
            (CounterV(4), "Counter(4)"),
        ],
    )
    def test_to_string(self, interpreter, value, text):
        assert interpreter.to_string(value) == text


class TestVirtualFS:
    def test_read_until_end(self):
        vfs = VirtualFS({"f": ["one", "two"]})
        handle = vfs.open("f")
        assert vfs.read_line(handle) == "one"
        assert vfs.read_line(handle) == "two"
        assert vfs.read_line(handle) is None
        assert vfs.read_line(handle) is None
        assert vfs.opens["f"] == 1

    def test_close_is_idempotent(self):
        vfs = VirtualFS({"f": ["one"]})
        handle = vfs.open("f")
        assert vfs.open_handles == [handle]
        vfs.close(handle)
        vfs.close(handle)
        assert vfs.closes["f"] == 1
        assert vfs.open_handles == []

    def test_closed_handle(self):
        vfs = VirtualFS({"f": ["one"]})
        handle = vfs.open("f")
        vfs.close(handle)
        with pytest.raises(Exception, match="closed handle"):
            vfs.read_line(handle)

    def test_missing_file(self):
        vfs = VirtualFS()
        assert not vfs.exists("f")
        with pytest.raises(Exception, match="no such file: f"):
            vfs.open("f")
        assert vfs.opens["f"] == 0

    def test_each_open_gets_its_own_position(self):
        vfs = VirtualFS({"f": ["one", "two"]})
        first, second = vfs.open("f"), vfs.open("f")
        vfs.read_line(first)
        assert vfs.read_line(second) == "one"
        assert vfs.opens["f"] == 2

    def test_from_dir(self, tmp_path):
        (tmp_path / "sub").mkdir()
        (tmp_path / "sub" / "a.txt").write_text("x\ny\n")
        vfs = VirtualFS.from_dir(tmp_path)
        assert vfs.files == {"sub/a.txt": ("x", "y")}


class TestPrograms:
    def test_arithmetic_and_locals(self, compiler):
        result = run(compiler, "main { int x = 7 / 2; int y = -7 % 2; boolean b = x > y && !(x == 0); }")
        assert result.exit_code == 0
        assert result.locals == {"x": 3, "y": -1, "b": True}

    def test_fault_has_provenance(self, compiler):
        source = "main {\n    int x = 1 / 0;\n}"
        result = run(compiler, source)
        assert result.exit_code == 1
        assert result.stderr.startswith("fault: division by zero at <string>:")
        assert result.stderr.endswith("\n")

    def test_index_out_of_range(self, compiler):
        result = run(compiler, "main { List<int> xs = new List<int>(); int y = xs.get(3); }")
        assert result.exit_code == 1
        assert "index 3 out of range" in result.stderr

    def test_output_before_fault_is_kept(self, compiler):
        result = run(compiler, 'main { println("before"); int x = 1 / 0; println("after"); }')
        assert result.stdout == "before\n"
        assert result.exit_code == 1

    def test_stack_overflow(self, compiler):
        result = run(compiler, "int down(int n) { return down(n + 1); }\nmain { int x = down(0); }")
        assert result.exit_code == 1
        assert result.stderr == "fault: stack overflow\n"

    def test_user_objects(self, compiler):
        source = """
        class Point {
            Point(int x, int y) { this.x = x; this.y = y; }
            int sum() { return x + y; }
            private int x;
            private int y;
        }
        main { Point p = new Point(2, 3); int s = p.sum(); }
        """
        result = run(compiler, source)
        assert result.locals["s"] == 5
        assert repr(result.locals["p"]).startswith("Point@")

    def test_while_and_for(self, compiler):
        source = """
        main {
            List<int> xs = new List<int>();
            int i = 0;
            while (i < 4) { xs.add(i); i = i + 1; }
            int total = 0;
            for (int x : xs) { total = total + x; }
        }
        """
        assert run(compiler, source).locals["total"] == 6


def _short_circuit_case(rng):
    """A random ``&&``/``||`` chain over constants and counting calls, with its expected outcome."""
    atoms = [rng.choice(["true", "false", "yes(c)", "no(c)"]) for _ in range(rng.randint(2, 5))]
    ops = [rng.choice(["&&", "||"]) for _ in range(len(atoms) - 1)]
    text = atoms[0] + "".join(f" {op} {atom}" for op, atom in zip(ops, atoms[1:]))

    # && binds tighter than ||: the chain is a disjunction of conjunctions
    groups = [[atoms[0]]]
    for op, atom in zip(ops, atoms[1:]):
        if op == "||":
            groups.append([atom])
        else:
            groups[-1].append(atom)
    calls = 0
    value = False
    for group in groups:
        conj = True
        for atom in group:
            if atom.endswith("(c)"):
                calls += 1
            if atom in ("false", "no(c)"):
                conj = False
                break
        if conj:
            value = True
            break
    return text, value, calls


def test_boolean_operators_are_lazy(compiler):
    """Test that the right operand of && and || is evaluated only when it decides the result"""
    rng = random.Random(7)
    cases = [_short_circuit_case(rng) for _ in range(100)]
    lines = [
        "boolean yes(Counter c) { c.inc(); return true; }",
        "boolean no(Counter c) { c.inc(); return false; }",
        "main {",
    ]
    for k, (text, _, _) in enumerate(cases):
        lines.append(f"    Counter c{k} = new Counter();")
        lines.append(f"    boolean r{k} = {text.replace('(c)', f'(c{k})')};")
    lines.append("}")
    result = run(compiler, "\n".join(lines))
    assert result.exit_code == 0, result.stderr
    for k, (text, value, calls) in enumerate(cases):
        assert result.locals[f"r{k}"] is value, text
        assert result.locals[f"c{k}"].count == calls, text


def test_if_exists_runs_only_the_taken_branch(compiler):
    """Test that if-exists evaluates one branch, chosen by whether the key is present"""
    rng = random.Random(11)
    present = [rng.random() < 0.5 for _ in range(100)]
    lines = ["import dsl MapUtils;", "void hit(Counter c) { c.inc(); }", "main {"]
    for k, has_key in enumerate(present):
        lines.append(f"    Map<String, int> m{k} = {{}};")
        if has_key:
            lines.append(f'    m{k}["k"] = {k};')
        lines.append(f"    Counter t{k} = new Counter();")
        lines.append(f"    Counter e{k} = new Counter();")
        lines.append(f'    if-exists (m{k}["k"]) hit(t{k}) else hit(e{k});')
    lines.append("}")
    result = run(compiler, "\n".join(lines))
    assert result.exit_code == 0, result.stderr
    for k, has_key in enumerate(present):
        taken, skipped = (f"t{k}", f"e{k}") if has_key else (f"e{k}", f"t{k}")
        assert result.locals[taken].count == 1
        assert result.locals[skipped].count == 0
