"""Tree-walking evaluation of Core IR.

Values are plain Python values where one fits (``int``, ``bool``, ``str``, ``None`` for null,
``list`` and ``dict``); user objects, closures and handles have their own classes. Faults are
raised as ``CtxFault`` and pass through ``try``/``finally`` like any exception.
"""

import io
import itertools
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import (
    IO,
    Any,
    Callable,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
)

from .exceptions import (
    CtxFault,
    CtxFileNotFoundError,
)
from .logger import logger
from .lowering import (
    THIS,
    App,
    BuiltinCall,
    CallOp,
    ClosureNode,
    CoreNode,
    ForEachNode,
    GetField,
    GetLocal,
    IfNode,
    Lam,
    Lit,
    LoweredMember,
    LoweredProgram,
    NewObj,
    ReturnNode,
    Seq,
    SetField,
    SetLocal,
    TryFinallyNode,
    WhileNode,
)


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------
class _Unit:
    _instance: Optional["_Unit"] = None

    def __new__(cls) -> "_Unit":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "()"


UNIT = _Unit()


@dataclass(eq=False)
class ObjectV:
    cls: str
    slots: Dict[str, object]
    serial: int = 0

    def __repr__(self) -> str:
        return f"{self.cls}@{self.serial}"


@dataclass(eq=False)
class ClosureV:
    params: Tuple[str, ...]
    body: CoreNode
    scope: "Scope"


@dataclass(frozen=True)
class OptionalV:
    value: object = None
    present: bool = False


@dataclass(eq=False)
class CounterV:
    count: int = 0


@dataclass(eq=False)
class Handle:
    """An open file of the virtual filesystem."""

    path: str
    lines: Tuple[str, ...]
    position: int = 0
    closed: bool = False


# ---------------------------------------------------------------------------
# Virtual filesystem
# ---------------------------------------------------------------------------
class VirtualFS:
    """In-memory files for one run: path to lines, with open and close counts per path."""

    def __init__(self, files: Optional[Mapping[str, Sequence[str]]] = None) -> None:
        self.files: Dict[str, Tuple[str, ...]] = {path: tuple(lines) for path, lines in (files or {}).items()}
        self.opens: Counter = Counter()
        self.closes: Counter = Counter()
        self.handles: List[Handle] = []

    @classmethod
    def from_dir(cls, root: Path) -> "VirtualFS":
        """Every regular file below ``root``, keyed by its relative path."""
        root = Path(root)
        if not root.is_dir():
            raise CtxFileNotFoundError(f"vfs directory not found: {root}")
        files = {}
        for path in sorted(root.rglob("*")):
            if path.is_file():
                files[path.relative_to(root).as_posix()] = path.read_text(encoding="utf-8").splitlines()
        return cls(files)

    def exists(self, path: str) -> bool:
        return path in self.files

    def open(self, path: str) -> Handle:
        if path not in self.files:
            raise _Fault(f"no such file: {path}")
        handle = Handle(path, self.files[path])
        self.opens[path] += 1
        self.handles.append(handle)
        return handle

    def read_line(self, handle: Handle) -> Optional[str]:
        if handle.closed:
            raise _Fault("closed handle")
        if handle.position >= len(handle.lines):
            return None
        line = handle.lines[handle.position]
        handle.position += 1
        return line

    def close(self, handle: Handle) -> None:
        if not handle.closed:
            handle.closed = True
            self.closes[handle.path] += 1

    @property
    def open_handles(self) -> List[Handle]:
        return [h for h in self.handles if not h.closed]


class RunResult(BaseModel):
    """Outcome of running a program."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    exit_code: int = Field(default=0, description="0 on normal completion, 1 on an uncaught fault")
    stdout: str = Field(default="", description="Console output of the program")
    stderr: str = Field(default="", description="Fault report, if any")
    locals: Dict[str, Any] = Field(default_factory=dict, description="Local variables of main at exit")


# ---------------------------------------------------------------------------
# Scopes and signals
# ---------------------------------------------------------------------------
class Scope:
    __slots__ = ("vars", "parent")

    def __init__(self, parent: Optional["Scope"] = None) -> None:
        self.vars: Dict[str, object] = {}
        self.parent = parent

    def lookup(self, name: str) -> object:
        scope: Optional[Scope] = self
        while scope is not None:
            if name in scope.vars:
                return scope.vars[name]
            scope = scope.parent
        raise _Fault(f"unbound variable {name}")

    def assign(self, name: str, value: object) -> None:
        scope: Optional[Scope] = self
        while scope is not None:
            if name in scope.vars:
                scope.vars[name] = value
                return
            scope = scope.parent
        raise _Fault(f"unbound variable {name}")


class _Fault(Exception):
    """A fault raised below the interpreter, before its provenance is known."""


class _Return(Exception):
    def __init__(self, value: object) -> None:
        super().__init__()
        self.value = value


# ---------------------------------------------------------------------------
# Rendering and equality
# ---------------------------------------------------------------------------
def _int_div(a: int, b: int) -> int:
    if b == 0:
        raise _Fault("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def values_equal(a: object, b: object) -> bool:
    if isinstance(a, (ObjectV, ClosureV, Handle, CounterV)) or isinstance(b, (ObjectV, ClosureV, Handle, CounterV)):
        return a is b
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------
class Interpreter:
    """Evaluates the Core IR of one lowered program.

    Args:
        program: lowered classes, functions and main block
        vfs: the files the program may open
        out: receives console output
    """

    def __init__(self, program: LoweredProgram, vfs: Optional[VirtualFS] = None, out: Optional[IO[str]] = None):
        self.program = program
        self.vfs = vfs or VirtualFS()
        self.out = out or io.StringIO()
        self._serials = itertools.count(1)
        self._dispatch: Dict[type, Callable[[Any, Scope], object]] = {
            Lit: lambda n, s: n.value,
            GetLocal: lambda n, s: s.lookup(n.name),
            SetLocal: self._set_local,
            GetField: self._get_field,
            SetField: self._set_field,
            Lam: lambda n, s: ClosureV((n.param,), n.body, s),
            ClosureNode: lambda n, s: ClosureV(n.params, n.body, s),
            App: self._app,
            CallOp: self._call_op,
            NewObj: self._new,
            BuiltinCall: self._builtin_call,
            Seq: lambda n, s: self.run_block(n, Scope(s)),
            IfNode: self._if,
            WhileNode: self._while,
            ForEachNode: self._for_each,
            ReturnNode: self._return,
            TryFinallyNode: self._try_finally,
        }

    def eval(self, node: CoreNode, scope: Scope) -> object:
        try:
            return self._dispatch[type(node)](node, scope)
        except _Fault as fault:
            raise CtxFault(str(fault), getattr(node, "at", ""))

    def run_block(self, block: Seq, scope: Scope) -> object:
        for item in block.items:
            self.eval(item, scope)
        return UNIT

    # -- nodes ----------------------------------------------------------------
    def _set_local(self, node: SetLocal, scope: Scope) -> object:
        value = self.eval(node.value, scope)
        if node.declare:
            scope.vars[node.name] = value
        else:
            scope.assign(node.name, value)
        return UNIT

    def _object(self, node: Any, scope: Scope) -> ObjectV:
        obj = self.eval(node.obj, scope)
        if obj is None:
            raise _Fault(f"null member access .{node.name}")
        if not isinstance(obj, ObjectV) or node.name not in obj.slots:
            raise _Fault(f"no field {node.name} on {obj!r}")
        return obj

    def _get_field(self, node: GetField, scope: Scope) -> object:
        return self._object(node, scope).slots[node.name]

    def _set_field(self, node: SetField, scope: Scope) -> object:
        obj = self._object(node, scope)
        obj.slots[node.name] = self.eval(node.value, scope)
        return UNIT

    def _app(self, node: App, scope: Scope) -> object:
        fn = self.eval(node.fn, scope)
        arg = self.eval(node.arg, scope)
        return self.apply(fn, (arg,))

    def apply(self, fn: object, args: Sequence[object]) -> object:
        """Run a closure with its parameters bound to ``args``."""
        if fn is None:
            raise _Fault("null member access .apply")
        if not isinstance(fn, ClosureV) or len(fn.params) != len(args):
            raise _Fault(f"cannot apply {fn!r}")
        scope = Scope(fn.scope)
        scope.vars.update(zip(fn.params, args))
        try:
            return self.eval(fn.body, scope)
        except _Return as ret:
            return ret.value

    def _call_op(self, node: CallOp, scope: Scope) -> object:
        receiver = None
        if node.receiver is not None:
            receiver = self.eval(node.receiver, scope)
            if receiver is None:
                raise _Fault(f"null member access .{node.key}")
        args = [self.eval(a, scope) for a in node.args]
        return self.invoke(node.owner, node.key, receiver, args)

    def invoke(self, owner: Optional[str], key: str, receiver: object, args: Sequence[object]) -> object:
        if owner is None:
            member = self.program.functions.get(key)
        else:
            cls = self.program.classes.get(owner)
            member = cls.member(key) if cls is not None else None
        if member is None:
            raise _Fault(f"no member {owner}.{key}")
        return self._run_member(member, receiver, args)

    def _run_member(self, member: LoweredMember, receiver: object, args: Sequence[object]) -> object:
        if member.body is None:
            raise _Fault(f"no implementation of native member {member.key}")
        scope = Scope()
        if receiver is not None:
            scope.vars[THIS] = receiver
        scope.vars.update(zip(member.params, args))
        try:
            self.eval(member.body, scope)
        except _Return as ret:
            return ret.value
        return UNIT

    def _new(self, node: NewObj, scope: Scope) -> object:
        args = [self.eval(a, scope) for a in node.args]
        if node.is_native:
            factory = NATIVE_CONSTRUCTORS.get(node.cls)
            if factory is None:
                raise _Fault(f"cannot instantiate native class {node.cls}")
            return factory()
        cls = self.program.classes.get(node.cls)
        if cls is None:
            raise _Fault(f"unknown class {node.cls}")
        obj = ObjectV(cls.name, dict(cls.fields), next(self._serials))
        if node.ctor is not None:
            self._run_member(cls.constructors[node.ctor], obj, args)
        return obj

    def _builtin_call(self, node: BuiltinCall, scope: Scope) -> object:
        args = [self.eval(a, scope) for a in node.args]
        return self.builtin_call(node.name, args)

    def builtin_call(self, name: str, args: Sequence[object]) -> object:
        impl = BUILTINS.get(name)
        if impl is None:
            raise _Fault(f"no native implementation of {name}")
        if name in _INSTANCE_BUILTINS and args and args[0] is None:
            raise _Fault(f"null member access .{name.split('.')[-1]}")
        return impl(self, *args)

    def _if(self, node: IfNode, scope: Scope) -> object:
        if self.eval(node.cond, scope) is True:
            self.eval(node.then, Scope(scope))
        elif node.orelse is not None:
            self.eval(node.orelse, Scope(scope))
        return UNIT

    def _while(self, node: WhileNode, scope: Scope) -> object:
        while self.eval(node.cond, scope) is True:
            self.eval(node.body, Scope(scope))
        return UNIT

    def _for_each(self, node: ForEachNode, scope: Scope) -> object:
        items = self.eval(node.iterable, scope)
        if items is None:
            raise _Fault("null member access in for")
        for item in list(items):  # type: ignore[call-overload]
            inner = Scope(scope)
            inner.vars[node.var] = item
            self.eval(node.body, inner)
        return UNIT

    def _return(self, node: ReturnNode, scope: Scope) -> object:
        raise _Return(self.eval(node.value, scope) if node.value is not None else UNIT)

    def _try_finally(self, node: TryFinallyNode, scope: Scope) -> object:
        try:
            self.eval(node.body, Scope(scope))
        finally:
            self.eval(node.finalizer, Scope(scope))
        return UNIT

    # -- text -----------------------------------------------------------------
    def to_string(self, value: object) -> str:
        if value is None:
            return "null"
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, (int, str)):
            return str(value)
        if isinstance(value, list):
            return "[" + ", ".join(self.to_string(v) for v in value) + "]"
        if isinstance(value, dict):
            return "{" + ", ".join(f"{self.to_string(k)}={self.to_string(v)}" for k, v in value.items()) + "}"
        if isinstance(value, OptionalV):
            return f"Optional[{self.to_string(value.value)}]" if value.present else "Optional.empty"
        if isinstance(value, ObjectV):
            cls = self.program.classes.get(value.cls)
            member = cls.member("toString") if cls is not None else None
            if member is not None and not member.is_static and not member.params and member.body is not None:
                return self.to_string(self._run_member(member, value, ()))
            return repr(value)
        if isinstance(value, CounterV):
            return f"Counter({value.count})"
        if isinstance(value, Handle):
            return f"Reader({value.path})"
        if isinstance(value, ClosureV):
            return "<closure>"
        return repr(value)


# ---------------------------------------------------------------------------
# Native members
# ---------------------------------------------------------------------------
def _index(items: Sequence[object], i: int) -> int:
    if not 0 <= i < len(items):
        raise _Fault(f"index {i} out of range")
    return i


def _substring(s: str, start: int, end: int) -> str:
    if not 0 <= start <= end <= len(s):
        raise _Fault(f"substring({start}, {end}) out of range for length {len(s)}")
    return s[start:end]


def _optional_get(o: OptionalV) -> object:
    if not o.present:
        raise _Fault("get on an empty Optional")
    return o.value


def _read_line(rt: Interpreter, handle: Handle) -> Optional[str]:
    return rt.vfs.read_line(handle)


def _close(rt: Interpreter, handle: object) -> object:
    if isinstance(handle, Handle):
        rt.vfs.close(handle)
    return UNIT


def _println(rt: Interpreter, text: str) -> object:
    rt.out.write(text + "\n")
    return UNIT


def _print(rt: Interpreter, text: str) -> object:
    rt.out.write(text)
    return UNIT


def _parse_int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise _Fault(f"not an integer: {text!r}")


def _map_put(m: Dict, k: object, v: object) -> object:
    m[k] = v
    return UNIT


def _map_remove(m: Dict, k: object) -> object:
    m.pop(k, None)
    return UNIT


def _list_add(items: List, item: object) -> object:
    items.append(item)
    return UNIT


def _list_set(items: List, i: int, item: object) -> object:
    items[_index(items, i)] = item
    return UNIT


def _counter_inc(c: CounterV) -> object:
    c.count += 1
    return UNIT


BUILTINS: Dict[str, Callable[..., object]] = {
    "Int.toString": lambda rt, v: str(v),
    "Int.parse": lambda rt, s: _parse_int(s),
    "Int.add": lambda rt, a, b: a + b,
    "Int.sub": lambda rt, a, b: a - b,
    "Int.mul": lambda rt, a, b: a * b,
    "Int.div": lambda rt, a, b: _int_div(a, b),
    "Int.mod": lambda rt, a, b: a - b * _int_div(a, b),
    "Int.neg": lambda rt, a: -a,
    "Int.lt": lambda rt, a, b: a < b,
    "Int.le": lambda rt, a, b: a <= b,
    "Int.gt": lambda rt, a, b: a > b,
    "Int.ge": lambda rt, a, b: a >= b,
    "Bool.toString": lambda rt, v: "true" if v else "false",
    "Bool.not": lambda rt, v: not v,
    "Str.length": lambda rt, s: len(s),
    "Str.isEmpty": lambda rt, s: not s,
    "Str.startsWith": lambda rt, s, prefix: s.startswith(prefix),
    "Str.substring": lambda rt, s, a, b: _substring(s, a, b),
    "Str.concat": lambda rt, s, other: s + other,
    "Str.indexOf": lambda rt, s, part: s.find(part),
    "Str.at": lambda rt, s, i: s[_index(s, i)],
    "Str.split": lambda rt, s, sep: s.split(sep) if sep else list(s),
    "Str.trim": lambda rt, s: s.strip(),
    "Objects.equals": lambda rt, a, b: values_equal(a, b),
    "Objects.toString": lambda rt, v: rt.to_string(v),
    "Objects.isNull": lambda rt, v: v is None,
    "Map.get": lambda rt, m, k: m.get(k),
    "Map.put": lambda rt, m, k, v: _map_put(m, k, v),
    "Map.contains": lambda rt, m, k: k in m,
    "Map.isEmpty": lambda rt, m: not m,
    "Map.size": lambda rt, m: len(m),
    "Map.keys": lambda rt, m: list(m),
    "Map.remove": lambda rt, m, k: _map_remove(m, k),
    "List.of": lambda rt, *items: list(items),
    "List.add": lambda rt, items, item: _list_add(items, item),
    "List.get": lambda rt, items, i: items[_index(items, i)],
    "List.set": lambda rt, items, i, item: _list_set(items, i, item),
    "List.size": lambda rt, items: len(items),
    "List.isEmpty": lambda rt, items: not items,
    "List.contains": lambda rt, items, item: any(values_equal(x, item) for x in items),
    "Optional.of": lambda rt, v: OptionalV(v, True),
    "Optional.empty": lambda rt: OptionalV(),
    "Optional.isPresent": lambda rt, o: o.present,
    "Optional.get": lambda rt, o: _optional_get(o),
    "Function.apply": lambda rt, fn, arg: rt.apply(fn, (arg,)),
    "Closeable.close": _close,
    "Reader.close": _close,
    "Reader.readLine": _read_line,
    "Files.open": lambda rt, path: rt.vfs.open(path),
    "Files.exists": lambda rt, path: rt.vfs.exists(path),
    "Console.println": _println,
    "Console.print": _print,
    "Counter.inc": lambda rt, c: _counter_inc(c),
    "Counter.get": lambda rt, c: c.count,
}

_INSTANCE_BUILTINS = frozenset(
    name
    for name in BUILTINS
    if name.split(".")[0] in {"Str", "Map", "List", "Function", "Closeable", "Reader", "Counter"}
    or name in {"Optional.isPresent", "Optional.get"}
) - {"List.of"}

NATIVE_CONSTRUCTORS: Dict[str, Callable[[], object]] = {
    "Map": dict,
    "List": list,
    "Counter": CounterV,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------
def run_program(program: LoweredProgram, vfs: Optional[VirtualFS] = None) -> RunResult:
    """Run the main block of a lowered program.

    Console output is collected in ``stdout``; an uncaught fault ends the run with exit code 1 and
    its report in ``stderr``.
    """
    out = io.StringIO()
    interpreter = Interpreter(program, vfs, out)
    scope = Scope()
    exit_code = 0
    stderr = ""
    try:
        if program.main is not None:
            interpreter.run_block(program.main, scope)  # type: ignore[arg-type]
    except _Return:
        pass
    except CtxFault as fault:
        exit_code = 1
        stderr = str(fault) + "\n"
    except RecursionError:
        exit_code = 1
        stderr = "fault: stack overflow\n"
    logger.debug(f"run of {program.origin} finished with exit code {exit_code}")
    return RunResult(exit_code=exit_code, stdout=out.getvalue(), stderr=stderr, locals=dict(scope.vars))
