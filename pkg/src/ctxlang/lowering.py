"""Lowering of checked programs into Core IR.

Every context-sensitive operand becomes a one-parameter closure over its environment object
(higher-order abstract syntax): the instance operators used inside it become calls on that
parameter. Operator applications become calls, generic names are erased to identifiers and never
reach the runtime.
"""

import itertools
from dataclasses import (
    dataclass,
    field,
    fields,
    is_dataclass,
)
from typing import (
    Dict,
    Iterator,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from .checker import (
    CheckedProgram,
    TypedClass,
)
from .exceptions import CtxValueError
from .logger import logger
from .syntax import (
    BOOL,
    INT,
    ApplyTurnstile,
    Assign,
    Block,
    BlockExpr,
    BoolLit,
    ClassDecl,
    ClosureLit,
    ContextOperand,
    ExprStmt,
    FieldAccess,
    FieldRef,
    FieldTarget,
    ForEach,
    FunctionCall,
    If,
    IntLit,
    KernelNode,
    LocalDecl,
    LocalRef,
    MethodCall,
    MethodRef,
    NameAst,
    NameLit,
    New,
    NullLit,
    OperatorApp,
    Return,
    StaticCall,
    StrLit,
    ThisRef,
    TryFinally,
    TypeExpr,
    VarTarget,
    While,
    erase_name,
)


THIS = "this"
# left out of dump_program
_PRELUDE_CLASSES = frozenset({"Predef", "Lazy"})


# ---------------------------------------------------------------------------
# Core IR
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Lit:
    value: object


@dataclass(frozen=True)
class GetLocal:
    name: str


@dataclass(frozen=True)
class SetLocal:
    name: str
    value: "CoreNode"
    declare: bool = False


@dataclass(frozen=True)
class GetField:
    obj: "CoreNode"
    name: str
    at: str = field(default="", compare=False)


@dataclass(frozen=True)
class SetField:
    obj: "CoreNode"
    name: str
    value: "CoreNode"
    at: str = field(default="", compare=False)


@dataclass(frozen=True)
class Lam:
    """Environment closure of a context-sensitive operand."""

    param: str
    body: "CoreNode"


@dataclass(frozen=True)
class App:
    fn: "CoreNode"
    arg: "CoreNode"
    at: str = field(default="", compare=False)


@dataclass(frozen=True)
class CallOp:
    """Call of a user-defined operator, method or function.

    ``key`` is the erased member key; ``receiver`` is None for static members. Required frames are
    passed after the ordinary arguments.
    """

    owner: Optional[str]
    key: str
    receiver: Optional["CoreNode"]
    args: Tuple["CoreNode", ...]
    at: str = field(default="", compare=False)


@dataclass(frozen=True)
class NewObj:
    cls: str
    ctor: Optional[str]
    args: Tuple["CoreNode", ...]
    is_native: bool = False
    at: str = field(default="", compare=False)


@dataclass(frozen=True)
class BuiltinCall:
    """Call of a native member: ``Owner.name``; instance members get the receiver as first argument."""

    name: str
    args: Tuple["CoreNode", ...]
    at: str = field(default="", compare=False)


@dataclass(frozen=True)
class ClosureNode:
    params: Tuple[str, ...]
    body: "CoreNode"


@dataclass(frozen=True)
class Seq:
    items: Tuple["CoreNode", ...]


@dataclass(frozen=True)
class IfNode:
    cond: "CoreNode"
    then: "CoreNode"
    orelse: Optional["CoreNode"] = None


@dataclass(frozen=True)
class WhileNode:
    cond: "CoreNode"
    body: "CoreNode"


@dataclass(frozen=True)
class ForEachNode:
    var: str
    iterable: "CoreNode"
    body: "CoreNode"


@dataclass(frozen=True)
class ReturnNode:
    value: Optional["CoreNode"] = None


@dataclass(frozen=True)
class TryFinallyNode:
    body: "CoreNode"
    finalizer: "CoreNode"


CoreNode = Union[
    Lit,
    GetLocal,
    SetLocal,
    GetField,
    SetField,
    Lam,
    App,
    CallOp,
    NewObj,
    BuiltinCall,
    ClosureNode,
    Seq,
    IfNode,
    WhileNode,
    ForEachNode,
    ReturnNode,
    TryFinallyNode,
]


@dataclass(frozen=True)
class LoweredMember:
    key: str
    params: Tuple[str, ...]
    body: Optional[CoreNode]
    is_static: bool = False
    is_native: bool = False


@dataclass
class LoweredClass:
    name: str
    is_native: bool = False
    # declared fields with their initial values
    fields: Tuple[Tuple[str, object], ...] = ()
    members: Dict[str, LoweredMember] = field(default_factory=dict)
    constructors: Dict[str, LoweredMember] = field(default_factory=dict)

    def member(self, key: str) -> Optional[LoweredMember]:
        return self.members.get(key)


@dataclass
class LoweredProgram:
    origin: str
    classes: Dict[str, LoweredClass]
    functions: Dict[str, LoweredMember]
    main: Optional[CoreNode]


def operator_key(index: int) -> str:
    """Erased member key of the operator declared at ``index`` of its class."""
    return f"op{index}"


def constructor_key(index: int) -> str:
    return f"<init>{index}"


def _initial_value(t: TypeExpr) -> object:
    if t == INT:
        return 0
    if t == BOOL:
        return False
    return None


# ---------------------------------------------------------------------------
# Lowerer
# ---------------------------------------------------------------------------
class Lowerer:
    """Lowers the bodies of one class or of the main unit.

    Args:
        classes: declarations of every linked class, for constructor selection
        origin: file name used in fault provenance
    """

    def __init__(self, classes: Dict[str, ClassDecl], origin: str = "<string>") -> None:
        self.classes = classes
        self.origin = origin
        self._env_ids = itertools.count(1)
        # environment variable of each assumption frame, outermost first
        self.frames: List[str] = []
        # binding scope of each open context operand; 0 is the enclosing body
        self.scopes: List[int] = [0]

    def _at(self, offset: int) -> str:
        return f"{self.origin}:{offset}"

    def _fresh_env(self) -> Tuple[str, int]:
        scope = next(self._env_ids)
        return f"$env{scope}", scope

    # -- expressions ----------------------------------------------------------
    def lower_expr(self, e: object) -> CoreNode:
        if isinstance(e, OperatorApp):
            return self._operator_app(e)
        if isinstance(e, ContextOperand):
            param, scope = self._fresh_env()
            self.frames.append(param)
            self.scopes.append(scope)
            try:
                return Lam(param, self.lower_expr(e.body))
            finally:
                self.frames.pop()
                self.scopes.pop()
        if isinstance(e, NameLit):
            return Lit(erase_name(e.name, self.scopes[-1]))
        if isinstance(e, KernelNode):
            return self._kernel(e.expr, e.start)
        raise CtxValueError(f"cannot lower {e!r}")

    def _frame_args(self, required: Sequence[int]) -> Tuple[CoreNode, ...]:
        return tuple(GetLocal(self.frames[i]) for i in required)

    def _operator_app(self, app: OperatorApp) -> CoreNode:
        args: List[CoreNode] = []
        for operand in app.operands:
            if isinstance(operand, tuple):
                args.append(BuiltinCall("List.of", tuple(self.lower_expr(item) for item in operand)))
            else:
                args.append(self.lower_expr(operand))
        args.extend(self._frame_args(app.required_frames))
        receiver = GetLocal(self.frames[app.receiver_frame]) if app.receiver_frame is not None else None
        return CallOp(app.decl.owner, operator_key(app.decl.index), receiver, tuple(args), self._at(app.start))

    def _call(
        self, method: MethodRef, receiver: Optional[CoreNode], args: Sequence[object], frames: Sequence[int], at: int
    ) -> CoreNode:
        lowered = tuple(self.lower_expr(a) for a in args)
        if method.is_native:
            prefix = (receiver,) if receiver is not None else ()
            return BuiltinCall(f"{method.owner}.{method.name}", prefix + lowered, self._at(at))
        return CallOp(method.owner, method.name, receiver, lowered + self._frame_args(frames), self._at(at))

    def _kernel(self, expr: object, start: int) -> CoreNode:
        if isinstance(expr, (IntLit, StrLit, BoolLit)):
            return Lit(expr.value)
        if isinstance(expr, NullLit):
            return Lit(None)
        if isinstance(expr, LocalRef):
            return GetLocal(expr.name)
        if isinstance(expr, ThisRef):
            return GetLocal(THIS)
        if isinstance(expr, FieldRef):
            return GetField(GetLocal(THIS), expr.name, self._at(start))
        if isinstance(expr, FieldAccess):
            return GetField(self.lower_expr(expr.receiver), expr.name, self._at(start))
        if isinstance(expr, New):
            return self._new(expr, start)
        if isinstance(expr, MethodCall):
            return self._call(expr.method, self.lower_expr(expr.receiver), expr.args, expr.required_frames, start)
        if isinstance(expr, StaticCall):
            return self._call(expr.method, None, expr.args, expr.required_frames, start)
        if isinstance(expr, FunctionCall):
            receiver = None if expr.method.is_static or expr.method.owner is None else GetLocal(THIS)
            return self._call(expr.method, receiver, expr.args, expr.required_frames, start)
        if isinstance(expr, ApplyTurnstile):
            return App(self.lower_expr(expr.receiver), self.lower_expr(expr.arg), self._at(start))
        if isinstance(expr, ClosureLit):
            if isinstance(expr.body, Block):
                body = self.lower_block(expr.body)
            else:
                body = self.lower_expr(expr.body)
            return ClosureNode((expr.param.name,), body)
        if isinstance(expr, BlockExpr):
            return self.lower_block(expr.block)
        raise CtxValueError(f"cannot lower kernel expression {expr!r}")

    def _new(self, expr: New, start: int) -> CoreNode:
        args = tuple(self.lower_expr(a) for a in expr.args)
        decl = self.classes.get(expr.cls)
        ctor = None
        if decl is not None:
            for i, c in enumerate(decl.constructors):
                if len(c.params) == len(args):
                    ctor = constructor_key(i)
                    break
        return NewObj(expr.cls, ctor, args, expr.is_native, self._at(start))

    # -- statements -----------------------------------------------------------
    def lower_block(self, block: Block) -> CoreNode:
        return Seq(tuple(self.lower_stmt(s) for s in block.stmts))

    def lower_stmt(self, stmt: object) -> CoreNode:
        if isinstance(stmt, Block):
            return self.lower_block(stmt)
        if isinstance(stmt, LocalDecl):
            init = self.lower_expr(stmt.init) if stmt.init is not None else Lit(_initial_value(stmt.declared))
            return SetLocal(stmt.name, init, declare=True)
        if isinstance(stmt, Assign):
            value = self.lower_expr(stmt.value)
            target = stmt.target
            if isinstance(target, VarTarget):
                return SetLocal(target.name, value)
            if isinstance(target, FieldTarget):
                obj = GetLocal(target.receiver or THIS)
                return SetField(obj, target.name, value, self._at(stmt.span.start))
        if isinstance(stmt, ExprStmt):
            return self.lower_expr(stmt.expr)
        if isinstance(stmt, If):
            orelse = self.lower_stmt(stmt.orelse) if stmt.orelse is not None else None
            return IfNode(self.lower_expr(stmt.cond), self.lower_stmt(stmt.then), orelse)
        if isinstance(stmt, While):
            return WhileNode(self.lower_expr(stmt.cond), self.lower_stmt(stmt.body))
        if isinstance(stmt, ForEach):
            return ForEachNode(stmt.var, self.lower_expr(stmt.iterable), self.lower_stmt(stmt.body))
        if isinstance(stmt, Return):
            return ReturnNode(self.lower_expr(stmt.value) if stmt.value is not None else None)
        if isinstance(stmt, TryFinally):
            return TryFinallyNode(self.lower_block(stmt.body), self.lower_block(stmt.finalizer))
        raise CtxValueError(f"cannot lower statement {stmt!r}")

    # -- bodies ---------------------------------------------------------------
    def lower_body(
        self,
        key: str,
        params: Sequence[str],
        body: Optional[Block],
        requires: int = 0,
        is_static: bool = False,
        is_native: bool = False,
    ) -> LoweredMember:
        """Lower a member body; each required frame becomes a trailing parameter."""
        frames = [f"$req{i}" for i in range(requires)]
        saved, self.frames = self.frames, list(frames)
        saved_scopes, self.scopes = self.scopes, [0]
        try:
            lowered = self.lower_block(body) if body is not None else None
        finally:
            self.frames = saved
            self.scopes = saved_scopes
        return LoweredMember(key, tuple(params) + tuple(frames), lowered, is_static, is_native or body is None)


def lower_expr(e: object, classes: Optional[Dict[str, ClassDecl]] = None, frames: Sequence[str] = ()) -> CoreNode:
    """Lower one typed expression; ``frames`` name the environments of the assumptions in effect."""
    lowerer = Lowerer(classes or {})
    lowerer.frames = list(frames)
    return lowerer.lower_expr(e)


def lower_class(c: TypedClass, classes: Dict[str, ClassDecl]) -> LoweredClass:
    """Lower the checked bodies of one class.

    Instance members take ``this`` implicitly; constructors run after the declared fields have been
    initialised.
    """
    decl = c.decl
    lowerer = Lowerer(classes, decl.origin)
    lowered = LoweredClass(
        decl.name,
        decl.is_native,
        tuple((f.name, _initial_value(f.type)) for f in decl.fields),
    )
    for i, op in enumerate(decl.operators):
        key = operator_key(i)
        lowered.members[key] = lowerer.lower_body(
            key,
            [p.name for p in op.params],
            c.operators.get(i),
            len(op.requires),
            op.is_static,
            op.is_native,
        )
    for method in decl.methods:
        lowered.members[method.name] = lowerer.lower_body(
            method.name,
            [p.name for p in method.params],
            c.methods.get(method.name),
            len(method.requires),
            method.is_static,
            method.is_native,
        )
    for i, ctor in enumerate(decl.constructors):
        key = constructor_key(i)
        lowered.constructors[key] = lowerer.lower_body(
            key, [p.name for p in ctor.params], c.constructors.get(i), is_native=ctor.is_native
        )
    return lowered


def lower_program(checked: CheckedProgram) -> LoweredProgram:
    linked = checked.linked
    program = linked.program
    classes = {name: lower_class(typed, linked.classes) for name, typed in checked.classes.items()}
    lowerer = Lowerer(linked.classes, program.origin)
    functions = {}
    for fn in program.functions:
        functions[fn.name] = lowerer.lower_body(
            fn.name, [p.name for p in fn.params], checked.functions.get(fn.name), len(fn.requires), True
        )
    main = lowerer.lower_block(checked.main) if checked.main is not None else None
    logger.debug(f"lowered {len(classes)} classes and {len(functions)} functions")
    return LoweredProgram(program.origin, classes, functions, main)


# ---------------------------------------------------------------------------
# Inspection
# ---------------------------------------------------------------------------
def walk(node: object) -> Iterator[object]:
    """Every Core IR node and scalar reachable from ``node``, depth first."""
    yield node
    if is_dataclass(node) and not isinstance(node, type):
        for f in fields(node):
            if f.name == "at":
                continue
            yield from walk(getattr(node, f.name))
    elif isinstance(node, tuple):
        for item in node:
            yield from walk(item)


def contains_names(node: object) -> bool:
    return any(isinstance(item, NameAst) for item in walk(node))


def _scalar(value: object) -> str:
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


_HEADS = {
    GetLocal: lambda n: f"(get {n.name})",
    Lit: lambda n: f"(lit {_scalar(n.value)})",
}


def dump_core(node: Optional[CoreNode], indent: int = 0) -> str:
    """Render Core IR as an indented s-expression."""
    pad = "  " * indent
    if node is None:
        return pad + "()"
    simple = _HEADS.get(type(node))
    if simple is not None:
        return pad + simple(node)
    head = [type(node).__name__]
    children: List[str] = []
    for f in fields(node):
        if f.name == "at":
            continue
        value = getattr(node, f.name)
        if isinstance(value, tuple) and all(isinstance(v, str) for v in value):
            head.append("(" + " ".join(value) + ")")
        elif isinstance(value, tuple):
            children.extend(dump_core(v, indent + 1) for v in value)
        elif is_dataclass(value):
            children.append(dump_core(value, indent + 1))
        elif value is None and f.name in ("receiver", "orelse", "value"):
            continue
        else:
            head.append(value if isinstance(value, str) and f.name != "value" else _scalar(value))
    text = pad + "(" + " ".join(str(h) for h in head)
    if children:
        return text + "\n" + "\n".join(children) + ")"
    return text + ")"


def dump_program(lowered: LoweredProgram, user_only: bool = True) -> str:
    """Render the members of every user class, the functions and the main block."""
    parts = []
    for name in sorted(lowered.classes):
        cls = lowered.classes[name]
        if cls.is_native or (user_only and cls.name in _PRELUDE_CLASSES):
            continue
        members = list(cls.constructors.values()) + list(cls.members.values())
        for member in members:
            if member.body is None:
                continue
            parts.append(f"; {name}.{member.key}({', '.join(member.params)})")
            parts.append(dump_core(member.body))
    for name, fn in lowered.functions.items():
        parts.append(f"; {name}({', '.join(fn.params)})")
        parts.append(dump_core(fn.body))
    if lowered.main is not None:
        parts.append("; main")
        parts.append(dump_core(lowered.main))
    return "\n".join(parts) + "\n"

