"""Declaration-level and expression-level shapes shared by every ctxlang phase.

All nodes are frozen dataclasses. Statement nodes are produced twice: once by the loader, with
``RawExprSpan`` in every expression position, and once by the checker, which replaces each span by
the ``TypedExpr`` the parse engine chose for it.
"""

import enum
import re
from dataclasses import (
    dataclass,
    field,
)
from typing import (
    Optional,
    Tuple,
    Union,
)

from .exceptions import CtxValueError


_SEGMENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class QName:
    segments: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments or not all(_SEGMENT.match(s) for s in self.segments):
            raise CtxValueError(f"invalid qualified name: {'.'.join(self.segments)!r}")

    @classmethod
    def parse(cls, text: str) -> "QName":
        return cls(tuple(part.strip() for part in text.split(".")))

    @property
    def last(self) -> str:
        return self.segments[-1]

    def qualify(self, owner: str) -> "QName":
        """Prefix a short name with its owning class; qualified names are returned as-is."""
        return self if len(self.segments) > 1 else QName((owner, *self.segments))

    def __str__(self) -> str:
        return ".".join(self.segments)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------
class ParamKind(enum.Enum):
    TYPE = "type"
    NAME = "name"


class PrimitiveKind(enum.Enum):
    INT = "int"
    BOOL = "boolean"
    STR = "String"
    VOID = "void"
    UNIT = "Unit"


PRIMITIVE_SPELLINGS = {
    "int": PrimitiveKind.INT,
    "Int": PrimitiveKind.INT,
    "Integer": PrimitiveKind.INT,
    "boolean": PrimitiveKind.BOOL,
    "Bool": PrimitiveKind.BOOL,
    "Boolean": PrimitiveKind.BOOL,
    "String": PrimitiveKind.STR,
    "Str": PrimitiveKind.STR,
    "void": PrimitiveKind.VOID,
    "Void": PrimitiveKind.VOID,
    "Unit": PrimitiveKind.UNIT,
}

# native class that carries the methods of each primitive
PRIMITIVE_CLASSES = {
    PrimitiveKind.INT: "Int",
    PrimitiveKind.BOOL: "Bool",
    PrimitiveKind.STR: "Str",
}


@dataclass(frozen=True)
class Primitive:
    kind: PrimitiveKind

    def __str__(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class TypeVar:
    """A unification variable. Canonical variables of memo keys use negative ids."""

    id: int
    kind: ParamKind = ParamKind.TYPE

    def __str__(self) -> str:
        return f"?{self.id}" if self.kind is ParamKind.TYPE else f"?name{self.id}"


@dataclass(frozen=True)
class ParamType:
    """A declared type parameter seen from inside the body that declares it (rigid)."""

    name: str
    kind: ParamKind = ParamKind.TYPE
    bound: Optional["ClassType"] = field(default=None, compare=False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ClassType:
    name: QName
    args: Tuple["TypeArg", ...] = ()

    @property
    def class_name(self) -> str:
        return self.name.last

    def __str__(self) -> str:
        if not self.args:
            return str(self.name)
        return f"{self.name}<{','.join(render_type(a) for a in self.args)}>"


@dataclass(frozen=True)
class TurnstileType:
    assumption: ClassType
    result: "TypeExpr"

    def __str__(self) -> str:
        return f"{self.assumption} |- {render_type(self.result)}"


@dataclass(frozen=True)
class DeclRef:
    """Identity of an operator: owning class and declaration index."""

    owner: str
    index: int

    def __str__(self) -> str:
        return f"{self.owner}#{self.index}"


@dataclass(frozen=True)
class NameAst:
    """Literal-operator application tree of a generic-name occurrence."""

    decl: DeclRef
    children: Tuple["NameAst", ...] = ()
    source_text: str = field(default="", compare=False)

    def structure(self) -> str:
        if not self.children:
            return str(self.decl)
        return f"{self.decl}({','.join(child.structure() for child in self.children)})"

    def __str__(self) -> str:
        return self.source_text or self.structure()


TypeExpr = Union[ClassType, TurnstileType, Primitive, TypeVar, ParamType]
TypeArg = Union[TypeExpr, NameAst]

VOID = Primitive(PrimitiveKind.VOID)
INT = Primitive(PrimitiveKind.INT)
BOOL = Primitive(PrimitiveKind.BOOL)
STR = Primitive(PrimitiveKind.STR)
UNIT = Primitive(PrimitiveKind.UNIT)


def class_type(name: str, *args: TypeArg) -> ClassType:
    return ClassType(QName((name,)), tuple(args))


def render_type(t: TypeArg) -> str:
    return str(t)


def is_void(t: TypeArg) -> bool:
    return isinstance(t, Primitive) and t.kind in (PrimitiveKind.VOID, PrimitiveKind.UNIT)


# ---------------------------------------------------------------------------
# Declarations
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TypeParam:
    name: str
    kind: ParamKind = ParamKind.TYPE
    bound: Optional[ClassType] = None
    name_type: Optional[QName] = None

    def __str__(self) -> str:
        if self.kind is ParamKind.NAME:
            return f"{self.name}: {self.name_type}"
        if self.bound is not None:
            return f"{self.name} extends {self.bound}"
        return self.name


class Repetition(enum.Enum):
    ONE = ""
    STAR = "*"
    PLUS = "+"


@dataclass(frozen=True)
class NamePart:
    text: str

    def __str__(self) -> str:
        return '"' + self.text.replace("\\", "\\\\").replace('"', '\\"') + '"'


@dataclass(frozen=True)
class Operand:
    priority: Optional[QName] = None
    repetition: Repetition = Repetition.ONE

    def __str__(self) -> str:
        text = "_" + self.repetition.value
        return f"{text} [{self.priority}]" if self.priority else text


@dataclass(frozen=True)
class NameOperand:
    param: str

    def __str__(self) -> str:
        return self.param


SyntaxElem = Union[NamePart, Operand, NameOperand]


@dataclass(frozen=True)
class Param:
    name: str
    type: TypeExpr
    variadic: bool = False

    def __str__(self) -> str:
        return f"{self.type}{'...' if self.variadic else ''} {self.name}"


class SpanContext(enum.Enum):
    LOCAL_INIT = "local-decl init"
    CONDITION = "condition"
    ARGUMENT = "argument"
    RETURN = "return"
    OPERAND = "operand"
    STATEMENT = "expression-statement"
    ASSIGN = "assignment"


@dataclass(frozen=True)
class RawExprSpan:
    start: int
    end: int
    context: SpanContext
    source: str = field(default="", compare=False, repr=False)

    @property
    def text(self) -> str:
        return self.source[self.start : self.end]


# ---------------------------------------------------------------------------
# Typed expressions
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class MethodRef:
    """A resolved method. ``owner`` is None for top-level functions."""

    owner: Optional[str]
    name: str
    is_static: bool = False
    is_native: bool = False

    def __str__(self) -> str:
        return f"{self.owner}.{self.name}" if self.owner else self.name


@dataclass(frozen=True)
class OperatorApp:
    decl: DeclRef
    type_args: Tuple[TypeArg, ...]
    # aligned with the operator's value parameters; a variadic parameter holds a tuple
    operands: Tuple[Union["TypedExpr", Tuple["TypedExpr", ...]], ...]
    start: int
    end: int
    result_type: TypeExpr
    receiver_frame: Optional[int] = None
    required_frames: Tuple[int, ...] = ()


@dataclass(frozen=True)
class ContextOperand:
    assumption: ClassType
    body: "TypedExpr"
    start: int
    end: int
    result_type: TypeExpr


@dataclass(frozen=True)
class KernelNode:
    expr: "KernelExpr"
    start: int
    end: int
    result_type: TypeExpr


@dataclass(frozen=True)
class NameLit:
    name: NameAst
    start: int
    end: int
    result_type: TypeExpr


TypedExpr = Union[OperatorApp, ContextOperand, KernelNode, NameLit]


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class NullLit:
    pass


@dataclass(frozen=True)
class LocalRef:
    name: str


@dataclass(frozen=True)
class FieldRef:
    """Field of ``this``."""

    name: str


@dataclass(frozen=True)
class FieldAccess:
    """Private field of another instance of the enclosing class."""

    receiver: TypedExpr
    name: str


@dataclass(frozen=True)
class ThisRef:
    pass


@dataclass(frozen=True)
class New:
    cls: str
    type_args: Tuple[TypeArg, ...]
    args: Tuple[TypedExpr, ...]
    is_native: bool = False


@dataclass(frozen=True)
class MethodCall:
    receiver: TypedExpr
    method: MethodRef
    args: Tuple[TypedExpr, ...]
    required_frames: Tuple[int, ...] = ()


@dataclass(frozen=True)
class StaticCall:
    method: MethodRef
    args: Tuple[TypedExpr, ...]
    required_frames: Tuple[int, ...] = ()


@dataclass(frozen=True)
class FunctionCall:
    """Unqualified call: a top-level function or a method of the enclosing class."""

    method: MethodRef
    args: Tuple[TypedExpr, ...]
    required_frames: Tuple[int, ...] = ()


@dataclass(frozen=True)
class ApplyTurnstile:
    receiver: TypedExpr
    arg: TypedExpr


@dataclass(frozen=True)
class ClosureLit:
    param: Param
    body: Union[TypedExpr, "Block"]


@dataclass(frozen=True)
class BlockExpr:
    block: "Block"


KernelExpr = Union[
    IntLit,
    StrLit,
    BoolLit,
    NullLit,
    LocalRef,
    FieldRef,
    FieldAccess,
    ThisRef,
    New,
    MethodCall,
    StaticCall,
    FunctionCall,
    ApplyTurnstile,
    ClosureLit,
    BlockExpr,
]

Expr = Union[RawExprSpan, TypedExpr]


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class VarTarget:
    name: str


@dataclass(frozen=True)
class FieldTarget:
    """``this.name`` when receiver is None, otherwise ``receiver.name`` for a local receiver."""

    name: str
    receiver: Optional[str] = None


@dataclass(frozen=True)
class LocalDecl:
    name: str
    declared: TypeExpr
    init: Optional[Expr]
    span: RawExprSpan


@dataclass(frozen=True)
class Assign:
    target: Union[VarTarget, FieldTarget]
    value: Expr
    span: RawExprSpan


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    span: RawExprSpan


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "KernelStmt"
    orelse: Optional["KernelStmt"]
    span: RawExprSpan


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "KernelStmt"
    span: RawExprSpan


@dataclass(frozen=True)
class ForEach:
    var: str
    var_type: TypeExpr
    iterable: Expr
    body: "KernelStmt"
    span: RawExprSpan


@dataclass(frozen=True)
class Return:
    value: Optional[Expr]
    span: RawExprSpan


@dataclass(frozen=True)
class TryFinally:
    body: "Block"
    finalizer: "Block"
    span: RawExprSpan


@dataclass(frozen=True)
class Block:
    stmts: Tuple["KernelStmt", ...]
    span: RawExprSpan


KernelStmt = Union[LocalDecl, Assign, ExprStmt, If, While, ForEach, Return, TryFinally, Block]


@dataclass(frozen=True)
class OperatorDecl:
    syntax: Tuple[SyntaxElem, ...]
    params: Tuple[Param, ...]
    return_type: TypeExpr
    type_params: Tuple[TypeParam, ...] = ()
    is_static: bool = False
    is_literal: bool = False
    priority: Optional[QName] = None
    requires: Tuple[ClassType, ...] = ()
    body: Optional[Block] = None
    is_native: bool = False
    offset: int = field(default=0, compare=False)

    @property
    def value_operands(self) -> Tuple[Operand, ...]:
        return tuple(e for e in self.syntax if isinstance(e, Operand))

    @property
    def starts_with_operand(self) -> bool:
        return bool(self.syntax) and isinstance(self.syntax[0], Operand)

    @property
    def variadic_param(self) -> Optional[Param]:
        return next((p for p in self.params if p.variadic), None)


@dataclass(frozen=True)
class MethodDecl:
    name: str
    params: Tuple[Param, ...]
    return_type: TypeExpr
    type_params: Tuple[TypeParam, ...] = ()
    is_static: bool = False
    requires: Tuple[ClassType, ...] = ()
    body: Optional[Block] = None
    is_native: bool = False
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ConstructorDecl:
    params: Tuple[Param, ...]
    body: Optional[Block] = None
    is_native: bool = False
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: TypeExpr
    is_private: bool = False
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PriorityDecl:
    names: Tuple[str, ...]
    constraints: Tuple[Tuple[QName, QName], ...] = ()


@dataclass(frozen=True)
class ClassDecl:
    name: str
    is_dsl: bool = False
    is_native: bool = False
    type_params: Tuple[TypeParam, ...] = ()
    priorities: Optional[PriorityDecl] = None
    operators: Tuple[OperatorDecl, ...] = ()
    methods: Tuple[MethodDecl, ...] = ()
    constructors: Tuple[ConstructorDecl, ...] = ()
    fields: Tuple[FieldDecl, ...] = ()
    origin: str = field(default="", compare=False)
    offset: int = field(default=0, compare=False)

    def operator_ref(self, index: int) -> DeclRef:
        return DeclRef(self.name, index)

    def method(self, name: str) -> Optional[MethodDecl]:
        return next((m for m in self.methods if m.name == name), None)

    def field_named(self, name: str) -> Optional[FieldDecl]:
        return next((f for f in self.fields if f.name == name), None)

    @property
    def self_type(self) -> ClassType:
        return class_type(self.name, *(ParamType(p.name, p.kind) for p in self.type_params))


@dataclass(frozen=True)
class ImportDecl:
    dsl: QName
    constraints: Tuple[Tuple[QName, QName], ...] = ()
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    imports: Tuple[ImportDecl, ...] = ()
    classes: Tuple[ClassDecl, ...] = ()
    functions: Tuple[MethodDecl, ...] = ()
    main: Optional[Block] = None
    origin: str = field(default="", compare=False)
    source: str = field(default="", compare=False, repr=False)

    def class_named(self, name: str) -> Optional[ClassDecl]:
        return next((c for c in self.classes if c.name == name), None)


# ---------------------------------------------------------------------------
# Structural operations
# ---------------------------------------------------------------------------
def name_ast_equal(a: NameAst, b: NameAst) -> bool:
    """Structural equality of generic-name trees; the source spelling is not compared."""
    return a == b


def erase_name(a: NameAst, scope: int) -> str:
    """Map a name tree and a scope id to a unique identifier."""
    return f"name{scope}:{a.structure()}"


def render_params(params: Tuple[Param, ...]) -> str:
    return "(" + ", ".join(str(p) for p in params) + ")"


def render_operator(sig: OperatorDecl) -> str:
    """Render an operator signature in the declaration syntax it was read from."""
    words = []
    if sig.is_static:
        words.append("static")
    if sig.is_literal:
        words.append("literal")
    if sig.type_params:
        words.append("<" + ",".join(str(p) for p in sig.type_params) + ">")
    words.append(render_type(sig.return_type))
    if sig.priority is not None:
        words.append(f"[{sig.priority}]")
    words.extend(str(e) for e in sig.syntax)
    words.append(render_params(sig.params))
    if sig.requires:
        words.append("requires " + ", ".join(str(r) for r in sig.requires))
    return " ".join(words)
