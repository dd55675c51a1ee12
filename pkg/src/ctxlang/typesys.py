"""Types of ctxlang: unification, signature resolution and operator candidate filtering.

The parse engine asks ``candidates_for`` which operators may produce a goal's expected type; this
module answers with freshly instantiated signatures. ``UnifyError`` and ``TypeResolutionError`` are
control-flow signals of the checker and the parse engine, so they do not log themselves.
"""

import dataclasses
import itertools
from dataclasses import (
    dataclass,
    field,
)
from typing import (
    TYPE_CHECKING,
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from .priorities import PriorityOrder
from .syntax import (
    PRIMITIVE_SPELLINGS,
    ClassDecl,
    ClassType,
    ConstructorDecl,
    DeclRef,
    MethodDecl,
    MethodRef,
    NameAst,
    NameOperand,
    NamePart,
    Operand,
    OperatorDecl,
    ParamKind,
    ParamType,
    Primitive,
    QName,
    TurnstileType,
    TypeArg,
    TypeExpr,
    TypeParam,
    TypeVar,
)


if TYPE_CHECKING:
    from .parser import Goal


class UnifyError(Exception):
    """Two types have no unifier."""

    def __init__(self, expected: TypeArg, actual: TypeArg) -> None:
        super().__init__(f"cannot unify {expected} with {actual}")
        self.expected = expected
        self.actual = actual


class TypeResolutionError(Exception):
    """A written type does not denote a known type."""


# ---------------------------------------------------------------------------
# Variables and substitutions
# ---------------------------------------------------------------------------
_fresh_ids = itertools.count(1)

# expected type of a growth-set goal: accepts every result and binds nothing
ANY = TypeVar(0)


def fresh_var(kind: ParamKind = ParamKind.TYPE) -> TypeVar:
    return TypeVar(next(_fresh_ids), kind)


class Substitution:
    """Immutable mapping from type variables to types or names."""

    __slots__ = ("_map",)

    def __init__(self, mapping: Optional[Mapping[TypeVar, TypeArg]] = None) -> None:
        self._map: Dict[TypeVar, TypeArg] = dict(mapping) if mapping else {}

    def bind(self, var: TypeVar, value: TypeArg) -> "Substitution":
        mapping = dict(self._map)
        mapping[var] = value
        return Substitution(mapping)

    def walk(self, t: TypeArg) -> TypeArg:
        while isinstance(t, TypeVar) and t in self._map:
            t = self._map[t]
        return t

    def apply(self, t: TypeArg) -> TypeArg:
        t = self.walk(t)
        if isinstance(t, ClassType) and t.args:
            return ClassType(t.name, tuple(self.apply(a) for a in t.args))
        if isinstance(t, TurnstileType):
            return TurnstileType(self.apply(t.assumption), self.apply(t.result))  # type: ignore[arg-type]
        return t

    def normalized(self) -> "Substitution":
        return Substitution({var: self.apply(value) for var, value in self._map.items()})

    def items(self) -> Iterator[Tuple[TypeVar, TypeArg]]:
        return iter(self._map.items())

    def __contains__(self, var: object) -> bool:
        return var in self._map

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Substitution):
            return NotImplemented
        return self.normalized()._map == other.normalized()._map

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        inner = ", ".join(f"{var}: {value}" for var, value in self._map.items())
        return f"Substitution({{{inner}}})"


EMPTY_SUBST = Substitution()


def free_vars(t: TypeArg, acc: Optional[List[TypeVar]] = None) -> List[TypeVar]:
    """Type variables of ``t`` in first-occurrence order, without ``ANY``."""
    acc = [] if acc is None else acc
    if isinstance(t, TypeVar):
        if t != ANY and t not in acc:
            acc.append(t)
    elif isinstance(t, ClassType):
        for arg in t.args:
            free_vars(arg, acc)
    elif isinstance(t, TurnstileType):
        free_vars(t.assumption, acc)
        free_vars(t.result, acc)
    return acc


def rename(t: TypeArg, mapping: Mapping[TypeVar, TypeArg]) -> TypeArg:
    if isinstance(t, TypeVar):
        return mapping.get(t, t)
    if isinstance(t, ClassType) and t.args:
        return ClassType(t.name, tuple(rename(a, mapping) for a in t.args))
    if isinstance(t, TurnstileType):
        return TurnstileType(rename(t.assumption, mapping), rename(t.result, mapping))  # type: ignore[arg-type]
    return t


def substitute_params(t: TypeArg, mapping: Mapping[str, TypeArg]) -> TypeArg:
    """Replace declared type parameters by their instantiation."""
    if isinstance(t, ParamType):
        return mapping.get(t.name, t)
    if isinstance(t, ClassType) and t.args:
        return ClassType(t.name, tuple(substitute_params(a, mapping) for a in t.args))
    if isinstance(t, TurnstileType):
        return TurnstileType(
            substitute_params(t.assumption, mapping), substitute_params(t.result, mapping)  # type: ignore[arg-type]
        )
    return t


def is_ground(t: TypeArg) -> bool:
    return not free_vars(t)


def canonical_renaming(types: Iterable[TypeArg]) -> Tuple[Dict[TypeVar, TypeVar], Tuple[TypeVar, ...]]:
    """Number the free variables of ``types`` by first occurrence with negative ids.

    Returns:
        the renaming into canonical variables and the original variables in canonical order
    """
    order: List[TypeVar] = []
    for t in types:
        free_vars(t, order)
    mapping = {var: TypeVar(-(i + 1), var.kind) for i, var in enumerate(order)}
    return mapping, tuple(order)


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------
# built-in nominal subtyping; user classes have no supertypes
BUILTIN_SUPERTYPES: Dict[str, Tuple[str, ...]] = {"Reader": ("Closeable",)}


def is_subclass(sub: str, sup: str) -> bool:
    if sub == sup:
        return True
    return any(is_subclass(parent, sup) for parent in BUILTIN_SUPERTYPES.get(sub, ()))


def _is_name(t: TypeArg) -> bool:
    return isinstance(t, NameAst) or (isinstance(t, (TypeVar, ParamType)) and t.kind is ParamKind.NAME)


def _bind(var: TypeVar, value: TypeArg, s: Substitution, expected: TypeArg, actual: TypeArg) -> Substitution:
    if (var.kind is ParamKind.NAME) != _is_name(value):
        raise UnifyError(expected, actual)
    if var in free_vars(s.apply(value)):
        raise UnifyError(expected, actual)
    return s.bind(var, value)


def unify(a: TypeArg, b: TypeArg, s: Substitution = EMPTY_SUBST) -> Substitution:
    """Most general unifier of ``a`` (expected) and ``b`` (actual) extending ``s``.

    Generic arguments are invariant. A ground actual class also matches an expected built-in
    supertype, and a rigid parameter matches through its bound.

    Raises:
        UnifyError: if no unifier exists
    """
    a = s.walk(a)
    b = s.walk(b)
    if a == b or a == ANY or b == ANY:
        return s
    if isinstance(a, TypeVar):
        return _bind(a, b, s, a, b)
    if isinstance(b, TypeVar):
        return _bind(b, a, s, a, b)
    if isinstance(a, ClassType) and isinstance(b, ClassType):
        if a.name == b.name and len(a.args) == len(b.args):
            for x, y in zip(a.args, b.args):
                s = unify(x, y, s)
            return s
        if not a.args and not b.args and is_subclass(b.class_name, a.class_name):
            return s
        raise UnifyError(a, b)
    if isinstance(a, ClassType) and isinstance(b, ParamType) and b.bound is not None:
        return unify(a, b.bound, s)
    if isinstance(a, TurnstileType) and isinstance(b, TurnstileType):
        s = unify(a.assumption, b.assumption, s)
        return unify(a.result, b.result, s)
    raise UnifyError(a, b)


def unifies(a: TypeArg, b: TypeArg, s: Substitution = EMPTY_SUBST) -> bool:
    try:
        unify(a, b, s)
    except UnifyError:
        return False
    return True


def satisfies_bound(t: TypeArg, bound: ClassType) -> bool:
    """Whether a ground type satisfies an ``extends`` bound; non-ground types are accepted."""
    if isinstance(t, ClassType):
        return not bound.args and is_subclass(t.class_name, bound.class_name)
    if isinstance(t, ParamType) and t.bound is not None:
        return satisfies_bound(t.bound, bound)
    return isinstance(t, TypeVar)


# ---------------------------------------------------------------------------
# Resolution of written types
# ---------------------------------------------------------------------------
class TypeEnv:
    """Resolves written types against the linked classes and the type parameters in scope."""

    def __init__(self, classes: Mapping[str, ClassDecl]) -> None:
        self.classes = classes

    def class_decl(self, name: str) -> Optional[ClassDecl]:
        return self.classes.get(name)

    def params_in_scope(
        self, type_params: Sequence[TypeParam], outer: Optional[Mapping[str, TypeParam]] = None
    ) -> Dict[str, TypeParam]:
        scope: Dict[str, TypeParam] = dict(outer or {})
        for tp in type_params:
            scope[tp.name] = tp
        return scope

    def resolve(self, t: TypeExpr, params: Mapping[str, TypeParam]) -> TypeExpr:
        """Turn a written type into a checked one.

        Raises:
            TypeResolutionError: unknown class, wrong arity or misplaced name argument
        """
        if isinstance(t, TurnstileType):
            assumption = self.resolve(t.assumption, params)
            if not isinstance(assumption, ClassType):
                raise TypeResolutionError(f"assumption {t.assumption} is not a class")
            return TurnstileType(assumption, self.resolve(t.result, params))
        if not isinstance(t, ClassType):
            return t
        if len(t.name.segments) == 1:
            short = t.name.last
            if short in params:
                if t.args:
                    raise TypeResolutionError(f"type parameter {short} takes no arguments")
                tp = params[short]
                bound = self.resolve(tp.bound, params) if tp.bound is not None else None
                return ParamType(short, tp.kind, bound)  # type: ignore[arg-type]
            if short in PRIMITIVE_SPELLINGS and not t.args:
                return Primitive(PRIMITIVE_SPELLINGS[short])
        cls = self.classes.get(t.name.last)
        if cls is None:
            raise TypeResolutionError(f"unknown type {t.name}")
        if len(t.args) != len(cls.type_params):
            raise TypeResolutionError(f"{cls.name} expects {len(cls.type_params)} type arguments, got {len(t.args)}")
        args: List[TypeArg] = []
        for tp, arg in zip(cls.type_params, t.args):
            resolved = self.resolve(arg, params)  # type: ignore[arg-type]
            if (tp.kind is ParamKind.NAME) != _is_name(resolved):
                raise TypeResolutionError(f"type argument {arg} does not match parameter {tp}")
            args.append(resolved)
        return ClassType(QName((cls.name,)), tuple(args))


# ---------------------------------------------------------------------------
# Resolved signatures
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class OperatorInfo:
    """An operator declaration with every written type resolved."""

    ref: DeclRef
    decl: OperatorDecl
    owner: ClassDecl
    params: Mapping[str, TypeParam]
    return_type: TypeExpr
    param_types: Tuple[TypeExpr, ...]
    requires: Tuple[ClassType, ...]
    priority: Optional[QName]
    # per syntax element: qualified priority annotation of operands, None elsewhere
    slot_priorities: Tuple[Optional[QName], ...]
    # per syntax element: value-parameter index of operands, -1 elsewhere
    slot_params: Tuple[int, ...]
    name_types: Mapping[str, ClassType]

    @property
    def first_token(self) -> Optional[str]:
        first = self.decl.syntax[0]
        return first.text if isinstance(first, NamePart) else None

    @property
    def starts_with_operand(self) -> bool:
        return self.decl.starts_with_operand

    @property
    def starts_with_name(self) -> bool:
        return isinstance(self.decl.syntax[0], NameOperand)


@dataclass(frozen=True)
class MethodInfo:
    """A method, top-level function or constructor with resolved signature."""

    ref: MethodRef
    owner: Optional[ClassDecl]
    type_params: Tuple[TypeParam, ...]
    params: Mapping[str, TypeParam]
    param_names: Tuple[str, ...]
    param_types: Tuple[TypeExpr, ...]
    return_type: TypeExpr
    requires: Tuple[ClassType, ...]
    is_static: bool
    offset: int = field(default=0, compare=False)


def _qualify(name: Optional[QName], owner: str) -> Optional[QName]:
    if name is None:
        return None
    return name if len(name.segments) > 1 else name.qualify(owner)


def resolve_operator(env: TypeEnv, owner: ClassDecl, index: int) -> OperatorInfo:
    """Resolve the signature of ``owner.operators[index]``.

    Raises:
        TypeResolutionError: if a written type is unknown or ill-formed
    """
    decl = owner.operators[index]
    class_params = {} if decl.is_static else env.params_in_scope(owner.type_params)
    params = env.params_in_scope(decl.type_params, class_params)
    return_type = env.resolve(decl.return_type, params)
    if isinstance(return_type, TurnstileType):
        raise TypeResolutionError("a turnstile type cannot be returned")
    param_types = tuple(env.resolve(p.type, params) for p in decl.params)
    requires = tuple(env.resolve(r, params) for r in decl.requires)
    name_types: Dict[str, ClassType] = {}
    for tp in params.values():
        if tp.kind is ParamKind.NAME and tp.name_type is not None:
            name_type = env.resolve(ClassType(tp.name_type), {})
            if not isinstance(name_type, ClassType):
                raise TypeResolutionError(f"name type {tp.name_type} is not a class")
            name_types[tp.name] = name_type
    slot_priorities: List[Optional[QName]] = []
    slot_params: List[int] = []
    next_param = 0
    for elem in decl.syntax:
        if isinstance(elem, Operand):
            slot_priorities.append(_qualify(elem.priority, owner.name))
            slot_params.append(next_param)
            next_param += 1
        else:
            slot_priorities.append(None)
            slot_params.append(-1)
    return OperatorInfo(
        ref=owner.operator_ref(index),
        decl=decl,
        owner=owner,
        params=params,
        return_type=return_type,
        param_types=param_types,
        requires=tuple(r for r in requires if isinstance(r, ClassType)),
        priority=_qualify(decl.priority, owner.name),
        slot_priorities=tuple(slot_priorities),
        slot_params=tuple(slot_params),
        name_types=name_types,
    )


def resolve_method(env: TypeEnv, owner: Optional[ClassDecl], decl: MethodDecl) -> MethodInfo:
    class_params = env.params_in_scope(owner.type_params) if owner is not None and not decl.is_static else {}
    params = env.params_in_scope(decl.type_params, class_params)
    requires = tuple(env.resolve(r, params) for r in decl.requires)
    return MethodInfo(
        ref=MethodRef(owner.name if owner else None, decl.name, decl.is_static, decl.is_native),
        owner=owner,
        type_params=decl.type_params,
        params=params,
        param_names=tuple(p.name for p in decl.params),
        param_types=tuple(env.resolve(p.type, params) for p in decl.params),
        return_type=env.resolve(decl.return_type, params),
        requires=tuple(r for r in requires if isinstance(r, ClassType)),
        is_static=decl.is_static,
        offset=decl.offset,
    )


def resolve_constructor(env: TypeEnv, owner: ClassDecl, index: int) -> MethodInfo:
    decl: ConstructorDecl = owner.constructors[index]
    params = env.params_in_scope(owner.type_params)
    return MethodInfo(
        ref=MethodRef(owner.name, f"<init>{index}", False, decl.is_native),
        owner=owner,
        type_params=(),
        params=params,
        param_names=tuple(p.name for p in decl.params),
        param_types=tuple(env.resolve(p.type, params) for p in decl.params),
        return_type=owner.self_type,
        requires=(),
        is_static=False,
        offset=decl.offset,
    )


class SignatureTable:
    """Lazily resolved signatures of every linked class, plus the top-level functions."""

    def __init__(self, env: TypeEnv, functions: Sequence[MethodDecl] = ()) -> None:
        self.env = env
        self._functions = {f.name: f for f in functions}
        self._operators: Dict[str, Tuple[OperatorInfo, ...]] = {}
        self._methods: Dict[Tuple[Optional[str], str], Optional[MethodInfo]] = {}
        self._fields: Dict[Tuple[str, str], Optional[TypeExpr]] = {}

    def operators(self, class_name: str) -> Tuple[OperatorInfo, ...]:
        """Resolved operators of a class; operators whose types do not resolve are left out."""
        if class_name not in self._operators:
            cls = self.env.class_decl(class_name)
            infos = []
            for i in range(len(cls.operators) if cls else 0):
                try:
                    infos.append(resolve_operator(self.env, cls, i))  # type: ignore[arg-type]
                except TypeResolutionError:
                    continue
            self._operators[class_name] = tuple(infos)
        return self._operators[class_name]

    def method(self, class_name: Optional[str], name: str) -> Optional[MethodInfo]:
        key = (class_name, name)
        if key not in self._methods:
            info = None
            try:
                if class_name is None:
                    decl = self._functions.get(name)
                    info = resolve_method(self.env, None, decl) if decl else None
                else:
                    cls = self.env.class_decl(class_name)
                    decl = cls.method(name) if cls else None
                    info = resolve_method(self.env, cls, decl) if decl else None
            except TypeResolutionError:
                info = None
            self._methods[key] = info
        return self._methods[key]

    def constructor(self, class_name: str, arity: int) -> Optional[MethodInfo]:
        cls = self.env.class_decl(class_name)
        if cls is None:
            return None
        for i, ctor in enumerate(cls.constructors):
            if len(ctor.params) == arity:
                try:
                    return resolve_constructor(self.env, cls, i)
                except TypeResolutionError:
                    return None
        return None

    def field_type(self, class_name: str, name: str) -> Optional[TypeExpr]:
        key = (class_name, name)
        if key not in self._fields:
            cls = self.env.class_decl(class_name)
            decl = cls.field_named(name) if cls else None
            resolved = None
            if decl is not None:
                try:
                    resolved = self.env.resolve(decl.type, self.env.params_in_scope(cls.type_params))  # type: ignore
                except TypeResolutionError:
                    resolved = None
            self._fields[key] = resolved
        return self._fields[key]


# ---------------------------------------------------------------------------
# Scopes and candidates
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class OperatorCandidate:
    """One operator instantiated with globally fresh type variables."""

    info: OperatorInfo
    frame: Optional[int]
    frame_type: Optional[ClassType]
    source_rank: Tuple[int, int]
    type_vars: Tuple[TypeVar, ...]
    mapping: Mapping[str, TypeArg]
    return_type: TypeExpr
    param_types: Tuple[TypeExpr, ...]
    requires: Tuple[ClassType, ...]
    bounds: Tuple[Tuple[TypeArg, ClassType], ...]

    def refresh(self) -> "OperatorCandidate":
        return instantiate(self.info, self.frame, self.frame_type, self.source_rank)


def instantiate(
    info: OperatorInfo,
    frame: Optional[int] = None,
    frame_type: Optional[ClassType] = None,
    source_rank: Tuple[int, int] = (0, 0),
) -> OperatorCandidate:
    """Instantiate an operator: instance operators take their class arguments from the frame."""
    mapping: Dict[str, TypeArg] = {}
    if frame_type is not None:
        for tp, arg in zip(info.owner.type_params, frame_type.args):
            mapping[tp.name] = arg
    type_vars: List[TypeVar] = []
    for tp in info.params.values():
        if tp.name not in mapping:
            var = fresh_var(tp.kind)
            mapping[tp.name] = var
            type_vars.append(var)
    bounds = tuple(
        (mapping[name], tp.bound) for name, tp in info.params.items() if tp.bound is not None  # type: ignore[misc]
    )
    return OperatorCandidate(
        info=info,
        frame=frame,
        frame_type=frame_type,
        source_rank=source_rank,
        type_vars=tuple(type_vars),
        mapping=mapping,
        return_type=substitute_params(info.return_type, mapping),  # type: ignore[arg-type]
        param_types=tuple(substitute_params(t, mapping) for t in info.param_types),  # type: ignore[misc]
        requires=tuple(substitute_params(r, mapping) for r in info.requires),  # type: ignore[misc]
        bounds=bounds,
    )


class OperatorScope:
    """Operators in effect in one compilation unit.

    Static operators come from the imported DSL classes in import order, then declaration order.
    Instance operators are looked up per assumption frame. Literal operators are always in effect
    for name occurrences of the types they produce.
    """

    def __init__(
        self,
        signatures: SignatureTable,
        static_classes: Sequence[str],
        literal_classes: Sequence[str] = (),
    ) -> None:
        self.signatures = signatures
        statics: List[OperatorInfo] = []
        literals: List[OperatorInfo] = []
        seen = set()
        for class_name in static_classes:
            if class_name in seen:
                continue
            seen.add(class_name)
            for info in signatures.operators(class_name):
                if info.decl.is_literal:
                    literals.append(info)
                elif info.decl.is_static:
                    statics.append(info)
        for class_name in literal_classes:
            if class_name in seen:
                continue
            seen.add(class_name)
            literals.extend(info for info in signatures.operators(class_name) if info.decl.is_literal)
        self.static_ops: Tuple[OperatorInfo, ...] = tuple(statics)
        self.literal_ops: Tuple[OperatorInfo, ...] = tuple(literals)
        self.literal_types = frozenset(
            info.return_type.class_name for info in literals if isinstance(info.return_type, ClassType)
        )

    def instance_ops(self, class_name: str) -> Tuple[OperatorInfo, ...]:
        return tuple(
            info for info in self.signatures.operators(class_name) if not info.decl.is_static and not info.decl.is_literal
        )


def check_requires(
    requires: Sequence[ClassType], assumptions: Sequence[ClassType], subst: Substitution = EMPTY_SUBST
) -> bool:
    """True iff every required class unifies with some assumption frame."""
    return all(any(unifies(frame, req, subst) for frame in assumptions) for req in requires)


def required_frames(
    requires: Sequence[ClassType], assumptions: Sequence[ClassType], subst: Substitution = EMPTY_SUBST
) -> Tuple[int, ...]:
    """Innermost frame index satisfying each required class."""
    frames = []
    for req in requires:
        for i in reversed(range(len(assumptions))):
            if unifies(assumptions[i], req, subst):
                frames.append(i)
                break
    return tuple(frames)


def candidates_for(goal: "Goal", scope: OperatorScope, order: PriorityOrder) -> List[OperatorCandidate]:
    """Operators that may produce ``goal.expected``.

    Instance operators come first, innermost frame first, then static operators in source order.
    Literal-mode goals see only literal operators.
    """
    expected = goal.subst.apply(goal.expected)
    assumptions = tuple(goal.subst.apply(a) for a in goal.assumptions)
    pool: List[Tuple[OperatorInfo, Optional[int], Optional[ClassType], Tuple[int, int]]] = []
    if goal.literal_mode:
        pool.extend((info, None, None, (1, i)) for i, info in enumerate(scope.literal_ops))
    else:
        for frame in reversed(range(len(assumptions))):
            frame_type = assumptions[frame]
            for info in scope.instance_ops(frame_type.class_name):  # type: ignore[union-attr]
                pool.append((info, frame, frame_type, (0, len(assumptions) - frame)))  # type: ignore[arg-type]
        pool.extend((info, None, None, (1, i)) for i, info in enumerate(scope.static_ops))

    out = []
    for info, frame, frame_type, rank in pool:
        if not order.admits(goal.min_rank, info.priority):
            continue
        cand = instantiate(info, frame, frame_type, rank)
        try:
            subst = unify(expected, cand.return_type, goal.subst)
        except UnifyError:
            continue
        if not check_requires(cand.requires, assumptions, subst):
            continue
        out.append(cand)
    return out


# ---------------------------------------------------------------------------
# Types inside typed trees
# ---------------------------------------------------------------------------
_TYPE_NODES = (ClassType, TurnstileType, Primitive, TypeVar, ParamType, NameAst)


def map_types(node: object, fn: Callable[[TypeArg], TypeArg]) -> object:
    """Rebuild a typed tree with ``fn`` applied to every type it carries."""
    if isinstance(node, _TYPE_NODES):
        return fn(node)  # type: ignore[arg-type]
    if isinstance(node, tuple):
        return tuple(map_types(item, fn) for item in node)
    if dataclasses.is_dataclass(node) and not isinstance(node, type):
        changes = {}
        for f in dataclasses.fields(node):
            value = getattr(node, f.name)
            mapped = map_types(value, fn)
            if mapped is not value:
                changes[f.name] = mapped
        return dataclasses.replace(node, **changes) if changes else node  # type: ignore[type-var]
    return node


def node_vars(node: object, acc: Optional[List[TypeVar]] = None) -> List[TypeVar]:
    """Type variables occurring anywhere in a typed tree."""
    acc = [] if acc is None else acc

    def collect(t: TypeArg) -> TypeArg:
        free_vars(t, acc)
        return t

    map_types(node, collect)
    return acc


def apply_subst(node: object, subst: Substitution) -> object:
    return map_types(node, subst.apply)
