"""Checking declaration bodies and programs.

The ``Elaborator`` walks the kernel statements of every body and hands each expression span to the
parse engine with the expected type its position dictates. It is also the engine's kernel host:
literals, variables, calls, ``new``, closures, parenthesised expressions and blocks are recognised
here and compete with user operators under longest match.
"""

import re
from contextlib import contextmanager
from dataclasses import (
    dataclass,
    field,
    replace,
)
from typing import (
    Dict,
    Hashable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from .exceptions import (
    CtxTypeError,
    CtxValueError,
    DiagnosticList,
)
from .loader import (
    PREDEF,
    LinkedProgram,
    SourceError,
    StatementReader,
    matching_close,
    scan_type,
    split_top_level,
    string_end,
    unescape,
)
from .logger import logger
from .parser import (
    Failure,
    Goal,
    ParseSession,
    ParseStats,
    Success,
)
from .priorities import (
    PriorityOrder,
    merge,
)
from .syntax import (
    BOOL,
    INT,
    PRIMITIVE_CLASSES,
    STR,
    VOID,
    ApplyTurnstile,
    Assign,
    Block,
    BlockExpr,
    BoolLit,
    ClassDecl,
    ClassType,
    ClosureLit,
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
    MethodDecl,
    New,
    NullLit,
    Param,
    ParamType,
    Primitive,
    QName,
    RawExprSpan,
    Return,
    StaticCall,
    StrLit,
    ThisRef,
    TryFinally,
    TurnstileType,
    TypedExpr,
    TypeExpr,
    TypeParam,
    VarTarget,
    While,
    class_type,
    is_void,
)
from .typesys import (
    ANY,
    EMPTY_SUBST,
    MethodInfo,
    OperatorScope,
    SignatureTable,
    Substitution,
    TypeEnv,
    TypeResolutionError,
    UnifyError,
    apply_subst,
    check_requires,
    fresh_var,
    required_frames,
    resolve_operator,
    substitute_params,
    unify,
)


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT = re.compile(r"[0-9]+")


class _BodyError(Exception):
    def __init__(self, offset: int, message: str) -> None:
        super().__init__(message)
        self.offset = offset
        self.message = message


class LocalScope:
    """Immutable ordered bindings of local variables; later bindings shadow earlier ones."""

    __slots__ = ("bindings", "_hash")

    def __init__(self, bindings: Tuple[Tuple[str, TypeExpr], ...] = ()) -> None:
        self.bindings = bindings
        self._hash = hash(bindings)

    def lookup(self, name: str) -> Optional[TypeExpr]:
        for bound, t in reversed(self.bindings):
            if bound == name:
                return t
        return None

    def bind(self, name: str, t: TypeExpr) -> "LocalScope":
        return LocalScope(self.bindings + ((name, t),))

    def names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.bindings)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LocalScope) and self.bindings == other.bindings

    def __hash__(self) -> int:
        return self._hash


EMPTY_SCOPE = LocalScope()


@dataclass(frozen=True)
class BodyContext:
    owner: Optional[str]
    is_static: bool
    return_type: TypeExpr
    type_params: Tuple[TypeParam, ...] = ()
    # set inside braced operand blocks, where `return` is rejected
    in_operand: bool = False


@dataclass
class TypedClass:
    """A class whose bodies have been checked; bodies are typed blocks, None for native members."""

    decl: ClassDecl
    operators: Dict[int, Optional[Block]] = field(default_factory=dict)
    methods: Dict[str, Optional[Block]] = field(default_factory=dict)
    constructors: Dict[int, Optional[Block]] = field(default_factory=dict)


@dataclass
class CheckedProgram:
    linked: LinkedProgram
    classes: Dict[str, TypedClass]
    functions: Dict[str, Optional[Block]]
    main: Optional[Block]
    signatures: SignatureTable
    stats: Optional[ParseStats] = None


# ---------------------------------------------------------------------------
# Elaborator
# ---------------------------------------------------------------------------
class Elaborator:
    """Checks the bodies of one source file and supplies kernel alternatives to its parse session.

    Args:
        text: source text of the file
        origin: file name for diagnostics
        signatures: resolved signatures of every linked class
        scope: operators in effect in the file
        order: merged priority order of the file
        trace: log parse evaluations at the TRACE level
    """

    def __init__(
        self,
        text: str,
        origin: str,
        signatures: SignatureTable,
        scope: OperatorScope,
        order: PriorityOrder,
        trace: bool = False,
    ) -> None:
        self.text = text
        self.origin = origin
        self.signatures = signatures
        self.env: TypeEnv = signatures.env
        self.scope = scope
        self.order = order
        self.session = ParseSession(text, scope, order, self, origin=origin, trace=trace)
        self.statements = StatementReader(text)
        self.context = BodyContext(None, True, VOID)
        self.locals = EMPTY_SCOPE
        self._nesting = 0

    # -- scopes ---------------------------------------------------------------
    def scope_key(self) -> Hashable:
        return (self.context, self.locals)

    @contextmanager
    def body(self, context: BodyContext, locals_: LocalScope) -> Iterator[None]:
        saved = self.context, self.locals
        self.context, self.locals = context, locals_
        try:
            yield
        finally:
            self.context, self.locals = saved

    @contextmanager
    def nested(self) -> Iterator[None]:
        saved = self.locals
        self._nesting += 1
        try:
            yield
        finally:
            self.locals = saved
            self._nesting -= 1

    @property
    def type_params(self) -> Dict[str, TypeParam]:
        owner = self.env.class_decl(self.context.owner) if self.context.owner else None
        outer = owner.type_params if owner is not None and not self.context.is_static else ()
        return self.env.params_in_scope(self.context.type_params, self.env.params_in_scope(outer))

    def resolve(self, t: TypeExpr) -> TypeExpr:
        return self.env.resolve(t, self.type_params)

    # -- spans ----------------------------------------------------------------
    def check_span(
        self, span: RawExprSpan, expected: TypeExpr, assumptions: Sequence[ClassType], subst: Substitution
    ) -> Tuple[TypedExpr, Substitution]:
        """Parse an expression span at ``expected``.

        Raises:
            _BodyError: if the span does not parse completely
        """
        if self._nesting == 0:
            self.session.reset_failures()
        goal = Goal(expected, tuple(assumptions), 0, False, subst)
        outcome = self.session.parse_span(span.start, span.end, goal)
        if isinstance(outcome, Failure):
            raise _BodyError(
                outcome.furthest,
                f"{self.session.describe_failure(outcome)} in {span.context.value} (expected type {subst.apply(expected)})",
            )
        return outcome.node, outcome.subst

    def check_context_operand(
        self,
        span: RawExprSpan,
        param_type: TurnstileType,
        assumptions: Sequence[ClassType] = (),
        subst: Substitution = EMPTY_SUBST,
    ) -> Tuple[TypedExpr, Substitution]:
        """Check a span as the operand of a turnstile-typed parameter: a ``ContextOperand``."""
        return self.check_span(span, param_type, assumptions, subst)

    # -- statements -----------------------------------------------------------
    def check_block(
        self, block: Block, assumptions: Sequence[ClassType], subst: Substitution
    ) -> Tuple[Block, Substitution]:
        saved = self.locals
        try:
            stmts = []
            for stmt in block.stmts:
                typed, subst = self.check_stmt(stmt, assumptions, subst)
                stmts.append(typed)
            return Block(tuple(stmts), block.span), subst
        finally:
            self.locals = saved

    def _scoped(self, stmt: object, assumptions: Sequence[ClassType], subst: Substitution) -> Tuple[object, Substitution]:
        saved = self.locals
        try:
            return self.check_stmt(stmt, assumptions, subst)
        finally:
            self.locals = saved

    def check_stmt(self, stmt: object, assumptions: Sequence[ClassType], subst: Substitution) -> Tuple[object, Substitution]:
        if isinstance(stmt, Block):
            return self.check_block(stmt, assumptions, subst)
        if isinstance(stmt, LocalDecl):
            try:
                declared = self.resolve(stmt.declared)
            except TypeResolutionError:
                return self._expression_statement(stmt.span, assumptions, subst)
            if is_void(declared) or isinstance(declared, TurnstileType):
                raise _BodyError(stmt.span.start, f"a local variable cannot have type {declared}")
            init = None
            if stmt.init is not None:
                init, subst = self.check_span(stmt.init, declared, assumptions, subst)  # type: ignore[arg-type]
            self.locals = self.locals.bind(stmt.name, declared)
            return LocalDecl(stmt.name, declared, init, stmt.span), subst
        if isinstance(stmt, Assign):
            target_type = self._target_type(stmt.target)
            if target_type is None:
                return self._expression_statement(stmt.span, assumptions, subst)
            target, t = target_type
            value, subst = self.check_span(stmt.value, t, assumptions, subst)  # type: ignore[arg-type]
            return Assign(target, value, stmt.span), subst
        if isinstance(stmt, ExprStmt):
            return self._expression_statement(stmt.expr, assumptions, subst)  # type: ignore[arg-type]
        if isinstance(stmt, If):
            cond, subst = self.check_span(stmt.cond, BOOL, assumptions, subst)  # type: ignore[arg-type]
            then, subst = self._scoped(stmt.then, assumptions, subst)
            orelse = None
            if stmt.orelse is not None:
                orelse, subst = self._scoped(stmt.orelse, assumptions, subst)
            return If(cond, then, orelse, stmt.span), subst  # type: ignore[arg-type]
        if isinstance(stmt, While):
            cond, subst = self.check_span(stmt.cond, BOOL, assumptions, subst)  # type: ignore[arg-type]
            body, subst = self._scoped(stmt.body, assumptions, subst)
            return While(cond, body, stmt.span), subst  # type: ignore[arg-type]
        if isinstance(stmt, ForEach):
            try:
                var_type = self.resolve(stmt.var_type)
            except TypeResolutionError as err:
                raise _BodyError(stmt.span.start, str(err))
            iterable, subst = self.check_span(stmt.iterable, class_type("List", var_type), assumptions, subst)  # type: ignore
            saved = self.locals
            self.locals = self.locals.bind(stmt.var, var_type)
            try:
                body, subst = self.check_stmt(stmt.body, assumptions, subst)
            finally:
                self.locals = saved
            return ForEach(stmt.var, var_type, iterable, body, stmt.span), subst  # type: ignore[arg-type]
        if isinstance(stmt, Return):
            if self.context.in_operand:
                raise _BodyError(stmt.span.start, "return is not allowed inside an operand block")
            expected = self.context.return_type
            if stmt.value is None:
                if not is_void(subst.apply(expected)):
                    try:
                        subst = unify(expected, VOID, subst)
                    except UnifyError:
                        raise _BodyError(stmt.span.start, f"missing return value of type {subst.apply(expected)}")
                return Return(None, stmt.span), subst
            if is_void(subst.apply(expected)):
                raise _BodyError(stmt.value.start, "cannot return a value from a void body")  # type: ignore[union-attr]
            value, subst = self.check_span(stmt.value, expected, assumptions, subst)  # type: ignore[arg-type]
            return Return(value, stmt.span), subst
        if isinstance(stmt, TryFinally):
            body, subst = self.check_block(stmt.body, assumptions, subst)
            finalizer, subst = self.check_block(stmt.finalizer, assumptions, subst)
            return TryFinally(body, finalizer, stmt.span), subst
        raise CtxValueError(f"unknown statement {stmt!r}")

    def _expression_statement(
        self, span: RawExprSpan, assumptions: Sequence[ClassType], subst: Substitution
    ) -> Tuple[ExprStmt, Substitution]:
        """An expression statement parses at void, then at any type."""
        span = RawExprSpan(span.start, span.end, span.context, self.text)
        try:
            expr, subst = self.check_span(span, VOID, assumptions, subst)
        except _BodyError as first:
            try:
                expr, subst = self.check_span(span, fresh_var(), assumptions, subst)
            except _BodyError as second:
                raise first if first.offset >= second.offset else second
        return ExprStmt(expr, span), subst

    def _target_type(self, target: object) -> Optional[Tuple[object, TypeExpr]]:
        owner = self.env.class_decl(self.context.owner) if self.context.owner else None
        if isinstance(target, VarTarget):
            local = self.locals.lookup(target.name)
            if local is not None:
                if isinstance(local, TurnstileType):
                    return None
                return target, local
            if owner is not None and not self.context.is_static:
                t = self.signatures.field_type(owner.name, target.name)
                if t is not None:
                    return FieldTarget(target.name), t
            return None
        if isinstance(target, FieldTarget):
            if owner is None or self.context.is_static and target.receiver is None:
                return None
            if target.receiver is not None:
                receiver = self.locals.lookup(target.receiver)
                if not (isinstance(receiver, ClassType) and receiver.class_name == owner.name):
                    return None
                t = self.signatures.field_type(owner.name, target.name)
                if t is None:
                    return None
                mapping = {tp.name: arg for tp, arg in zip(owner.type_params, receiver.args)}
                return target, substitute_params(t, mapping)  # type: ignore[return-value]
            t = self.signatures.field_type(owner.name, target.name)
            return (target, t) if t is not None else None
        return None

    # -- kernel alternatives ----------------------------------------------------
    def kernel_alternatives(self, session: ParseSession, pos: int, goal: Goal) -> List[Success]:
        if pos >= session.limit:
            return []
        found: List[Tuple[Success, bool]] = []
        chains: List[Success] = []
        try:
            self._primaries(session, pos, goal, found)
            for success, chainable in found:
                chains.append(success)
                if chainable:
                    chains.extend(self._postfix(session, success, goal))
        except SourceError as err:
            session.complain(err.offset, err.message)
        results: List[Success] = []
        for item in chains:
            if isinstance(item.result_type, TurnstileType):
                # only passed on whole or applied
                continue
            try:
                subst = unify(goal.expected, item.node.result_type, item.subst)
            except UnifyError:
                session.expect(item.node.start, str(goal.subst.apply(goal.expected)))  # type: ignore[union-attr]
                continue
            results.append(Success(item.node, item.end, subst, rank=(0, len(results))))
        return results

    def pass_through(self, session: ParseSession, pos: int, goal: Goal) -> Optional[Success]:
        m = _IDENT.match(self.text, pos, session.limit)
        if m is None:
            return None
        local = self.locals.lookup(m.group(0))
        if not isinstance(local, TurnstileType):
            return None
        try:
            subst = unify(goal.expected, local, goal.subst)
        except UnifyError:
            return None
        node = KernelNode(LocalRef(m.group(0)), pos, m.end(), local)
        return Success(node, m.end(), subst, rank=(0,))

    def _node(self, expr: object, start: int, end: int, t: TypeExpr, subst: Substitution) -> Success:
        return Success(KernelNode(expr, start, end, t), end, subst)  # type: ignore[arg-type]

    def _primaries(self, session: ParseSession, pos: int, goal: Goal, found: List[Tuple[Success, bool]]) -> None:
        text = self.text
        limit = session.limit
        subst = goal.subst
        c = text[pos]
        if c.isdigit():
            m = _INT.match(text, pos, limit)
            if m and (m.end() >= len(text) or not (text[m.end()].isalnum() or text[m.end()] == "_")):
                found.append((self._node(IntLit(int(m.group(0))), pos, m.end(), INT, subst), True))
            return
        if c == '"':
            end = string_end(text, pos)
            if end <= limit:
                found.append((self._node(StrLit(unescape(text[pos + 1 : end - 1])), pos, end, STR, subst), True))
            return
        if c == "(":
            self._parenthesised(session, pos, goal, found)
            return
        if c == "{":
            self._braced(session, pos, goal, found)
            return
        m = _IDENT.match(text, pos, limit)
        if m is None:
            return
        word, end = m.group(0), m.end()
        if word in ("true", "false"):
            found.append((self._node(BoolLit(word == "true"), pos, end, BOOL, subst), True))
        elif word == "null":
            expected = subst.apply(goal.expected)
            t = expected if isinstance(expected, (ClassType, ParamType)) else fresh_var()
            found.append((self._node(NullLit(), pos, end, t, subst), False))
        elif word == "this":
            owner = self.env.class_decl(self.context.owner) if self.context.owner else None
            if owner is not None and not self.context.is_static:
                found.append((self._node(ThisRef(), pos, end, owner.self_type, subst), True))
        elif word == "new":
            result = self._new(session, session.skip_ws(end), pos, goal)
            if result is not None:
                found.append((result, True))
        elif word == "fun":
            result = self._closure(session, session.skip_ws(end), pos, goal)
            if result is not None:
                found.append((result, False))
        else:
            self._identifier(session, word, pos, end, goal, found)

    def _identifier(
        self, session: ParseSession, word: str, pos: int, end: int, goal: Goal, found: List[Tuple[Success, bool]]
    ) -> None:
        text = self.text
        after = session.skip_ws(end)
        if after < session.limit and text[after] == "(":
            result = self._unqualified_call(session, word, pos, after, goal)
            if result is not None:
                found.append((result, True))
            return
        local = self.locals.lookup(word)
        if local is not None:
            found.append((self._node(LocalRef(word), pos, end, local, goal.subst), True))
            return
        owner = self.env.class_decl(self.context.owner) if self.context.owner else None
        if owner is not None and not self.context.is_static:
            t = self.signatures.field_type(owner.name, word)
            if t is not None:
                found.append((self._node(FieldRef(word), pos, end, t, goal.subst), True))
                return
        if self.env.class_decl(word) is not None and after < session.limit and text[after] == ".":
            m = _IDENT.match(text, session.skip_ws(after + 1), session.limit)
            if m is not None:
                paren = session.skip_ws(m.end())
                if paren < session.limit and text[paren] == "(":
                    result = self._static_call(session, word, m.group(0), pos, paren, goal)
                    if result is not None:
                        found.append((result, True))

    def _parenthesised(self, session: ParseSession, pos: int, goal: Goal, found: List[Tuple[Success, bool]]) -> None:
        close = matching_close(self.text, pos, session.limit)
        inner_goal = Goal(goal.expected, goal.assumptions, 0, False, goal.subst)
        direct = self._parse_bounded(session, pos + 1, close, inner_goal)
        if direct is not None:
            found.append((Success(direct.node, close + 1, direct.subst), False))
        after = session.skip_ws(close + 1)
        if after < session.limit and self.text[after] == ".":
            chained = self._parse_bounded(session, pos + 1, close, Goal(ANY, goal.assumptions, 0, False, goal.subst))
            if chained is not None:
                found.append((Success(chained.node, close + 1, chained.subst), True))

    def _braced(self, session: ParseSession, pos: int, goal: Goal, found: List[Tuple[Success, bool]]) -> None:
        close = matching_close(self.text, pos, session.limit)
        expected = goal.subst.apply(goal.expected)
        if expected == VOID:
            try:
                block = self.statements.read_block(pos)
                with self.body(replace(self.context, in_operand=True), self.locals), self.nested():
                    typed, subst = self.check_block(block, goal.assumptions, goal.subst)
            except SourceError as err:
                session.complain(err.offset, err.message)
                return
            except _BodyError as err:
                session.complain(err.offset, err.message)
                return
            found.append((self._node(BlockExpr(typed), pos, close + 1, VOID, subst), False))
            return
        inner = self._parse_bounded(session, pos + 1, close, Goal(goal.expected, goal.assumptions, 0, False, goal.subst))
        if inner is not None:
            found.append((Success(inner.node, close + 1, inner.subst), False))

    def _parse_bounded(self, session: ParseSession, start: int, end: int, goal: Goal) -> Optional[Success]:
        with session.bounded(end):
            outcome = session.parse_expr(start, goal)
            if isinstance(outcome, Failure) or session.skip_ws(outcome.end) < end:
                return None
        return outcome

    def _args(
        self,
        session: ParseSession,
        open_pos: int,
        param_types: Sequence[TypeExpr],
        goal: Goal,
        subst: Substitution,
        what: str,
    ) -> Optional[Tuple[List[TypedExpr], int, Substitution]]:
        close = matching_close(self.text, open_pos, session.limit)
        parts = split_top_level(self.text, open_pos + 1, close)
        if len(parts) != len(param_types):
            session.complain(open_pos, f"{what} takes {len(param_types)} arguments, got {len(parts)}")
            return None
        args: List[TypedExpr] = []
        for (start, end), t in zip(parts, param_types):
            outcome = self._parse_bounded(session, start, end, Goal(t, goal.assumptions, 0, False, subst))
            if outcome is None:
                return None
            args.append(outcome.node)
            subst = outcome.subst
        return args, close + 1, subst

    def _instantiate(
        self, info: MethodInfo, class_mapping: Mapping[str, object]
    ) -> Tuple[Tuple[TypeExpr, ...], TypeExpr, Tuple[ClassType, ...]]:
        mapping = dict(class_mapping)
        for tp in info.type_params:
            mapping[tp.name] = fresh_var(tp.kind)
        params = tuple(substitute_params(t, mapping) for t in info.param_types)  # type: ignore[arg-type]
        result = substitute_params(info.return_type, mapping)  # type: ignore[arg-type]
        requires = tuple(substitute_params(r, mapping) for r in info.requires)  # type: ignore[arg-type]
        return params, result, requires  # type: ignore[return-value]

    def _requirements(
        self, session: ParseSession, info: MethodInfo, requires: Sequence[ClassType], pos: int, goal: Goal, subst: Substitution
    ) -> Optional[Tuple[int, ...]]:
        assumptions = tuple(subst.apply(a) for a in goal.assumptions)
        if not check_requires(requires, assumptions, subst):  # type: ignore[arg-type]
            needed = ", ".join(str(subst.apply(r)) for r in requires)
            session.complain(pos, f"{info.ref} requires {needed}")
            return None
        return required_frames(requires, assumptions, subst)  # type: ignore[arg-type]

    def _unqualified_call(self, session: ParseSession, name: str, pos: int, paren: int, goal: Goal) -> Optional[Success]:
        owner = self.env.class_decl(self.context.owner) if self.context.owner else None
        info = self.signatures.method(owner.name, name) if owner is not None else None
        if info is not None and not info.is_static and self.context.is_static:
            info = None
        if info is None:
            info = self.signatures.method(None, name)
        if info is None:
            session.expect(pos, "a known function")
            return None
        class_mapping: Dict[str, object] = {}
        if owner is not None and not info.is_static:
            class_mapping = {tp.name: ParamType(tp.name, tp.kind) for tp in owner.type_params}
        params, result, requires = self._instantiate(info, class_mapping)
        parsed = self._args(session, paren, params, goal, goal.subst, str(info.ref))
        if parsed is None:
            return None
        args, end, subst = parsed
        frames = self._requirements(session, info, requires, pos, goal, subst)
        if frames is None:
            return None
        return self._node(FunctionCall(info.ref, tuple(args), frames), pos, end, result, subst)

    def _static_call(
        self, session: ParseSession, class_name: str, name: str, pos: int, paren: int, goal: Goal
    ) -> Optional[Success]:
        info = self.signatures.method(class_name, name)
        if info is None or not info.is_static:
            session.complain(pos, f"{class_name} has no static method {name}")
            return None
        params, result, requires = self._instantiate(info, {})
        parsed = self._args(session, paren, params, goal, goal.subst, str(info.ref))
        if parsed is None:
            return None
        args, end, subst = parsed
        frames = self._requirements(session, info, requires, pos, goal, subst)
        if frames is None:
            return None
        return self._node(StaticCall(info.ref, tuple(args), frames), pos, end, result, subst)

    def _receiver_class(self, t: object) -> Optional[Tuple[str, Dict[str, object]]]:
        if isinstance(t, Primitive) and t.kind in PRIMITIVE_CLASSES:
            return PRIMITIVE_CLASSES[t.kind], {}
        if isinstance(t, ParamType) and t.bound is not None:
            t = t.bound
        if isinstance(t, ClassType):
            cls = self.env.class_decl(t.class_name)
            if cls is None:
                return None
            return cls.name, {tp.name: arg for tp, arg in zip(cls.type_params, t.args)}
        return None

    def _postfix(self, session: ParseSession, first: Success, goal: Goal) -> List[Success]:
        text = self.text
        out: List[Success] = []
        current = first
        while True:
            dot = session.skip_ws(current.end)
            if dot >= session.limit or text[dot] != ".":
                break
            m = _IDENT.match(text, session.skip_ws(dot + 1), session.limit)
            if m is None:
                break
            after = session.skip_ws(m.end())
            if after < session.limit and text[after] == "(":
                nxt = self._call_on(session, current, m.group(0), after, goal)
            else:
                nxt = self._field_on(session, current, m.group(0), m.end())
            if nxt is None:
                break
            out.append(nxt)
            current = nxt
        return out

    def _call_on(self, session: ParseSession, receiver: Success, name: str, paren: int, goal: Goal) -> Optional[Success]:
        start = receiver.node.start  # type: ignore[union-attr]
        rt = receiver.subst.apply(receiver.node.result_type)
        if isinstance(rt, TurnstileType):
            if name != "apply":
                session.complain(paren, f"a value of type {rt} only supports apply")
                return None
            parsed = self._args(session, paren, (rt.assumption,), goal, receiver.subst, "apply")
            if parsed is None:
                return None
            args, end, subst = parsed
            return self._node(ApplyTurnstile(receiver.node, args[0]), start, end, rt.result, subst)
        found = self._receiver_class(rt)
        if found is None:
            session.complain(paren, f"cannot call {name} on a value of type {rt}")
            return None
        class_name, class_mapping = found
        info = self.signatures.method(class_name, name)
        if info is None or info.is_static:
            session.complain(paren, f"{class_name} has no method {name}")
            return None
        params, result, requires = self._instantiate(info, class_mapping)
        parsed = self._args(session, paren, params, goal, receiver.subst, str(info.ref))
        if parsed is None:
            return None
        args, end, subst = parsed
        frames = self._requirements(session, info, requires, start, goal, subst)
        if frames is None:
            return None
        return self._node(MethodCall(receiver.node, info.ref, tuple(args), frames), start, end, result, subst)

    def _field_on(self, session: ParseSession, receiver: Success, name: str, end: int) -> Optional[Success]:
        owner = self.env.class_decl(self.context.owner) if self.context.owner else None
        rt = receiver.subst.apply(receiver.node.result_type)
        if owner is None or not isinstance(rt, ClassType) or rt.class_name != owner.name:
            return None
        t = self.signatures.field_type(owner.name, name)
        if t is None:
            return None
        mapping = {tp.name: arg for tp, arg in zip(owner.type_params, rt.args)}
        t = substitute_params(t, mapping)  # type: ignore[assignment]
        start = receiver.node.start  # type: ignore[union-attr]
        expr = FieldRef(name) if isinstance(receiver.node, KernelNode) and isinstance(receiver.node.expr, ThisRef) else FieldAccess(receiver.node, name)
        return self._node(expr, start, end, t, receiver.subst)

    def _new(self, session: ParseSession, pos: int, start: int, goal: Goal) -> Optional[Success]:
        text = self.text
        m = _IDENT.match(text, pos, session.limit)
        if m is None:
            return None
        cls = self.env.class_decl(m.group(0))
        if cls is None:
            session.complain(pos, f"unknown class {m.group(0)}")
            return None
        after = session.skip_ws(m.end())
        type_args: Tuple[object, ...]
        if after < session.limit and text.startswith("<>", after):
            type_args = tuple(fresh_var(tp.kind) for tp in cls.type_params)
            after = session.skip_ws(after + 2)
        elif after < session.limit and text[after] == "<":
            scanned = scan_type(text, pos, session.limit)
            if scanned is None:
                return None
            try:
                resolved = self.resolve(scanned[0])
            except TypeResolutionError as err:
                session.complain(pos, str(err))
                return None
            type_args = resolved.args if isinstance(resolved, ClassType) else ()
            after = session.skip_ws(scanned[1])
        else:
            type_args = tuple(fresh_var(tp.kind) for tp in cls.type_params)
        if after >= session.limit or text[after] != "(":
            return None
        mapping = {tp.name: arg for tp, arg in zip(cls.type_params, type_args)}
        arity = len(split_top_level(text, after + 1, matching_close(text, after, session.limit)))
        info = self.signatures.constructor(cls.name, arity)
        if info is None and (cls.constructors or arity):
            session.complain(pos, f"{cls.name} has no constructor taking {arity} arguments")
            return None
        params: Tuple[TypeExpr, ...] = ()
        if info is not None:
            params = tuple(substitute_params(t, mapping) for t in info.param_types)  # type: ignore[misc]
        parsed = self._args(session, after, params, goal, goal.subst, f"new {cls.name}")
        if parsed is None:
            return None
        args, end, subst = parsed
        result = ClassType(QName((cls.name,)), tuple(type_args))  # type: ignore[arg-type]
        return self._node(New(cls.name, tuple(type_args), tuple(args), cls.is_native), start, end, result, subst)  # type: ignore

    def _closure(self, session: ParseSession, pos: int, start: int, goal: Goal) -> Optional[Success]:
        """``fun (T x) -> e`` or ``fun (T x) { ... }``: a ``Function<T, R>``."""
        text = self.text
        if pos >= session.limit or text[pos] != "(":
            return None
        close = matching_close(text, pos, session.limit)
        head = session.skip_ws(pos + 1)
        scanned = scan_type(text, head, close)
        name = _IDENT.match(text, session.skip_ws(scanned[1]), close) if scanned else None
        if scanned is None or name is None or session.skip_ws(name.end()) != close:
            session.complain(pos, "expected a closure parameter 'Type name'")
            return None
        try:
            param_type = self.resolve(scanned[0])
        except TypeResolutionError as err:
            session.complain(head, str(err))
            return None
        expected = goal.subst.apply(goal.expected)
        if isinstance(expected, ClassType) and expected.class_name == "Function" and len(expected.args) == 2:
            result_type = expected.args[1]
        else:
            result_type = fresh_var()
        param = Param(name.group(0), param_type)
        body_pos = session.skip_ws(close + 1)
        saved = self.locals
        self.locals = self.locals.bind(param.name, param_type)
        try:
            if text.startswith("->", body_pos):
                outcome = session.parse_expr(body_pos + 2, Goal(result_type, goal.assumptions, 0, False, goal.subst))  # type: ignore
                if isinstance(outcome, Failure):
                    return None
                body: object = outcome.node
                end, subst = outcome.end, outcome.subst
            elif body_pos < session.limit and text[body_pos] == "{":
                block = self.statements.read_block(body_pos)
                context = BodyContext(self.context.owner, self.context.is_static, result_type, self.context.type_params)  # type: ignore
                with self.body(context, self.locals), self.nested():
                    body, subst = self.check_block(block, goal.assumptions, goal.subst)
                end = block.span.end
            else:
                session.expect(body_pos, '"->" or "{"')
                return None
        except _BodyError as err:
            session.complain(err.offset, err.message)
            return None
        finally:
            self.locals = saved
        result = class_type("Function", param_type, result_type)
        return self._node(ClosureLit(param, body), start, end, result, subst)  # type: ignore[arg-type]

    # -- declarations -----------------------------------------------------------
    def check_body(
        self,
        body: Optional[Block],
        context: BodyContext,
        params: Sequence[Tuple[str, TypeExpr]],
        diagnostics: DiagnosticList,
        requires: Sequence[ClassType] = (),
    ) -> Optional[Block]:
        """Check one member body; problems are added to ``diagnostics``.

        The classes a member requires are the assumption frames of its body, in declaration order.
        """
        if body is None:
            return None
        locals_ = EMPTY_SCOPE
        for name, t in params:
            locals_ = locals_.bind(name, t)
        with self.body(context, locals_):
            try:
                typed, subst = self.check_block(body, tuple(requires), EMPTY_SUBST)
            except _BodyError as err:
                diagnostics.add(self.origin, err.offset, err.message)
                return None
            except SourceError as err:
                diagnostics.add(self.origin, err.offset, err.message)
                return None
        return apply_subst(typed, subst)  # type: ignore[return-value]

    def check_class(self, decl: ClassDecl, diagnostics: DiagnosticList) -> TypedClass:
        """Check every body of a class at its definition site."""
        typed = TypedClass(decl)
        class_params = self.env.params_in_scope(decl.type_params)
        for i, op in enumerate(decl.operators):
            try:
                info = resolve_operator(self.env, decl, i)
            except TypeResolutionError as err:
                diagnostics.add(self.origin, op.offset, str(err))
                continue
            for name in (info.priority, *info.slot_priorities):
                if name is not None and not _declared_priority(self.env, name):
                    diagnostics.add(self.origin, op.offset, f"unknown operator priority {name}")
            params = [(p.name, _value_param_type(p, t)) for p, t in zip(op.params, info.param_types)]
            context = BodyContext(decl.name, op.is_static, info.return_type, op.type_params)
            typed.operators[i] = self.check_body(op.body, context, params, diagnostics, info.requires)
        for method in decl.methods:
            info = self.signatures.method(decl.name, method.name)
            if info is None:
                diagnostics.add(self.origin, method.offset, f"cannot resolve the signature of {decl.name}.{method.name}")
                continue
            params = list(zip(info.param_names, info.param_types))
            context = BodyContext(decl.name, method.is_static, info.return_type, method.type_params)
            typed.methods[method.name] = self.check_body(method.body, context, params, diagnostics, info.requires)
        for i, ctor in enumerate(decl.constructors):
            try:
                param_types = [self.env.resolve(p.type, class_params) for p in ctor.params]
            except TypeResolutionError as err:
                diagnostics.add(self.origin, ctor.offset, str(err))
                continue
            context = BodyContext(decl.name, False, VOID)
            params = [(p.name, t) for p, t in zip(ctor.params, param_types)]
            typed.constructors[i] = self.check_body(ctor.body, context, params, diagnostics)
        for fld in decl.fields:
            try:
                self.env.resolve(fld.type, class_params)
            except TypeResolutionError as err:
                diagnostics.add(self.origin, fld.offset, str(err))
        return typed

    def check_function(self, decl: MethodDecl, diagnostics: DiagnosticList) -> Optional[Block]:
        info = self.signatures.method(None, decl.name)
        if info is None:
            diagnostics.add(self.origin, decl.offset, f"cannot resolve the signature of {decl.name}")
            return None
        context = BodyContext(None, True, info.return_type, decl.type_params)
        params = list(zip(info.param_names, info.param_types))
        return self.check_body(decl.body, context, params, diagnostics, info.requires)

    def check_main(self, main: Block, diagnostics: DiagnosticList) -> Optional[Block]:
        return self.check_body(main, BodyContext(None, True, VOID), (), diagnostics)


def _declared_priority(env: TypeEnv, name: QName) -> bool:
    owner = env.class_decl(name.segments[0]) if len(name.segments) == 2 else None
    return owner is not None and owner.priorities is not None and name.last in owner.priorities.names


def _value_param_type(param: Param, resolved: TypeExpr) -> TypeExpr:
    """Type of an operator parameter inside the body: a variadic parameter is a list."""
    return class_type("List", resolved) if param.variadic else resolved


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------
def priority_order(linked: LinkedProgram, origin: str) -> PriorityOrder:
    """Merged priorities seen from one file: its imported DSLs in import order plus its import constraints.

    Classes that are only referenced, or whose operators are in effect without an import, add nothing.
    """
    dsl_priorities = []
    for name in linked.file_imports.get(origin, (PREDEF,)):
        cls = linked.classes.get(name)
        if cls is not None and cls.is_dsl and cls.priorities is not None:
            dsl_priorities.append((cls.name, cls.priorities))
    return merge(dsl_priorities, linked.file_constraints.get(origin, ()))


def file_scope(linked: LinkedProgram, signatures: SignatureTable, origin: str) -> OperatorScope:
    return OperatorScope(signatures, linked.file_imports.get(origin, (PREDEF,)), tuple(linked.classes))


def check_program(linked: LinkedProgram, trace: bool = False) -> CheckedProgram:
    """Check every class, function and the main block of a linked program.

    Raises:
        CtxTypeError: with one diagnostic per ill-typed body
        PriorityCycleError: if the priorities seen by some file are cyclic
    """
    signatures = SignatureTable(TypeEnv(linked.classes), linked.program.functions)
    diagnostics = DiagnosticList()
    elaborators: Dict[str, Elaborator] = {}

    def new_elaborator(origin: str) -> Elaborator:
        source = linked.files[origin].source if origin in linked.files else linked.program.source
        return Elaborator(
            source,
            origin,
            signatures,
            file_scope(linked, signatures, origin),
            priority_order(linked, origin),
            trace,
        )

    def elaborator(origin: str) -> Elaborator:
        if origin not in elaborators:
            elaborators[origin] = new_elaborator(origin)
        return elaborators[origin]

    classes: Dict[str, TypedClass] = {}
    for name, decl in linked.classes.items():
        if decl.is_native:
            classes[name] = TypedClass(decl)
            continue
        try:
            origin_checker = elaborator(linked.class_origins[name])
        except CtxValueError as err:
            diagnostics.add(linked.class_origins[name], decl.offset, str(err))
            continue
        classes[name] = origin_checker.check_class(decl, diagnostics)
    logger.debug(f"checked {len(classes)} classes")

    program = linked.program
    # its own session: the statistics cover the main unit only
    try:
        main_checker = new_elaborator(program.origin)
    except CtxValueError as err:
        diagnostics.add(program.origin, 0, str(err))
        raise CtxTypeError(diagnostics)
    functions = {fn.name: main_checker.check_function(fn, diagnostics) for fn in program.functions}
    main = main_checker.check_main(program.main, diagnostics) if program.main is not None else None
    if diagnostics.has_errors:
        raise CtxTypeError(diagnostics)
    return CheckedProgram(linked, classes, functions, main, signatures, main_checker.session.stats())
