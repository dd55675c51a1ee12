"""Reading ctxlang source files.

Declarations follow a fixed grammar (``declarations.lark``); the loader cuts every header out of
the file with a bracket- and string-aware scanner and hands it to lark. Statements are read by
hand. Every expression position is kept as a ``RawExprSpan``: its grammar depends on the imported
DSLs and is only known to the parse engine.
"""

import functools
import re
from dataclasses import (
    dataclass,
    field,
)
from importlib import resources
from pathlib import Path
from typing import (
    Dict,
    Iterable,
    Iterator,
    List,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

from lark import (
    Lark,
    Token,
    Transformer,
    v_args,
)
from lark.exceptions import (
    LarkError,
    VisitError,
)

from .exceptions import (
    CtxLinkError,
    CtxSyntaxError,
    DiagnosticList,
)
from .logger import logger
from .syntax import (
    Assign,
    Block,
    ClassDecl,
    ClassType,
    ConstructorDecl,
    ExprStmt,
    FieldDecl,
    FieldTarget,
    ForEach,
    If,
    ImportDecl,
    LocalDecl,
    MethodDecl,
    NameOperand,
    NamePart,
    Operand,
    OperatorDecl,
    Param,
    ParamKind,
    PriorityDecl,
    Program,
    QName,
    RawExprSpan,
    Repetition,
    Return,
    SpanContext,
    TryFinally,
    TurnstileType,
    TypeExpr,
    TypeParam,
    VarTarget,
    While,
    render_operator,
    render_params,
    render_type,
)


PRELUDE_FILES = ("Builtins.ctx", "Predef.ctx")
PREDEF = "Predef"

_GRAMMAR_PATH = Path(__file__).with_name("declarations.lark")
_START_RULES = ["import_decl", "priorities_decl", "class_header", "member_header", "field_decl", "type_expr"]

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_ASSIGN = re.compile(r"(?:(this)\s*\.\s*)?([A-Za-z_][A-Za-z0-9_]*)(?:\s*\.\s*([A-Za-z_][A-Za-z0-9_]*))?\s*=(?!=)")
_STATEMENT_KEYWORDS = frozenset({"if", "else", "while", "for", "return", "try", "finally", "new", "fun", "this"})

_OPENERS = {"(": ")", "[": "]", "{": "}"}
_CLOSERS = frozenset(_OPENERS.values())


class SourceError(Exception):
    """A structural error (unbalanced bracket, unterminated string) at a source offset."""

    def __init__(self, offset: int, message: str) -> None:
        super().__init__(message)
        self.offset = offset
        self.message = message


# ---------------------------------------------------------------------------
# Lexical scanning
# ---------------------------------------------------------------------------
def skip_trivia(text: str, pos: int, limit: Optional[int] = None) -> int:
    """Skip whitespace and comments."""
    limit = len(text) if limit is None else limit
    while pos < limit:
        c = text[pos]
        if c in " \t\r\n":
            pos += 1
        elif text.startswith("//", pos):
            newline = text.find("\n", pos)
            pos = limit if newline < 0 else newline
        elif text.startswith("/*", pos):
            end = text.find("*/", pos + 2)
            pos = limit if end < 0 else end + 2
        else:
            break
    return min(pos, limit)


def string_end(text: str, pos: int) -> int:
    """Offset just past the string literal opening at ``pos``."""
    i = pos + 1
    while i < len(text):
        c = text[i]
        if c == "\\":
            i += 2
        elif c == '"':
            return i + 1
        elif c == "\n":
            break
        else:
            i += 1
    raise SourceError(pos, "unterminated string literal")


def _skip_atom(text: str, i: int) -> int:
    """Advance over one character, string literal or comment."""
    c = text[i]
    if c == '"':
        return string_end(text, i)
    if text.startswith("//", i) or text.startswith("/*", i):
        return max(skip_trivia(text, i), i + 1)
    return i + 1


def matching_close(text: str, pos: int, limit: Optional[int] = None) -> int:
    """Offset of the bracket closing the one at ``pos``.

    Raises:
        SourceError: at the innermost unclosed opening bracket
    """
    limit = len(text) if limit is None else limit
    openers = [pos]
    i = pos + 1
    while i < limit:
        c = text[i]
        if c in _OPENERS:
            openers.append(i)
            i += 1
        elif c in _CLOSERS:
            if c != _OPENERS[text[openers[-1]]]:
                raise SourceError(openers[-1], f"unbalanced '{text[openers[-1]]}'")
            openers.pop()
            if not openers:
                return i
            i += 1
        else:
            i = _skip_atom(text, i)
    raise SourceError(openers[-1], f"unbalanced '{text[openers[-1]]}'")


def find_top_level(text: str, pos: int, limit: int, stops: str) -> int:
    """First offset in ``[pos, limit)`` holding one of ``stops`` outside brackets; ``limit`` if none."""
    i = pos
    while i < limit:
        c = text[i]
        if c in stops:
            return i
        if c in _OPENERS:
            i = matching_close(text, i, limit) + 1
        elif c in _CLOSERS:
            raise SourceError(i, f"unbalanced '{c}'")
        else:
            i = _skip_atom(text, i)
    return limit


def split_top_level(text: str, start: int, end: int, sep: str = ",") -> List[Tuple[int, int]]:
    """Split ``[start, end)`` at top-level separators. An empty region yields no parts."""
    if skip_trivia(text, start, end) >= end:
        return []
    parts = []
    pos = start
    while True:
        stop = find_top_level(text, pos, end, sep)
        parts.append((pos, stop))
        if stop >= end:
            return parts
        pos = stop + 1


def match_word(text: str, pos: int, word: str) -> Optional[int]:
    """End of ``word`` at ``pos`` when it stands as a whole identifier."""
    if not text.startswith(word, pos):
        return None
    end = pos + len(word)
    if end < len(text) and (text[end].isalnum() or text[end] == "_"):
        return None
    return end


def unescape(body: str) -> str:
    """Decode the escapes of a string literal body."""
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            out.append({"n": "\n", "t": "\t", "r": "\r", "0": "\0"}.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# Declaration grammar
# ---------------------------------------------------------------------------
@functools.lru_cache(maxsize=1)
def _declaration_parser() -> Lark:
    return Lark(
        _GRAMMAR_PATH.read_text(encoding="utf-8"),
        start=_START_RULES,
        parser="earley",
        ambiguity="resolve",
    )


@dataclass(frozen=True)
class _Priority:
    name: QName


@dataclass(frozen=True)
class _Member:
    kind: str
    name: str = ""
    return_type: Optional[TypeExpr] = None
    priority: Optional[QName] = None
    syntax: tuple = ()
    params: Tuple[Param, ...] = ()
    requires: Tuple[ClassType, ...] = ()


@dataclass(frozen=True)
class _MemberHeader:
    modifiers: Tuple[str, ...]
    type_params: Tuple[TypeParam, ...]
    member: _Member


@dataclass(frozen=True)
class _FieldHeader:
    modifiers: Tuple[str, ...]
    type: TypeExpr
    name: str


@dataclass(frozen=True)
class _ClassHeader:
    is_native: bool
    is_dsl: bool
    name: str
    type_params: Tuple[TypeParam, ...]


@v_args(inline=True)
class _DeclarationBuilder(Transformer):
    """Builds syntax-model values from declaration parse trees."""

    def qname(self, *names: Token) -> QName:
        return QName(tuple(str(n) for n in names))

    def type_args(self, *args: TypeExpr) -> tuple:
        return tuple(args)

    def type_expr(self, name: QName, args: tuple = ()) -> ClassType:
        return ClassType(name, args)

    def plain_type_param(self, name: Token) -> TypeParam:
        return TypeParam(str(name))

    def bounded_type_param(self, name: Token, bound: ClassType) -> TypeParam:
        return TypeParam(str(name), ParamKind.TYPE, bound=bound)

    def name_type_param(self, name: Token, name_type: QName) -> TypeParam:
        return TypeParam(str(name), ParamKind.NAME, name_type=name_type)

    def type_params(self, *params: TypeParam) -> tuple:
        return tuple(params)

    def plain_param(self, type_: ClassType, name: Token) -> Param:
        return Param(str(name), type_)

    def variadic_param(self, type_: ClassType, name: Token) -> Param:
        return Param(str(name), type_, variadic=True)

    def turnstile_param(self, assumption: ClassType, _turnstile: Token, result: ClassType, name: Token) -> Param:
        return Param(str(name), TurnstileType(assumption, result))

    def params(self, *params: Optional[Param]) -> tuple:
        return tuple(p for p in params if p is not None)

    def name_part(self, token: Token) -> NamePart:
        return NamePart(unescape(str(token)[1:-1]))

    def operand_priority(self, name: QName) -> QName:
        return name

    def operand(self, *items: Union[Token, QName]) -> Operand:
        repetition = Repetition.ONE
        priority = None
        for item in items:
            if isinstance(item, QName):
                priority = item
            else:
                repetition = Repetition(str(item))
        return Operand(priority, repetition)

    def name_operand(self, name: Token) -> NameOperand:
        return NameOperand(str(name))

    def priority(self, name: QName) -> _Priority:
        return _Priority(name)

    def requires_clause(self, *types: ClassType) -> tuple:
        return ("requires", tuple(types))

    def throws_clause(self, *names: QName) -> tuple:
        return ("throws", tuple(names))

    def clauses(self, *items: tuple) -> dict:
        return dict(items)

    def modifier(self, token: Token) -> str:
        return str(token)

    def constructor(self, name: Token, params: tuple, clauses: dict) -> _Member:
        return _Member("constructor", name=str(name), params=params)

    def typed_member(self, return_type: ClassType, *items: object) -> _Member:
        priority = None
        syntax = []
        params: tuple = ()
        clauses: dict = {}
        for item in items:
            if isinstance(item, _Priority):
                priority = item.name
            elif isinstance(item, (NamePart, Operand, NameOperand)):
                syntax.append(item)
            elif isinstance(item, tuple):
                params = item
            elif isinstance(item, dict):
                clauses = item
        return _Member(
            "typed",
            return_type=return_type,
            priority=priority,
            syntax=tuple(syntax),
            params=params,
            requires=clauses.get("requires", ()),
        )

    def member_header(self, *items: object) -> _MemberHeader:
        modifiers = tuple(item for item in items if isinstance(item, str))
        type_params: tuple = next((item for item in items if isinstance(item, tuple)), ())
        member = next(item for item in items if isinstance(item, _Member))
        return _MemberHeader(modifiers, type_params, member)

    def field_decl(self, *items: object) -> _FieldHeader:
        *modifiers, type_, name = items
        return _FieldHeader(tuple(str(m) for m in modifiers), type_, str(name))  # type: ignore[arg-type]

    def native(self) -> str:
        return "native"

    def class_kind(self, token: Token) -> str:
        return str(token)

    def class_header(self, *items: object) -> _ClassHeader:
        name = next(item for item in items if isinstance(item, Token))
        words = [item for item in items if isinstance(item, str) and not isinstance(item, Token)]
        type_params: tuple = next((item for item in items if isinstance(item, tuple)), ())
        return _ClassHeader("native" in words, "dsl" in words, str(name), type_params)

    def chain(self, *names: QName) -> tuple:
        return tuple(zip(names, names[1:]))

    def constraint_block(self, *chains: Optional[tuple]) -> tuple:
        return tuple(pair for chain in chains if chain is not None for pair in chain)

    def priorities_decl(self, *items: object) -> PriorityDecl:
        names = tuple(str(item) for item in items if isinstance(item, Token))
        constraints = items[-1] if isinstance(items[-1], tuple) else ()
        return PriorityDecl(names, constraints)  # type: ignore[arg-type]

    def import_decl(self, name: QName, constraints: tuple = ()) -> ImportDecl:
        return ImportDecl(name, constraints)


def parse_declaration(text: str, start: str) -> object:
    """Parse one declaration fragment with the given start rule.

    Raises:
        LarkError: if the fragment does not follow the declaration grammar
    """
    tree = _declaration_parser().parse(text, start=start)
    try:
        return _DeclarationBuilder().transform(tree)
    except VisitError as err:
        raise err.orig_exc


def parse_type(text: str) -> Optional[ClassType]:
    """Parse a written type such as ``Map<String, List<T>>``; None when it is not one."""
    try:
        result = parse_declaration(text, "type_expr")
    except (LarkError, ValueError):
        return None
    return result if isinstance(result, ClassType) else None


def scan_type(text: str, pos: int, limit: int) -> Optional[Tuple[ClassType, int]]:
    """Read a written type starting at ``pos``; returns it with its end offset."""
    m = _IDENT.match(text, pos)
    if m is None or m.end() > limit:
        return None
    end = m.end()
    while end < limit and text[end] == "." and _IDENT.match(text, end + 1):
        end = _IDENT.match(text, end + 1).end()  # type: ignore[union-attr]
    after = skip_trivia(text, end, limit)
    if after < limit and text[after] == "<":
        depth = 0
        i = after
        while i < limit:
            c = text[i]
            if c == "<":
                depth += 1
            elif c == ">":
                depth -= 1
                if depth == 0:
                    end = i + 1
                    break
            elif not (c.isalnum() or c in "_., \t\r\n"):
                return None
            i += 1
        else:
            return None
    type_ = parse_type(text[pos:end])
    return (type_, end) if type_ is not None else None


# ---------------------------------------------------------------------------
# Statements
# ---------------------------------------------------------------------------
class StatementReader:
    """Reads kernel statements, leaving every expression as a raw span."""

    def __init__(self, text: str) -> None:
        self.text = text

    def span(self, start: int, end: int, context: SpanContext) -> RawExprSpan:
        end = self._trim(start, end)
        start = skip_trivia(self.text, start, end)
        return RawExprSpan(start, end, context, self.text)

    def _trim(self, start: int, end: int) -> int:
        while end > start and self.text[end - 1] in " \t\r\n":
            end -= 1
        return end

    def read_block(self, open_pos: int) -> Block:
        """Read the block whose ``{`` is at ``open_pos``."""
        close = matching_close(self.text, open_pos)
        stmts = self.read_statements(open_pos + 1, close)
        return Block(tuple(stmts), RawExprSpan(open_pos, close + 1, SpanContext.STATEMENT, self.text))

    def read_statements(self, start: int, end: int) -> list:
        stmts = []
        pos = skip_trivia(self.text, start, end)
        while pos < end:
            if self.text[pos] == ";":
                pos = skip_trivia(self.text, pos + 1, end)
                continue
            stmt, pos = self.read_statement(pos, end)
            stmts.append(stmt)
            pos = skip_trivia(self.text, pos, end)
        return stmts

    def _keyword(self, pos: int, word: str, followed_by: str = "") -> Optional[int]:
        end = match_word(self.text, pos, word)
        if end is None:
            return None
        if followed_by:
            nxt = skip_trivia(self.text, end)
            if not self.text.startswith(followed_by, nxt):
                return None
            return nxt
        return end

    def _statement_end(self, pos: int, end: int) -> Tuple[int, int]:
        """End of a simple statement and the offset after its terminator."""
        stop = find_top_level(self.text, pos, end, ";")
        return stop, (stop + 1 if stop < end else stop)

    def read_statement(self, pos: int, end: int) -> Tuple[object, int]:
        text = self.text
        if text[pos] == "{":
            close = matching_close(text, pos, end)
            return self.read_block(pos), close + 1

        paren = self._keyword(pos, "if", "(")
        if paren is not None:
            close = matching_close(text, paren, end)
            cond = self.span(paren + 1, close, SpanContext.CONDITION)
            then, nxt = self.read_statement(skip_trivia(text, close + 1, end), end)
            orelse = None
            after = skip_trivia(text, nxt, end)
            else_end = match_word(text, after, "else") if after < end else None
            if else_end is not None:
                orelse, nxt = self.read_statement(skip_trivia(text, else_end, end), end)
            return If(cond, then, orelse, RawExprSpan(pos, nxt, SpanContext.STATEMENT, text)), nxt  # type: ignore

        paren = self._keyword(pos, "while", "(")
        if paren is not None:
            close = matching_close(text, paren, end)
            cond = self.span(paren + 1, close, SpanContext.CONDITION)
            body, nxt = self.read_statement(skip_trivia(text, close + 1, end), end)
            return While(cond, body, RawExprSpan(pos, nxt, SpanContext.STATEMENT, text)), nxt  # type: ignore

        paren = self._keyword(pos, "for", "(")
        if paren is not None:
            close = matching_close(text, paren, end)
            colon = find_top_level(text, paren + 1, close, ":")
            head_start = skip_trivia(text, paren + 1, close)
            scanned = scan_type(text, head_start, colon)
            var = _IDENT.match(text, skip_trivia(text, scanned[1], colon)) if scanned else None
            if colon >= close or scanned is None or var is None:
                raise SourceError(paren, "malformed for statement; expected 'for (Type name : expression)'")
            iterable = self.span(colon + 1, close, SpanContext.CONDITION)
            body, nxt = self.read_statement(skip_trivia(text, close + 1, end), end)
            stmt = ForEach(var.group(0), scanned[0], iterable, body, RawExprSpan(pos, nxt, SpanContext.STATEMENT, text))
            return stmt, nxt  # type: ignore[arg-type]

        brace = self._keyword(pos, "try", "{")
        if brace is not None:
            body = self.read_block(brace)
            after = skip_trivia(text, body.span.end, end)
            finally_end = match_word(text, after, "finally")
            brace2 = skip_trivia(text, finally_end, end) if finally_end is not None else end
            if finally_end is None or brace2 >= end or text[brace2] != "{":
                raise SourceError(pos, "try block without finally")
            finalizer = self.read_block(brace2)
            nxt = finalizer.span.end
            return TryFinally(body, finalizer, RawExprSpan(pos, nxt, SpanContext.STATEMENT, text)), nxt

        value_start = self._keyword(pos, "return")
        if value_start is not None:
            stop, nxt = self._statement_end(value_start, end)
            value = None
            if skip_trivia(text, value_start, stop) < stop:
                value = self.span(value_start, stop, SpanContext.RETURN)
            return Return(value, RawExprSpan(pos, stop, SpanContext.STATEMENT, text)), nxt

        stop, nxt = self._statement_end(pos, end)
        return self._simple_statement(pos, self._trim(pos, stop)), nxt

    def _simple_statement(self, pos: int, stop: int) -> object:
        text = self.text
        whole = RawExprSpan(pos, stop, SpanContext.STATEMENT, text)
        scanned = scan_type(text, pos, stop)
        if scanned is not None and text[pos : scanned[1]].split(".")[0] not in _STATEMENT_KEYWORDS:
            type_, type_end = scanned
            name_pos = skip_trivia(text, type_end, stop)
            m = _IDENT.match(text, name_pos, stop)
            if m is not None and name_pos > type_end and m.group(0) not in _STATEMENT_KEYWORDS:
                after = skip_trivia(text, m.end(), stop)
                if after >= stop:
                    return LocalDecl(m.group(0), type_, None, whole)
                if text[after] == "=" and not text.startswith("==", after):
                    init = self.span(after + 1, stop, SpanContext.LOCAL_INIT)
                    return LocalDecl(m.group(0), type_, init, whole)
        m = _ASSIGN.match(text, pos, stop)
        if m is not None:
            this_kw, first, second = m.groups()
            target: Union[VarTarget, FieldTarget]
            if this_kw and not second:
                target = FieldTarget(first)
            elif second:
                target = FieldTarget(second, receiver=first)
            else:
                target = VarTarget(first)
            return Assign(target, self.span(m.end(), stop, SpanContext.ASSIGN), whole)
        return ExprStmt(self.span(pos, stop, SpanContext.STATEMENT), whole)


def read_block(source: str, open_pos: int, origin: str = "<string>") -> Block:
    """Read a ``{ statements }`` block of ``source``.

    Raises:
        CtxSyntaxError: on unbalanced brackets or malformed statements
    """
    try:
        return StatementReader(source).read_block(open_pos)
    except SourceError as err:
        diagnostics = DiagnosticList()
        diagnostics.add(origin, err.offset, err.message)
        raise CtxSyntaxError(diagnostics, log_level="debug")


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------
class _ProgramReader:
    def __init__(self, text: str, origin: str) -> None:
        self.text = text
        self.origin = origin
        self.diagnostics = DiagnosticList()
        self.statements = StatementReader(text)

    def error(self, offset: int, message: str) -> None:
        self.diagnostics.add(self.origin, offset, message)

    def fragment(self, start: int, end: int, rule: str) -> Optional[object]:
        try:
            return parse_declaration(self.text[start:end], rule)
        except LarkError as err:
            where = getattr(err, "pos_in_stream", None)
            offset = start + where if isinstance(where, int) and where >= 0 else start
            self.error(offset, f"syntax error in declaration: {str(err).splitlines()[0]}")
        except ValueError as err:
            self.error(start, str(err))
        return None

    def read(self) -> Program:
        imports: List[ImportDecl] = []
        classes: List[ClassDecl] = []
        functions: List[MethodDecl] = []
        main = None
        text = self.text
        pos = skip_trivia(text, 0)
        try:
            while pos < len(text):
                if match_word(text, pos, "import") is not None:
                    stop = find_top_level(text, pos, len(text), ";")
                    decl = self.fragment(pos, min(stop + 1, len(text)), "import_decl")
                    if isinstance(decl, ImportDecl):
                        imports.append(ImportDecl(decl.dsl, decl.constraints, pos))
                    pos = stop + 1
                elif match_word(text, pos, "main") is not None:
                    brace = skip_trivia(text, pos + 4)
                    if brace >= len(text) or text[brace] != "{":
                        self.error(pos, "expected '{' after main")
                        break
                    if main is not None:
                        self.error(pos, "duplicate main block")
                    main = self.statements.read_block(brace)
                    pos = main.span.end
                elif any(match_word(text, pos, w) is not None for w in ("dsl", "class", "native")):
                    brace = find_top_level(text, pos, len(text), "{;")
                    if brace >= len(text) or text[brace] != "{":
                        self.error(pos, "expected class body")
                        break
                    close = matching_close(text, brace)
                    header = self.fragment(pos, brace, "class_header")
                    if isinstance(header, _ClassHeader):
                        classes.append(self.read_class(header, pos, brace + 1, close))
                    pos = close + 1
                else:
                    member, pos = self.read_member(pos, len(text), None)
                    if isinstance(member, MethodDecl):
                        functions.append(
                            MethodDecl(
                                member.name,
                                member.params,
                                member.return_type,
                                member.type_params,
                                True,
                                member.requires,
                                member.body,
                                member.is_native,
                                member.offset,
                            )
                        )
                    elif member is not None:
                        self.error(getattr(member, "offset", pos), "only functions may be declared at top level")
                pos = skip_trivia(text, pos)
        except SourceError as err:
            self.error(err.offset, err.message)
        if self.diagnostics.has_errors:
            raise CtxSyntaxError(self.diagnostics)
        return Program(tuple(imports), tuple(classes), tuple(functions), main, self.origin, text)

    def read_class(self, header: _ClassHeader, offset: int, start: int, end: int) -> ClassDecl:
        text = self.text
        priorities: Optional[PriorityDecl] = None
        operators: List[OperatorDecl] = []
        methods: List[MethodDecl] = []
        constructors: List[ConstructorDecl] = []
        fields: List[FieldDecl] = []
        pos = skip_trivia(text, start, end)
        while pos < end:
            if match_word(text, pos, "priorities") is not None:
                brace = find_top_level(text, pos, end, "{")
                close = matching_close(text, brace, end) if brace < end else end - 1
                decl = self.fragment(pos, close + 1, "priorities_decl")
                if isinstance(decl, PriorityDecl):
                    if priorities is not None:
                        self.error(pos, f"duplicate priorities declaration in {header.name}")
                    if len(set(decl.names)) != len(decl.names):
                        self.error(pos, "priority names must be unique")
                    priorities = decl
                pos = close + 1
            else:
                member, pos = self.read_member(pos, end, header)
                if isinstance(member, OperatorDecl):
                    if not header.is_dsl:
                        self.error(member.offset, f"operators may only be declared in a dsl class, not in {header.name}")
                    operators.append(member)
                elif isinstance(member, MethodDecl):
                    methods.append(member)
                elif isinstance(member, ConstructorDecl):
                    constructors.append(member)
                elif isinstance(member, FieldDecl):
                    fields.append(member)
            pos = skip_trivia(text, pos, end)
        return ClassDecl(
            name=header.name,
            is_dsl=header.is_dsl,
            is_native=header.is_native,
            type_params=header.type_params,
            priorities=priorities,
            operators=tuple(operators),
            methods=tuple(methods),
            constructors=tuple(constructors),
            fields=tuple(fields),
            origin=self.origin,
            offset=offset,
        )

    def read_member(self, pos: int, end: int, owner: Optional[_ClassHeader]) -> Tuple[Optional[object], int]:
        text = self.text
        stop = find_top_level(text, pos, end, "{;")
        if stop >= end:
            self.error(pos, "expected '{' or ';' after member declaration")
            return None, end
        header_text = text[pos:stop]
        body = None
        nxt = stop + 1
        if text[stop] == "{":
            body = self.statements.read_block(stop)
            nxt = body.span.end
        elif "(" not in re.sub(r'"(?:[^"\\]|\\.)*"', "", header_text):
            field = self.fragment(pos, stop + 1, "field_decl")
            if isinstance(field, _FieldHeader):
                return FieldDecl(field.name, field.type, "private" in field.modifiers, pos), nxt
            return None, nxt
        header = self.fragment(pos, stop, "member_header")
        if not isinstance(header, _MemberHeader):
            return None, nxt
        return self.build_member(header, body, owner, pos), nxt

    def build_member(
        self, header: _MemberHeader, body: Optional[Block], owner: Optional[_ClassHeader], offset: int
    ) -> Optional[object]:
        member = header.member
        modifiers = set(header.modifiers)
        is_native = "native" in modifiers or body is None or bool(owner and owner.is_native)
        if member.kind == "constructor":
            if owner is None or member.name != owner.name:
                self.error(offset, f"constructor {member.name} does not match its class")
                return None
            return ConstructorDecl(member.params, body, is_native, offset)

        name_params = {
            tp.name for tp in header.type_params + (owner.type_params if owner else ()) if tp.kind is ParamKind.NAME
        }
        syntax = member.syntax
        is_method = (
            len(syntax) == 1
            and isinstance(syntax[0], NameOperand)
            and syntax[0].param not in name_params
            and member.priority is None
            and "literal" not in modifiers
        )
        if is_method:
            return MethodDecl(
                name=syntax[0].param,
                params=member.params,
                return_type=member.return_type,  # type: ignore[arg-type]
                type_params=header.type_params,
                is_static="static" in modifiers,
                requires=member.requires,
                body=body,
                is_native=is_native,
                offset=offset,
            )

        decl = OperatorDecl(
            syntax=syntax,
            params=member.params,
            return_type=member.return_type,  # type: ignore[arg-type]
            type_params=header.type_params,
            is_static="static" in modifiers or "literal" in modifiers,
            is_literal="literal" in modifiers,
            priority=member.priority,
            requires=member.requires,
            body=body,
            is_native=is_native,
            offset=offset,
        )
        for problem in operator_problems(decl, name_params):
            self.error(offset, problem)
        return decl


def operator_problems(decl: OperatorDecl, name_params: Iterable[str]) -> List[str]:
    """Shape errors of an operator declaration."""
    problems = []
    name_params = set(name_params)
    operands = decl.value_operands
    for elem in decl.syntax:
        if isinstance(elem, NameOperand) and elem.param not in name_params:
            problems.append(f"'{elem.param}' in the syntax of {render_operator(decl)} is not a name parameter")
        if isinstance(elem, NamePart) and not elem.text.strip():
            problems.append("name parts must not be blank")
    if len(operands) != len(decl.params):
        problems.append(
            f"{render_operator(decl)} has {len(operands)} operands but {len(decl.params)} parameters"
        )
        return problems
    repeated = [i for i, op in enumerate(operands) if op.repetition is not Repetition.ONE]
    variadic = [i for i, p in enumerate(decl.params) if p.variadic]
    if len(repeated) > 1:
        problems.append("at most one repeated operand is allowed")
    elif repeated != variadic:
        problems.append("a repeated operand must correspond to the single variadic parameter")
    first = decl.syntax[0] if decl.syntax else None
    if isinstance(first, Operand) and first.repetition is not Repetition.ONE:
        problems.append("an operator cannot start with a repeated operand")
    return problems


def read_program(text: str, origin: str = "<string>") -> Program:
    """Read a source file.

    Args:
        text: file contents
        origin: file name used in diagnostics

    Returns:
        Program: declarations with raw expression spans in bodies

    Raises:
        CtxSyntaxError: on declaration syntax errors or unbalanced brackets
    """
    return _ProgramReader(text, origin).read()


def read_file(path: Union[str, Path]) -> Program:
    path = Path(path)
    return read_program(path.read_text(encoding="utf-8"), str(path))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------
def _render_type_params(params: Sequence[TypeParam]) -> str:
    return f"<{', '.join(str(p) for p in params)}>" if params else ""


def _render_body(body: Optional[Block]) -> str:
    return body.span.text if body is not None else ";"


def render_declarations(program: Program) -> str:
    """Render the declarations of a program in the syntax ``read_program`` accepts."""
    lines = []
    for imp in program.imports:
        block = ""
        if imp.constraints:
            block = " { " + ", ".join(f"{lo} < {hi}" for lo, hi in imp.constraints) + " }"
        lines.append(f"import dsl {imp.dsl}{block};")
    for cls in program.classes:
        kind = "dsl" if cls.is_dsl else "class"
        prefix = "native " if cls.is_native else ""
        lines.append(f"{prefix}{kind} {cls.name}{_render_type_params(cls.type_params)} {{")
        if cls.priorities is not None:
            constraints = ", ".join(f"{lo} < {hi}" for lo, hi in cls.priorities.constraints)
            lines.append(f"    priorities {', '.join(cls.priorities.names)} {{ {constraints} }}")
        for op in cls.operators:
            lines.append(f"    {'native ' if op.is_native and not cls.is_native else ''}{render_operator(op)} {_render_body(op.body)}")
        for method in cls.methods:
            lines.append(f"    {_render_method(method)} {_render_body(method.body)}")
        for ctor in cls.constructors:
            lines.append(f"    {cls.name}{render_params(ctor.params)} {_render_body(ctor.body)}")
        for fld in cls.fields:
            lines.append(f"    {'private ' if fld.is_private else ''}{render_type(fld.type)} {fld.name};")
        lines.append("}")
    for fn in program.functions:
        lines.append(f"{_render_method(fn, top_level=True)} {_render_body(fn.body)}")
    if program.main is not None:
        lines.append(f"main {program.main.span.text}")
    return "\n".join(lines) + "\n"


def _render_method(method: MethodDecl, top_level: bool = False) -> str:
    words = []
    if method.is_static and not top_level:
        words.append("static")
    if method.type_params:
        words.append(_render_type_params(method.type_params))
    words.append(render_type(method.return_type))
    words.append(method.name + render_params(method.params))
    if method.requires:
        words.append("requires " + ", ".join(str(r) for r in method.requires))
    return " ".join(words)


# ---------------------------------------------------------------------------
# Linking
# ---------------------------------------------------------------------------
@dataclass
class LinkedProgram:
    """A program with every referenced class loaded and every import resolved."""

    program: Program
    classes: Dict[str, ClassDecl]
    class_origins: Dict[str, str]
    # imported dsl names per file, the implicit Predef first
    file_imports: Dict[str, Tuple[str, ...]]
    file_constraints: Dict[str, Tuple[Tuple[QName, QName], ...]]
    files: Dict[str, Program] = field(default_factory=dict)

    @property
    def imports(self) -> Tuple[str, ...]:
        return self.file_imports.get(self.program.origin, (PREDEF,))

    def imports_of(self, class_name: str) -> Tuple[str, ...]:
        return self.file_imports.get(self.class_origins.get(class_name, ""), (PREDEF,))


@functools.lru_cache(maxsize=1)
def load_prelude() -> Tuple[Program, ...]:
    """The built-in class declarations and the predefined operators, read from package resources."""
    programs = []
    for name in PRELUDE_FILES:
        text = resources.files("ctxlang").joinpath("prelude", name).read_text(encoding="utf-8")
        programs.append(read_program(text, f"<prelude>/{name}"))
    return tuple(programs)


def _referenced_names(program: Program) -> Set[str]:
    names: Set[str] = set()

    def visit(t: object) -> None:
        if isinstance(t, ClassType):
            names.add(t.name.last)
            for arg in t.args:
                visit(arg)
        elif isinstance(t, TurnstileType):
            visit(t.assumption)
            visit(t.result)

    def visit_params(type_params: Sequence[TypeParam]) -> None:
        for tp in type_params:
            visit(tp.bound)
            if tp.name_type is not None:
                names.add(tp.name_type.last)

    for imp in program.imports:
        names.add(imp.dsl.last)
    for cls in program.classes:
        visit_params(cls.type_params)
        for op in cls.operators:
            visit_params(op.type_params)
            visit(op.return_type)
            for p in op.params:
                visit(p.type)
            for r in op.requires:
                visit(r)
        for method in tuple(cls.methods) + tuple(program.functions):
            visit_params(method.type_params)
            visit(method.return_type)
            for p in method.params:
                visit(p.type)
        for fld in cls.fields:
            visit(fld.type)
    names.update(_code_class_names(program.source))
    return names


def _code_class_names(text: str) -> Iterator[str]:
    """Capitalised identifiers outside string literals and comments: the classes bodies may name."""
    i = 0
    while i < len(text):
        c = text[i]
        if (c.isascii() and c.isalpha()) or c == "_":
            end = _IDENT.match(text, i).end()  # type: ignore[union-attr]
            if c.isupper():
                yield text[i:end]
            i = end
        elif c.isdigit():
            while i < len(text) and (text[i].isalnum() or text[i] == "_"):
                i += 1
        else:
            try:
                i = _skip_atom(text, i)
            except SourceError:
                return


def _candidate_files(name: str, directories: Sequence[Path]) -> List[Path]:
    found: List[Path] = []
    for directory in directories:
        candidate = directory / f"{name}.ctx"
        if candidate.is_file() and candidate.resolve() not in [f.resolve() for f in found]:
            found.append(candidate)
    return found


def resolve_imports(program: Program, search_paths: Sequence[Union[str, Path]] = ()) -> LinkedProgram:
    """Load every class the program refers to and resolve its ``import dsl`` declarations.

    Classes are looked up in the program itself, the prelude, and ``<Name>.ctx`` files on the search
    paths (plus the directory of the program file). Resolution is by name, so mutually referring files
    are fine; a name defined by two different files is an error.

    Raises:
        CtxLinkError: on unresolved imports, imports of non-dsl classes or duplicate definitions
        CtxSyntaxError: if a loaded file does not read
    """
    diagnostics = DiagnosticList()
    directories = [Path(p) for p in search_paths]
    if program.origin and not program.origin.startswith("<"):
        parent = Path(program.origin).parent
        if parent not in directories:
            directories.append(parent)

    classes: Dict[str, ClassDecl] = {}
    class_origins: Dict[str, str] = {}
    files: Dict[str, Program] = {}

    def add_program(p: Program) -> None:
        files[p.origin] = p
        for cls in p.classes:
            if cls.name in classes and class_origins[cls.name] != p.origin:
                diagnostics.add(
                    p.origin, cls.offset, f"class {cls.name} resolves to two files: {class_origins[cls.name]}, {p.origin}"
                )
                continue
            classes[cls.name] = cls
            class_origins[cls.name] = p.origin

    for prelude in load_prelude():
        add_program(prelude)
    add_program(program)

    pending = list(_referenced_names(program))
    tried: Set[str] = set()
    while pending:
        name = pending.pop()
        if name in classes or name in tried:
            continue
        tried.add(name)
        found = _candidate_files(name, directories)
        if len(found) > 1:
            diagnostics.add(program.origin, 0, f"class {name} resolves to two files: {found[0]}, {found[1]}")
        if not found:
            continue
        loaded = read_file(found[0])
        logger.debug(f"loaded {found[0]} for {name}")
        add_program(loaded)
        pending.extend(_referenced_names(loaded))

    file_imports: Dict[str, Tuple[str, ...]] = {}
    file_constraints: Dict[str, Tuple[Tuple[QName, QName], ...]] = {}
    for origin, p in files.items():
        names = [PREDEF]
        constraints: List[Tuple[QName, QName]] = []
        for imp in p.imports:
            cls = classes.get(imp.dsl.last)
            if cls is None:
                diagnostics.add(origin, imp.offset, f"unresolved dsl import {imp.dsl}")
                continue
            if not cls.is_dsl:
                diagnostics.add(origin, imp.offset, f"{imp.dsl} is not a dsl class")
                continue
            if cls.name not in names:
                names.append(cls.name)
            constraints.extend(imp.constraints)
        file_imports[origin] = tuple(names)
        file_constraints[origin] = tuple(constraints)

    if diagnostics.has_errors:
        raise CtxLinkError(diagnostics)
    return LinkedProgram(program, classes, class_origins, file_imports, file_constraints, files)
