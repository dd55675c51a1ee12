"""Type-directed packrat parsing of expressions written with user-defined operators.

A ``ParseSession`` parses the expression spans of one source text. Every sub-expression is parsed
against a ``Goal`` (expected type, assumption stack, priority bound, literal mode); only operators
that are in effect and may return the expected type are tried, and ambiguity is resolved at every
sub-expression by longest match, then by candidate order.

Outcomes are memoised by position and canonical goal. Operators whose syntax starts with an operand
are grown from seeds: at each position the session keeps a growth set holding every non-left result
of any type, extended with left operators until no new (end, type) pair appears.

Kernel expressions (literals, variables, calls, closures, blocks) are supplied by a ``KernelHost``;
the checker implements it.
"""

import enum
import re
import time
from contextlib import contextmanager
from dataclasses import (
    dataclass,
    field,
    replace,
)
from typing import (
    Dict,
    FrozenSet,
    Hashable,
    Iterator,
    List,
    Optional,
    Protocol,
    Sequence,
    Set,
    Tuple,
    Union,
)

from .logger import (
    TRACE,
    logger,
)
from .priorities import PriorityOrder
from .syntax import (
    ClassType,
    ContextOperand,
    NameAst,
    NameLit,
    NameOperand,
    NamePart,
    Operand,
    OperatorApp,
    Repetition,
    TurnstileType,
    TypedExpr,
    TypeExpr,
    TypeVar,
)
from .typesys import (
    ANY,
    EMPTY_SUBST,
    OperatorCandidate,
    OperatorScope,
    Substitution,
    UnifyError,
    canonical_renaming,
    candidates_for,
    free_vars,
    fresh_var,
    map_types,
    node_vars,
    rename,
    required_frames,
    satisfies_bound,
    unify,
)


_IDENT_RUN = re.compile(r"[A-Za-z0-9_]+")


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c == "_"


# ---------------------------------------------------------------------------
# Goals and outcomes
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Goal:
    """What the parser is asked to produce at a position.

    ``subst`` is the running substitution of the caller; it is not part of the goal's identity.
    """

    expected: TypeExpr
    assumptions: Tuple[ClassType, ...] = ()
    min_rank: int = 0
    literal_mode: bool = False
    subst: Substitution = field(default=EMPTY_SUBST, compare=False, repr=False)

    def canonical(self) -> Tuple["Goal", Dict[TypeVar, TypeVar]]:
        """The goal with the substitution applied and type variables numbered by first occurrence.

        Returns:
            the canonical goal and the renaming from canonical variables back to the caller's
        """
        expected = self.subst.apply(self.expected)
        assumptions = tuple(self.subst.apply(a) for a in self.assumptions)
        mapping, originals = canonical_renaming((expected, *assumptions))
        canon = Goal(
            rename(expected, mapping),  # type: ignore[arg-type]
            tuple(rename(a, mapping) for a in assumptions),  # type: ignore[misc]
            self.min_rank,
            self.literal_mode,
        )
        return canon, {canonical: original for original, canonical in mapping.items()}

    def with_subst(self, subst: Substitution) -> "Goal":
        return replace(self, subst=subst)

    def __str__(self) -> str:
        frames = ", ".join(str(a) for a in self.assumptions)
        mode = " literal" if self.literal_mode else ""
        return f"<{self.expected} | [{frames}] | >={self.min_rank}{mode}>"


@dataclass(frozen=True)
class Success:
    node: TypedExpr
    end: int
    subst: Substitution = field(default=EMPTY_SUBST, compare=False)
    priority: Optional[object] = None
    # top node applies an operator whose syntax starts with an operand
    left_op: bool = False
    # candidate order used to break ties between equally long results
    rank: Tuple[int, ...] = ()

    @property
    def result_type(self) -> TypeExpr:
        return self.subst.apply(self.node.result_type)  # type: ignore[return-value]


@dataclass(frozen=True)
class Failure:
    furthest: int
    expected: FrozenSet[str] = frozenset()
    problems: FrozenSet[str] = frozenset()


ParseOutcome = Union[Success, Failure]


@dataclass(frozen=True)
class ParseStats:
    input_length: int
    languages_seen: int
    memo_entries: int
    evaluations: int
    wall_time_ns: int = 0


class MemoState(enum.Enum):
    IN_PROGRESS = "in-progress"
    GROWING = "growing"
    DONE = "done"


@dataclass
class MemoEntry:
    state: MemoState
    outcome: Optional[ParseOutcome] = None
    # for DONE successes: the type variables the stored result mentions
    variables: Tuple[TypeVar, ...] = ()
    growth: Tuple[Success, ...] = ()


class MemoTable:
    """Outcomes keyed by (position, canonical goal, local scope, span limit)."""

    def __init__(self) -> None:
        self.entries: Dict[Hashable, MemoEntry] = {}
        self.entries_created = 0
        self.evaluations = 0
        self.languages: Set[Goal] = set()

    @property
    def languages_seen(self) -> int:
        return len(self.languages)

    def lookup(self, key: Hashable) -> Optional[MemoEntry]:
        return self.entries.get(key)

    def start(self, key: Hashable, goal: Goal, state: MemoState = MemoState.IN_PROGRESS) -> MemoEntry:
        entry = MemoEntry(state)
        self.entries[key] = entry
        self.entries_created += 1
        self.evaluations += 1
        self.languages.add(goal)
        return entry

    def __len__(self) -> int:
        return len(self.entries)


class KernelHost(Protocol):
    """Supplies the kernel alternatives of a goal and the local scope they see."""

    def scope_key(self) -> Hashable:
        ...

    def kernel_alternatives(self, session: "ParseSession", pos: int, goal: Goal) -> List[Success]:
        ...

    def pass_through(self, session: "ParseSession", pos: int, goal: Goal) -> Optional[Success]:
        """A turnstile-typed local passed on unchanged into a slot of the identical type."""
        ...


class _NoKernel:
    def scope_key(self) -> Hashable:
        return ()

    def kernel_alternatives(self, session: "ParseSession", pos: int, goal: Goal) -> List[Success]:
        return []

    def pass_through(self, session: "ParseSession", pos: int, goal: Goal) -> Optional[Success]:
        return None


# ---------------------------------------------------------------------------
# Candidate dispatch
# ---------------------------------------------------------------------------
def _token_key(token: str, literal_mode: bool) -> str:
    if literal_mode or not _is_ident_char(token[0]):
        return token[0]
    return _IDENT_RUN.match(token).group(0)  # type: ignore[union-attr]


@dataclass
class _CandidateIndex:
    """Candidates of one canonical goal, grouped by how they may start."""

    by_token: Dict[str, List[Tuple[int, OperatorCandidate]]]
    name_first: List[Tuple[int, OperatorCandidate]]
    left: List[OperatorCandidate]

    @classmethod
    def build(cls, candidates: Sequence[OperatorCandidate], literal_mode: bool) -> "_CandidateIndex":
        by_token: Dict[str, List[Tuple[int, OperatorCandidate]]] = {}
        name_first = []
        left = []
        for i, cand in enumerate(candidates):
            first = cand.info.decl.syntax[0]
            if isinstance(first, NamePart):
                by_token.setdefault(_token_key(first.text, literal_mode), []).append((i, cand))
            elif isinstance(first, NameOperand):
                name_first.append((i, cand))
            else:
                left.append(cand)
        return cls(by_token, name_first, left)

    def starting_at(self, text: str, pos: int, limit: int, literal_mode: bool) -> List[OperatorCandidate]:
        if pos >= limit:
            return []
        if literal_mode or not _is_ident_char(text[pos]):
            key = text[pos]
        else:
            key = _IDENT_RUN.match(text, pos, limit).group(0)  # type: ignore[union-attr]
        found = self.by_token.get(key, [])
        if self.name_first:
            found = sorted(found + self.name_first, key=lambda pair: pair[0])
        return [cand for _, cand in found]


# ---------------------------------------------------------------------------
# Parse session
# ---------------------------------------------------------------------------
class ParseSession:
    """Parses expressions of one source text under one operator scope.

    Args:
        text: the whole source text; positions are offsets into it
        scope: operators in effect
        order: merged priority order
        host: supplier of kernel alternatives
        trace: log every memo evaluation at the TRACE level
    """

    def __init__(
        self,
        text: str,
        scope: OperatorScope,
        order: PriorityOrder,
        host: Optional[KernelHost] = None,
        *,
        origin: str = "<string>",
        trace: bool = False,
    ) -> None:
        self.text = text
        self.scope = scope
        self.order = order
        self.host: KernelHost = host or _NoKernel()
        self.origin = origin
        self.trace = trace and logger.isEnabledFor(TRACE)
        self.memo = MemoTable()
        self._limit = len(text)
        self._candidates: Dict[Goal, _CandidateIndex] = {}
        self._parsed_chars = 0
        self._elapsed_ns = 0
        self.furthest = 0
        self.expected_at_furthest: Set[str] = set()
        self.problems_at_furthest: Set[str] = set()

    # -- limits and tokens --------------------------------------------------
    @property
    def limit(self) -> int:
        return self._limit

    @contextmanager
    def bounded(self, limit: int) -> Iterator[None]:
        """Restrict parsing to offsets below ``limit``."""
        saved = self._limit
        self._limit = min(limit, saved)
        try:
            yield
        finally:
            self._limit = saved

    def skip_ws(self, pos: int) -> int:
        text, limit = self.text, self._limit
        while pos < limit:
            c = text[pos]
            if c in " \t\r\n":
                pos += 1
            elif text.startswith("//", pos):
                newline = text.find("\n", pos, limit)
                pos = limit if newline < 0 else newline
            elif text.startswith("/*", pos):
                end = text.find("*/", pos + 2, limit)
                pos = limit if end < 0 else end + 2
            else:
                break
        return min(pos, limit)

    def expect(self, pos: int, what: str) -> None:
        """Record a failed expectation for the furthest-failure report."""
        if pos > self.furthest:
            self.furthest = pos
            self.expected_at_furthest = {what}
            self.problems_at_furthest = set()
        elif pos == self.furthest:
            self.expected_at_furthest.add(what)

    def complain(self, pos: int, message: str) -> None:
        """Record why an alternative was rejected after it had been recognised."""
        if pos > self.furthest:
            self.furthest = pos
            self.expected_at_furthest = set()
            self.problems_at_furthest = {message}
        elif pos == self.furthest:
            self.problems_at_furthest.add(message)

    def reset_failures(self) -> None:
        self.furthest = 0
        self.expected_at_furthest = set()
        self.problems_at_furthest = set()

    def failure(self, pos: int) -> Failure:
        if pos > self.furthest:
            return Failure(pos)
        return Failure(self.furthest, frozenset(self.expected_at_furthest), frozenset(self.problems_at_furthest))

    def match_token(self, pos: int, token: str, literal: bool = False) -> Optional[int]:
        """End of ``token`` at ``pos``, or None.

        Outside literal mode a token starting or ending with an identifier character must not touch
        another identifier character on that side.
        """
        text = self.text
        end = pos + len(token)
        if end > self._limit or not text.startswith(token, pos):
            self.expect(pos, f'"{token}"')
            return None
        if not literal:
            if _is_ident_char(token[0]) and pos > 0 and _is_ident_char(text[pos - 1]):
                self.expect(pos, f'"{token}"')
                return None
            if _is_ident_char(token[-1]) and end < len(text) and _is_ident_char(text[end]):
                self.expect(pos, f'"{token}"')
                return None
        return end

    # -- entry points ---------------------------------------------------------
    def parse_span(self, start: int, end: int, goal: Goal) -> ParseOutcome:
        """Parse ``text[start:end]`` completely against ``goal``."""
        began = time.perf_counter_ns()
        try:
            with self.bounded(end):
                outcome = self.parse_expr(start, goal)
                if isinstance(outcome, Success):
                    rest = self.skip_ws(outcome.end)
                    if rest < end:
                        self.expect(rest, "end of expression")
                        return self.failure(rest)
                return outcome
        finally:
            self._parsed_chars += max(end - start, 0)
            self._elapsed_ns += time.perf_counter_ns() - began

    def parse_expr(self, pos: int, goal: Goal) -> ParseOutcome:
        """Parse one expression at ``pos`` against ``goal``.

        A turnstile-typed expected type ``D |- T`` parses the operand at ``T`` with ``D`` pushed on
        the assumption stack. Everything else is memoised by canonical goal.
        """
        if not goal.literal_mode:
            pos = self.skip_ws(pos)
        expected = goal.subst.apply(goal.expected)
        if isinstance(expected, TurnstileType):
            return self.parse_context_operand(pos, goal, expected)

        canon, inverse = goal.canonical()
        key = (pos, canon, self.host.scope_key(), self._limit)
        entry = self.memo.lookup(key)
        if entry is None:
            entry = self.memo.start(key, canon)
            outcome = self._evaluate(pos, canon)
            entry.outcome = outcome
            entry.state = MemoState.DONE
            if isinstance(outcome, Success):
                entry.variables = _result_vars(outcome)
            if self.trace:
                logger.log(TRACE, f"parse {pos} {canon} -> {_describe(outcome)}")
        elif entry.state is not MemoState.DONE:
            # a goal re-entered at its own position has no seed
            self.expect(pos, str(expected))
            return self.failure(pos)
        outcome = entry.outcome
        if isinstance(outcome, Failure):
            return outcome
        return self.relocate(outcome, entry.variables, inverse, goal.subst)  # type: ignore[arg-type]

    def relocate(
        self,
        result: Success,
        variables: Sequence[TypeVar],
        inverse: Dict[TypeVar, TypeVar],
        subst: Substitution,
    ) -> ParseOutcome:
        """Move a result computed for a canonical goal into the caller's substitution.

        Canonical variables become the caller's variables; variables internal to the result are
        freshened so that two reuses never share them.
        """
        if not variables:
            return replace(result, subst=subst)
        renaming: Dict[TypeVar, TypeVar] = {}
        for var in variables:
            renaming[var] = inverse.get(var) or fresh_var(var.kind)
        try:
            for var, value in result.subst.items():
                subst = unify(rename(var, renaming), rename(value, renaming), subst)
        except UnifyError:
            return self.failure(result.end)
        node = map_types(result.node, lambda t: rename(t, renaming))
        return replace(result, node=node, subst=subst)  # type: ignore[arg-type]

    # -- evaluation -----------------------------------------------------------
    def candidates(self, goal: Goal) -> _CandidateIndex:
        index = self._candidates.get(goal)
        if index is None:
            index = _CandidateIndex.build(candidates_for(goal, self.scope, self.order), goal.literal_mode)
            self._candidates[goal] = index
        return index

    def _evaluate(self, pos: int, goal: Goal) -> ParseOutcome:
        results = self._alternatives(pos, goal)
        index = self.candidates(goal)
        if index.left:
            grown = self.grow_left_recursion(pos, goal)
            if isinstance(grown, Success):
                results.append(grown)
        if not results:
            self.expect(pos, str(goal.expected))
            return self.failure(pos)
        return self.disambiguate(results)

    def _alternatives(self, pos: int, goal: Goal) -> List[Success]:
        """Every non-left result of ``goal`` at ``pos``, in candidate order."""
        results: List[Success] = []
        if not goal.literal_mode:
            results.extend(self.host.kernel_alternatives(self, pos, goal))
        index = self.candidates(goal)
        for cand in index.starting_at(self.text, pos, self._limit, goal.literal_mode):
            outcome = self.match_operator(cand.refresh(), pos, goal)
            if isinstance(outcome, Success):
                results.append(outcome)
        expected = goal.subst.apply(goal.expected)
        if (
            not goal.literal_mode
            and isinstance(expected, ClassType)
            and expected.class_name in self.scope.literal_types
        ):
            outcome = self.parse_name_occurrence(pos, expected, None)
            if isinstance(outcome, Success):
                results.append(replace(outcome, subst=goal.subst, rank=(2,)))
        return results

    def match_operator(
        self,
        cand: OperatorCandidate,
        pos: int,
        goal: Goal,
        first: Optional[Success] = None,
    ) -> ParseOutcome:
        """Match the syntax of one candidate at ``pos``.

        Name parts are tokens; operands are parsed at the instantiated parameter type with the
        priority bound of their slot; name operands bind or check a generic name. The substitution
        threads from left to right. With ``first`` given, the leading operand is that result.
        """
        info = cand.info
        try:
            subst = unify(goal.expected, cand.return_type, goal.subst)
        except UnifyError:
            return self.failure(pos)
        operands: List[object] = []
        start = pos
        element = 0
        if first is not None:
            slot_min = self.order.min_rank(info.priority, info.slot_priorities[0])
            if not self.order.admits(slot_min, first.priority):  # type: ignore[arg-type]
                return self.failure(first.end)
            try:
                subst = self._merge(first.subst, subst)
                subst = unify(cand.param_types[0], first.node.result_type, subst)
            except UnifyError:
                return self.failure(first.end)
            operands.append(first.node)
            start = first.node.start  # type: ignore[union-attr]
            pos = first.end
            element = 1
        matched = self._match_elements(cand, element, pos, goal, subst, operands)
        if matched is None:
            return self.failure(pos)
        end, subst, operands = matched
        for var, bound in cand.bounds:
            if not satisfies_bound(subst.apply(var), bound):
                self.expect(start, f"{subst.apply(var)} extends {bound}")
                return self.failure(start)
        assumptions = tuple(subst.apply(a) for a in goal.assumptions)
        node = OperatorApp(
            decl=info.ref,
            type_args=tuple(cand.mapping[name] for name in info.params),
            operands=tuple(operands),  # type: ignore[arg-type]
            start=start,
            end=end,
            result_type=cand.return_type,
            receiver_frame=cand.frame,
            required_frames=required_frames(cand.requires, assumptions, subst),  # type: ignore[arg-type]
        )
        return Success(
            node,
            end,
            subst,
            priority=info.priority,
            left_op=info.starts_with_operand,
            rank=(1, *cand.source_rank, info.ref.index),
        )

    @staticmethod
    def _merge(extra: Substitution, subst: Substitution) -> Substitution:
        for var, value in extra.items():
            subst = unify(var, value, subst)
        return subst

    def _match_elements(
        self,
        cand: OperatorCandidate,
        element: int,
        pos: int,
        goal: Goal,
        subst: Substitution,
        operands: List[object],
    ) -> Optional[Tuple[int, Substitution, List[object]]]:
        info = cand.info
        syntax = info.decl.syntax
        literal = goal.literal_mode
        while element < len(syntax):
            elem = syntax[element]
            if not literal:
                pos = self.skip_ws(pos)
            if isinstance(elem, NamePart):
                end = self.match_token(pos, elem.text, literal)
                if end is None:
                    return None
                pos = end
            elif isinstance(elem, NameOperand):
                var = cand.mapping[elem.param]
                bound = subst.walk(var)
                outcome = self.parse_name_occurrence(
                    pos, info.name_types[elem.param], bound if isinstance(bound, NameAst) else None
                )
                if isinstance(outcome, Failure):
                    return None
                if not isinstance(bound, NameAst):
                    try:
                        subst = unify(var, outcome.node.name, subst)  # type: ignore[union-attr]
                    except UnifyError:
                        return None
                pos = outcome.end
            elif elem.repetition is Repetition.ONE:
                outcome = self._parse_operand(cand, element, pos, goal, subst)
                if isinstance(outcome, Failure):
                    return None
                operands.append(outcome.node)
                subst = outcome.subst
                pos = outcome.end
            else:
                return self._match_repetition(cand, element, pos, goal, subst, operands)
            element += 1
        return pos, subst, operands

    def _parse_operand(
        self, cand: OperatorCandidate, element: int, pos: int, goal: Goal, subst: Substitution
    ) -> ParseOutcome:
        info = cand.info
        elem = info.decl.syntax[element]
        assert isinstance(elem, Operand)
        min_rank = self.order.min_rank(info.priority, info.slot_priorities[element])
        operand_goal = Goal(
            cand.param_types[info.slot_params[element]],
            goal.assumptions,
            min_rank,
            goal.literal_mode,
            subst,
        )
        return self.parse_expr(pos, operand_goal)

    def _match_repetition(
        self,
        cand: OperatorCandidate,
        element: int,
        pos: int,
        goal: Goal,
        subst: Substitution,
        operands: List[object],
    ) -> Optional[Tuple[int, Substitution, List[object]]]:
        """Greedy repetition, giving back one item at a time until the rest of the syntax matches."""
        elem = cand.info.decl.syntax[element]
        assert isinstance(elem, Operand)
        items: List[Success] = []
        states = [(pos, subst)]
        while True:
            here, current = states[-1]
            outcome = self._parse_operand(cand, element, here, goal, current)
            if isinstance(outcome, Failure) or outcome.end <= here:
                break
            items.append(outcome)
            states.append((outcome.end, outcome.subst))
        minimum = 1 if elem.repetition is Repetition.PLUS else 0
        for count in range(len(items), minimum - 1, -1):
            here, current = states[count]
            tail = self._match_elements(
                cand, element + 1, here, goal, current, operands + [tuple(item.node for item in items[:count])]
            )
            if tail is not None:
                return tail
        return None

    # -- context operands -----------------------------------------------------
    def parse_context_operand(self, pos: int, goal: Goal, expected: TurnstileType) -> ParseOutcome:
        """Parse an operand of type ``D |- T``: ``T`` with the instance operators of ``D`` in effect."""
        results: List[Success] = []
        passed = self.host.pass_through(self, pos, goal)
        if passed is not None:
            results.append(passed)
        inner_goal = Goal(
            expected.result,
            goal.assumptions + (expected.assumption,),
            goal.min_rank,
            False,
            goal.subst,
        )
        outcome = self.parse_expr(pos, inner_goal)
        if isinstance(outcome, Success):
            body = outcome.node
            node = ContextOperand(
                assumption=expected.assumption,
                body=body,
                start=body.start,  # type: ignore[union-attr]
                end=outcome.end,
                result_type=expected,
            )
            results.append(replace(outcome, node=node, left_op=False, rank=(3,)))
        if not results:
            return outcome
        return self.disambiguate(results)

    # -- generic names --------------------------------------------------------
    def parse_name_occurrence(self, pos: int, name_type: ClassType, bound: Optional[NameAst]) -> ParseOutcome:
        """Parse a generic-name occurrence with the literal operators of ``name_type``.

        No whitespace is skipped inside the name. With ``bound`` given, the occurrence must have the
        same tree.
        """
        outcome = self.parse_expr(pos, Goal(name_type, (), 0, True))
        if isinstance(outcome, Failure):
            return outcome
        name = name_tree(outcome.node, self.text)
        if bound is not None and name != bound:
            self.expect(pos, f"name {bound}")
            return self.failure(pos)
        node = NameLit(name, pos, outcome.end, name_type)
        return Success(node, outcome.end, outcome.subst)

    # -- left recursion -------------------------------------------------------
    def grow_left_recursion(self, pos: int, goal: Goal) -> ParseOutcome:
        """Best result of ``goal`` whose top operator starts with an operand.

        The growth set at ``pos`` is shared by all goals with the same assumptions: it is seeded
        with every non-left result of any type and extended with left operators until no new
        (end, type) pair appears.
        """
        any_goal = Goal(ANY, goal.assumptions, 0, goal.literal_mode, goal.subst)
        canon_any, inverse = any_goal.canonical()
        key = ("grow", pos, canon_any, self.host.scope_key(), self._limit)
        entry = self.memo.lookup(key)
        if entry is None:
            entry = self.memo.start(key, canon_any, MemoState.GROWING)
            entry.growth = tuple(self._grow(pos, canon_any))
            entry.state = MemoState.DONE
            if self.trace:
                logger.log(TRACE, f"grow {pos} {canon_any} -> {len(entry.growth)} results")
        elif entry.state is not MemoState.DONE:
            return self.failure(pos)

        picked: List[Success] = []
        expected = goal.subst.apply(goal.expected)
        for result in entry.growth:
            if not result.left_op or not self.order.admits(goal.min_rank, result.priority):  # type: ignore[arg-type]
                continue
            moved = self.relocate(result, _result_vars(result), inverse, goal.subst)
            if isinstance(moved, Failure):
                continue
            try:
                subst = unify(expected, moved.node.result_type, moved.subst)
            except UnifyError:
                continue
            picked.append(replace(moved, subst=subst))
        if not picked:
            return self.failure(pos)
        return self.disambiguate(picked)

    def _grow(self, pos: int, goal: Goal) -> List[Success]:
        results = list(self._alternatives(pos, goal))
        seen = {(r.end, _type_key(r)) for r in results}
        left = self.candidates(goal).left
        queue = list(results)
        while queue:
            seed = queue.pop(0)
            for cand in left:
                outcome = self.match_operator(cand.refresh(), seed.end, goal, first=seed)
                if isinstance(outcome, Failure):
                    continue
                key = (outcome.end, _type_key(outcome))
                if key in seen:
                    continue
                seen.add(key)
                results.append(outcome)
                queue.append(outcome)
        return results

    # -- disambiguation -------------------------------------------------------
    @staticmethod
    def disambiguate(results: Sequence[Success]) -> Success:
        """The longest result; among equally long ones, the earliest candidate."""
        best = results[0]
        for result in results[1:]:
            if result.end > best.end or (result.end == best.end and result.rank < best.rank):
                best = result
        return best

    # -- statistics -----------------------------------------------------------
    def stats(self) -> ParseStats:
        return ParseStats(
            input_length=self._parsed_chars,
            languages_seen=self.memo.languages_seen,
            memo_entries=len(self.memo),
            evaluations=self.memo.evaluations,
            wall_time_ns=self._elapsed_ns,
        )

    def describe_failure(self, outcome: Failure) -> str:
        if outcome.problems:
            return "; ".join(sorted(outcome.problems))
        expected = sorted(outcome.expected)
        if not expected:
            return "cannot parse expression"
        if len(expected) > 6:
            expected = expected[:6] + ["..."]
        return f"expected {' or '.join(expected)}"


def _result_vars(result: Success) -> Tuple[TypeVar, ...]:
    acc = node_vars(result.node)
    for var, value in result.subst.items():
        free_vars(var, acc)
        node_vars(value, acc)
    return tuple(acc)


def _type_key(result: Success) -> Hashable:
    t = result.result_type
    mapping, _ = canonical_renaming((t,))
    return rename(t, mapping)


def _describe(outcome: ParseOutcome) -> str:
    if isinstance(outcome, Failure):
        return f"fail@{outcome.furthest}"
    return f"{type(outcome.node).__name__}..{outcome.end}: {outcome.result_type}"


def name_tree(node: TypedExpr, text: str) -> NameAst:
    """The literal-operator application tree of a parsed generic name."""
    if isinstance(node, NameLit):
        return node.name
    if not isinstance(node, OperatorApp):
        raise TypeError(f"not a name: {node!r}")
    children: List[NameAst] = []
    for operand in node.operands:
        if isinstance(operand, tuple):
            children.extend(name_tree(item, text) for item in operand)
        else:
            children.append(name_tree(operand, text))
    return NameAst(node.decl, tuple(children), text[node.start : node.end])
