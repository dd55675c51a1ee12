import random
from pathlib import Path

import pytest

from ctxlang.checker import (
    file_scope,
    priority_order,
)
from ctxlang.loader import (
    read_program,
    resolve_imports,
)
from ctxlang.logger import TRACE
from ctxlang.parser import (
    Failure,
    Goal,
    ParseSession,
    Success,
)
from ctxlang.syntax import (
    BOOL,
    INT,
    STR,
    DeclRef,
    NameAst,
    NamePart,
    OperatorApp,
    class_type,
)
from ctxlang.typesys import (
    SignatureTable,
    TypeEnv,
)


CORPUS_DIR = Path(__file__).parent.parent / "corpus"

NUMBERS = """
import dsl Num;
dsl Num {
    static int "one" () { return 1; }
    static int "two" () { return 2; }
}
"""

CHAIN = """
import dsl Chain;
dsl Chain {
    static int "x" () { return 0; }
    static int _ "[" _ "]" (int a, int b) { return a; }
}
"""


def _linked(source):
    return resolve_imports(read_program(source), [CORPUS_DIR])


def _session(linked, text, trace=False):
    signatures = SignatureTable(TypeEnv(linked.classes), linked.program.functions)
    origin = linked.program.origin
    return ParseSession(
        text, file_scope(linked, signatures, origin), priority_order(linked, origin), trace=trace
    )


def _parse(source, text, goal):
    return _session(_linked(source), text).parse_span(0, len(text), goal)


def _binary(linked, owner, token):
    for i, op in enumerate(linked.classes[owner].operators):
        if op.starts_with_operand and NamePart(token) in op.syntax:
            return DeclRef(owner, i)
    raise LookupError(token)


@pytest.fixture(scope="module")
def numbers():
    return _linked(NUMBERS)


class TestExpressions:
    def test_priorities_shape_the_tree(self, numbers):
        outcome = _session(numbers, "one + two * one").parse_span(0, 15, Goal(INT))
        assert isinstance(outcome, Success)
        top = outcome.node
        assert top.decl == _binary(numbers, "Predef", "+")
        assert top.operands[0].decl == DeclRef("Num", 0)
        assert top.operands[1].decl == _binary(numbers, "Predef", "*")

    def test_left_associative(self, numbers):
        outcome = _session(numbers, "one - two - one").parse_span(0, 15, Goal(INT))
        minus = _binary(numbers, "Predef", "-")
        assert outcome.node.decl == minus
        assert outcome.node.operands[0].decl == minus
        assert outcome.node.operands[1].decl == DeclRef("Num", 0)

    def test_expected_type_selects_operators(self, numbers):
        assert isinstance(_session(numbers, "one < two").parse_span(0, 9, Goal(BOOL)), Success)
        assert isinstance(_session(numbers, "one < two").parse_span(0, 9, Goal(INT)), Failure)

    def test_failure_reports_furthest_position(self, numbers):
        session = _session(numbers, "one +")
        outcome = session.parse_span(0, 5, Goal(INT))
        assert isinstance(outcome, Failure)
        assert outcome.furthest == 5
        assert "int" in outcome.expected
        assert session.describe_failure(outcome).startswith("expected")

    def test_tokens_respect_identifier_boundaries(self, numbers):
        assert isinstance(_session(numbers, "onetwo").parse_span(0, 6, Goal(INT)), Failure)

    def test_import_order_breaks_ties(self):
        classes = """
        dsl A { static String "hi" () { return "a"; } }
        dsl B { static String "hi" () { return "b"; } }
        """
        a_first = _parse("import dsl A;\nimport dsl B;\n" + classes, "hi", Goal(STR))
        b_first = _parse("import dsl B;\nimport dsl A;\n" + classes, "hi", Goal(STR))
        assert a_first.node.decl.owner == "A"
        assert b_first.node.decl.owner == "B"


class TestMemo:
    def test_repeated_span_is_not_reevaluated(self, numbers):
        session = _session(numbers, "one + two * one")
        first = session.parse_span(0, 15, Goal(INT))
        evaluations = session.memo.evaluations
        second = session.parse_span(0, 15, Goal(INT))
        assert session.memo.evaluations == evaluations
        assert first.node == second.node

    def test_left_recursive_chain_nests_left(self):
        text = "x[x][x]"
        outcome = _parse(CHAIN, text, Goal(INT))
        assert isinstance(outcome, Success) and outcome.end == len(text)
        top = outcome.node
        assert top.decl == DeclRef("Chain", 1)
        assert top.operands[0].decl == DeclRef("Chain", 1)
        assert top.operands[0].operands[0].decl == DeclRef("Chain", 0)

    def test_evaluations_grow_linearly(self):
        linked = _linked(CHAIN)

        def evaluations(n):
            text = "x" + "[x]" * n
            session = _session(linked, text)
            assert isinstance(session.parse_span(0, len(text), Goal(INT)), Success)
            return session.stats().evaluations

        small, big = evaluations(20), evaluations(40)
        assert big <= 2 * small + 10

    def test_memo_entries_grow_linearly(self):
        """Test that memo entries on left-recursive chains fit a line through the smaller sizes"""
        linked = _linked(CHAIN)

        def entries(n):
            text = "x" + "[x]" * n
            session = _session(linked, text)
            outcome = session.parse_span(0, len(text), Goal(INT))
            assert isinstance(outcome, Success) and outcome.end == len(text)
            return session.stats().memo_entries

        sizes = (25, 50, 100)
        counts = [entries(n) for n in sizes]
        per_link = (counts[1] - counts[0]) / (sizes[1] - sizes[0])
        assert per_link > 0
        predicted = counts[1] + per_link * (sizes[2] - sizes[1])
        assert counts[2] == pytest.approx(predicted, rel=0.2)

    def test_stats(self, numbers):
        session = _session(numbers, "one + two")
        session.parse_span(0, 9, Goal(INT))
        stats = session.stats()
        assert stats.input_length == 9
        assert stats.memo_entries == len(session.memo) > 0
        assert stats.languages_seen >= 1


class TestNames:
    @pytest.fixture(scope="class")
    def ids(self):
        return _linked("import dsl Id;\nmain { }")

    def test_name_tree(self, ids):
        outcome = _session(ids, "acc").parse_name_occurrence(0, class_type("Id"), None)
        assert isinstance(outcome, Success)
        assert outcome.end == 3
        assert outcome.node.name.structure() == "Id#0(Letter#0,Id#0(Letter#2,Id#1(Letter#2)))"
        assert str(outcome.node.name) == "acc"

    def test_names_do_not_span_whitespace(self, ids):
        outcome = _session(ids, "a c").parse_name_occurrence(0, class_type("Id"), None)
        assert outcome.end == 1

    def test_bound_occurrence_must_match(self, ids):
        bound = _session(ids, "acc").parse_name_occurrence(0, class_type("Id"), None).node.name
        assert isinstance(_session(ids, "acc").parse_name_occurrence(0, class_type("Id"), bound), Success)
        assert isinstance(_session(ids, "abc").parse_name_occurrence(0, class_type("Id"), bound), Failure)

    def test_random_occurrences_bind_by_spelling(self, ids):
        """Test that an occurrence matches its binder exactly when both are spelled alike"""
        rng = random.Random(5)
        id_type = class_type("Id")
        for _ in range(100):
            binder = "".join(rng.choice("abc") for _ in range(rng.randint(1, 4)))
            if rng.random() < 0.5:
                occurrence = binder
            else:
                occurrence = "".join(rng.choice("abc") for _ in range(rng.randint(1, 4)))
            bound = _session(ids, binder).parse_name_occurrence(0, id_type, None).node.name
            outcome = _session(ids, occurrence).parse_name_occurrence(0, id_type, bound)
            if occurrence == binder:
                assert isinstance(outcome, Success), occurrence
                assert outcome.end == len(occurrence)
                assert outcome.node.name == bound
            else:
                assert isinstance(outcome, Failure), (binder, occurrence)


class TestDisambiguate:
    def _result(self, end, rank):
        return Success(OperatorApp(DeclRef("X", rank[-1]), (), (), 0, end, INT), end, rank=rank)

    def test_longest_wins(self):
        best = ParseSession.disambiguate([self._result(3, (1, 0, 0, 0)), self._result(5, (1, 1, 4, 1))])
        assert best.end == 5

    def test_earlier_candidate_wins_a_tie(self):
        results = [self._result(5, (2,)), self._result(5, (1, 0, 1, 2)), self._result(5, (1, 1, 0, 3))]
        assert ParseSession.disambiguate(results).rank == (1, 0, 1, 2)

    def test_names_rank_after_operators(self):
        name = Success(NameAst(DeclRef("Id", 1)), 5, rank=(2,))
        assert ParseSession.disambiguate([name, self._result(5, (1, 1, 0, 0))]).rank == (1, 1, 0, 0)


def test_trace_logs_memo_evaluations(caplog):
    """Test that a tracing session logs its memo evaluations at TRACE"""
    caplog.set_level(TRACE, logger="ctxlang")
    session = _session(_linked(NUMBERS), "one + two", trace=True)
    assert isinstance(session.parse_span(0, 9, Goal(INT)), Success)
    assert any(r.levelno == TRACE and r.getMessage().startswith("parse ") for r in caplog.records)


def test_no_trace_by_default(caplog):
    caplog.set_level(TRACE, logger="ctxlang")
    _session(_linked(NUMBERS), "one + two").parse_span(0, 9, Goal(INT))
    assert not [r for r in caplog.records if r.levelno == TRACE]
