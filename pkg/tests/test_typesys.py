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
from ctxlang.parser import Goal
from ctxlang.syntax import (
    INT,
    STR,
    DeclRef,
    NameAst,
    ParamKind,
    ParamType,
    QName,
    TurnstileType,
    class_type,
)
from ctxlang.typesys import (
    ANY,
    EMPTY_SUBST,
    SignatureTable,
    Substitution,
    TypeEnv,
    TypeResolutionError,
    UnifyError,
    canonical_renaming,
    candidates_for,
    check_requires,
    fresh_var,
    required_frames,
    unifies,
    unify,
)


CORPUS_DIR = Path(__file__).parent.parent / "corpus"

OPS_SOURCE = """
import dsl Ops;
dsl Ops {
    static int "n" () { return 1; }
    static String "s" () { return "s"; }
    int "it" () { return 0; }
}
dsl Frame {
    int "it" () { return 2; }
}
"""


def _scope(source):
    linked = resolve_imports(read_program(source), [CORPUS_DIR])
    signatures = SignatureTable(TypeEnv(linked.classes), linked.program.functions)
    origin = linked.program.origin
    return linked, file_scope(linked, signatures, origin), priority_order(linked, origin)


@pytest.fixture(scope="module")
def ops():
    return _scope(OPS_SOURCE)


class TestUnify:
    def test_binds_variable_inside_generic(self):
        v = fresh_var()
        s = unify(class_type("List", v), class_type("List", INT))
        assert s.apply(v) == INT

    def test_generic_arguments_are_invariant(self):
        with pytest.raises(UnifyError):
            unify(class_type("List", STR), class_type("List", INT))

    def test_builtin_subtype(self):
        assert unifies(class_type("Closeable"), class_type("Reader"))
        assert not unifies(class_type("Reader"), class_type("Closeable"))

    def test_parameter_matches_through_bound(self):
        r = ParamType("R", bound=class_type("Closeable"))
        assert unifies(class_type("Closeable"), r)
        assert not unifies(class_type("Map", INT, INT), r)

    def test_any_matches_everything(self):
        assert unify(ANY, class_type("Map", STR, INT)) is EMPTY_SUBST
        assert unifies(INT, ANY)

    def test_occurs_check(self):
        v = fresh_var()
        with pytest.raises(UnifyError):
            unify(v, class_type("List", v))

    def test_name_variables_bind_only_names(self):
        name = NameAst(DeclRef("Id", 1), (NameAst(DeclRef("Letter", 0)),), "a")
        v = fresh_var(ParamKind.NAME)
        assert unify(v, name).apply(v) == name
        with pytest.raises(UnifyError):
            unify(v, INT)
        with pytest.raises(UnifyError):
            unify(fresh_var(), name)

    def test_turnstile_types(self):
        v = fresh_var()
        expected = TurnstileType(class_type("Lazy"), v)
        assert unify(expected, TurnstileType(class_type("Lazy"), STR)).apply(v) == STR
        assert not unifies(expected, TurnstileType(class_type("FileRead"), STR))


class TestSubstitution:
    def test_equality_is_up_to_normalisation(self):
        a, b = fresh_var(), fresh_var()
        chained = Substitution().bind(a, class_type("List", b)).bind(b, INT)
        flat = Substitution().bind(a, class_type("List", INT)).bind(b, INT)
        assert chained == flat
        assert len(chained) == 2 and a in chained

    def test_canonical_renaming_uses_first_occurrence(self):
        a, b = fresh_var(), fresh_var()
        mapping, originals = canonical_renaming([class_type("Map", b, a), a])
        assert originals == (b, a)
        assert mapping[b].id == -1 and mapping[a].id == -2


class TestRequires:
    FRAMES = (class_type("FileRead"), class_type("MapEntryRef", STR, INT), class_type("FileRead"))

    def test_innermost_frame_wins(self):
        assert required_frames([class_type("FileRead")], self.FRAMES) == (2,)
        v, w = fresh_var(), fresh_var()
        assert required_frames([class_type("MapEntryRef", v, w)], self.FRAMES) == (1,)

    def test_missing_frame(self):
        assert check_requires([class_type("FileRead")], self.FRAMES)
        assert not check_requires([class_type("Lazy")], self.FRAMES)
        assert check_requires([], ())


class TestTypeEnv:
    def test_resolves_primitives_and_generics(self, ops):
        linked, _, _ = ops
        env = TypeEnv(linked.classes)
        written = class_type("Map", class_type("String"), class_type("int"))
        assert env.resolve(written, {}) == class_type("Map", STR, INT)

    @pytest.mark.parametrize(
        "written",
        [class_type("Nowhere"), class_type("Map", class_type("int")), class_type("Lazy", class_type("int"))],
    )
    def test_rejects_ill_formed_types(self, ops, written):
        linked, _, _ = ops
        with pytest.raises(TypeResolutionError):
            TypeEnv(linked.classes).resolve(written, {})


class TestCandidates:
    def test_instance_operators_innermost_first(self, ops):
        _, scope, order = ops
        goal = Goal(INT, (class_type("Ops"), class_type("Frame")))
        refs = [c.info.ref for c in candidates_for(goal, scope, order)]
        assert refs[:2] == [DeclRef("Frame", 0), DeclRef("Ops", 2)]
        assert refs[-1] == DeclRef("Ops", 0)
        # the String operator cannot produce an int
        assert DeclRef("Ops", 1) not in refs

    def test_predef_comes_before_imports(self, ops):
        _, scope, order = ops
        refs = [c.info.ref for c in candidates_for(Goal(INT), scope, order)]
        owners = [ref.owner for ref in refs]
        assert owners.index("Predef") < owners.index("Ops")

    def test_priority_bound_filters(self, ops):
        _, scope, order = ops
        goal = Goal(INT, min_rank=order.rank_of(QName.parse("Predef.mul")))
        cands = candidates_for(goal, scope, order)
        priorities = {str(c.info.priority) for c in cands}
        assert "Predef.add" not in priorities
        assert "Predef.mul" in priorities
        # unranked operators are admitted at any bound
        assert DeclRef("Ops", 0) in [c.info.ref for c in cands]

    def test_fresh_variables_per_candidate(self, ops):
        _, scope, order = ops
        first = candidates_for(Goal(STR), scope, order)
        second = candidates_for(Goal(STR), scope, order)
        generic = [i for i, c in enumerate(first) if c.type_vars]
        assert generic
        i = generic[0]
        assert first[i].info.ref == second[i].info.ref
        assert set(first[i].type_vars).isdisjoint(second[i].type_vars)

    def test_literal_mode_sees_only_literals(self):
        _, scope, order = _scope("import dsl Id;\nmain { }")
        assert {"Id", "Letter"} <= scope.literal_types
        letters = candidates_for(Goal(class_type("Letter"), literal_mode=True), scope, order)
        assert len(letters) == 26
        assert candidates_for(Goal(INT, literal_mode=True), scope, order) == []
