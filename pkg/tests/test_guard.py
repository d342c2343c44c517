import pytest
from hypothesis import given, strategies as st

from src.models.components import Prop
from src.models.errors import ParseError
from src.models.guard import FALSE, TRUE, And, Lit, Not, Or, eval_guard, parse_guard, support

C2_0, C2_1, C4_0 = Prop("c2", 0), Prop("c2", 1), Prop("c4", 0)
PROPS = [Prop("a", 0), Prop("a", 1), Prop("b", 2)]

guards = st.recursive(
    st.sampled_from([TRUE, FALSE]) | st.sampled_from(PROPS).map(Lit),
    lambda children: st.one_of(
        children.map(Not),
        st.lists(children, min_size=2, max_size=3).map(lambda gs: And(tuple(gs))),
        st.lists(children, min_size=2, max_size=3).map(lambda gs: Or(tuple(gs))),
    ),
    max_leaves=12,
)
valuations = st.frozensets(st.sampled_from(PROPS))


def test_literal_holds_iff_in_labels():
    g = parse_guard("c2@0 & !c4@0")
    assert eval_guard(g, {C2_0})
    assert not eval_guard(g, {C2_0, C4_0})
    assert not eval_guard(g, set())


def test_and_binds_tighter_than_or():
    g = parse_guard("c2@0 | c2@1 & c4@0")
    assert eval_guard(g, {C2_0})
    assert not eval_guard(g, {C2_1})
    assert eval_guard(g, {C2_1, C4_0})


def test_constants():
    assert eval_guard(parse_guard("true"), set())
    assert not eval_guard(parse_guard("false"), {C2_0})
    assert support(parse_guard("true | false")) == frozenset()


def test_macros_expand_in_place():
    col = parse_guard("c2@0 & c2@1")
    g = parse_guard("!col & !c4@0", {"col": col})
    assert support(g) == {C2_0, C2_1, C4_0}
    assert not eval_guard(g, {C2_0, C2_1})
    assert eval_guard(g, {C2_0})


@pytest.mark.parametrize("text", ["", "c2@0 &", "(c2@0", "c2@0)", "c2@x", "undefined_macro", "c2@0 ^ c4@0"])
def test_malformed_guard_raises(text):
    with pytest.raises(ParseError):
        parse_guard(text)


@given(guards, valuations)
def test_rendered_guard_reads_back_equivalent(g, labels):
    assert eval_guard(parse_guard(str(g)), labels) == eval_guard(g, labels)


@given(guards, guards, valuations)
def test_de_morgan(g, h, labels):
    assert eval_guard(Not(And((g, h))), labels) == eval_guard(Or((Not(g), Not(h))), labels)


@given(guards, valuations)
def test_only_support_matters(g, labels):
    assert eval_guard(g, labels) == eval_guard(g, labels & support(g))
