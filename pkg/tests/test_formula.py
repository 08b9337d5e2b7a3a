from __future__ import annotations

import pytest
from helpers import event_chain
from hypothesis import given, settings
from hypothesis import strategies as st

from nasverify.core.formula import And, Atom, Or, atoms, compile_formula, evaluate, parse_formula
from nasverify.core.jitter import build_time_chain
from nasverify.exceptions import ParseError, UnknownName

names = st.from_regex(r"[A-Z][a-z0-9_]{0,5}", fullmatch=True).filter(lambda s: s not in ("and", "or"))
formulas = st.recursive(
    st.builds(Atom, automaton=names, location=names),
    lambda inner: st.one_of(
        st.builds(And, operands=st.lists(inner, min_size=2, max_size=3).map(tuple)),
        st.builds(Or, operands=st.lists(inner, min_size=2, max_size=3).map(tuple)),
    ),
    max_leaves=8,
)


def test_parse_atom():
    assert parse_formula("Sensor.Act") == Atom(automaton="Sensor", location="Act")


def test_and_binds_tighter_than_or():
    f = parse_formula("A.p or B.q and C.r")
    assert isinstance(f, Or)
    assert f.operands[1] == And(operands=(Atom(automaton="B", location="q"), Atom(automaton="C", location="r")))


def test_symbolic_operators_and_parentheses():
    f = parse_formula("(A.p || B.q) && C.r")
    assert isinstance(f, And)
    assert isinstance(f.operands[0], Or)
    assert str(f) == "(A.p or B.q) and C.r"


def test_namespaced_location_keeps_its_dots():
    assert parse_formula("Sensor.Sensor.Act") == Atom(automaton="Sensor", location="Sensor.Act")


def test_labels_stand_for_their_formulas():
    labels = {"sampled": Atom(automaton="Sensor", location="Act"), "done": Atom(automaton="Drive", location="Post")}
    f = parse_formula("sampled or (done and Bus.Idle)", labels)
    assert f == Or(
        operands=(
            labels["sampled"],
            And(operands=(labels["done"], Atom(automaton="Bus", location="Idle"))),
        )
    )
    with pytest.raises(ParseError):
        parse_formula("sampled")


@pytest.mark.parametrize(
    "text, column",
    [("", 1), ("Sensor", 1), ("A.p and", 8), ("A.p ) ", 5), ("(A.p", 5), ("A.p # B.q", 5)],
)
def test_parse_errors_carry_the_column(text, column):
    with pytest.raises(ParseError) as info:
        parse_formula(text)
    assert info.value.location == (1, column)


@given(formulas)
@settings(max_examples=200)
def test_rendering_parses_back(f):
    assert parse_formula(str(f)) == f


def test_atoms_in_order():
    f = parse_formula("A.p and (B.q or A.r)")
    assert [str(a) for a in atoms(f)] == ["A.p", "B.q", "A.r"]


def test_evaluate_on_a_mapping():
    f = parse_formula("A.p and (B.q or B.r)")
    assert evaluate(f, {"A": "p", "B": "r"})
    assert not evaluate(f, {"A": "p", "B": "s"})
    with pytest.raises(UnknownName):
        evaluate(parse_formula("C.p"), {"A": "p"})


def test_evaluate_on_a_network_location_vector():
    n = build_time_chain(event_chain([(1, 2), (1, 2)]))
    f = parse_formula("C0.Post and C1.Act")
    assert evaluate(f, ("C0.Post", "C1.Act", "Sink.Wait"), n)
    assert not evaluate(f, n.initial_locations(), n)
    assert evaluate(f, {"C0": "C0.Post", "C1": "C1.Act", "Sink": "Sink.Wait"}, n)


def test_location_vector_needs_the_network():
    with pytest.raises(TypeError):
        evaluate(parse_formula("A.p"), ("p",))


def test_unknown_names_are_rejected_at_compile_time():
    n = build_time_chain(event_chain([(1, 2)]))
    with pytest.raises(UnknownName):
        compile_formula(parse_formula("Nope.Act"), n)
    with pytest.raises(UnknownName):
        compile_formula(parse_formula("C0.Nowhere"), n)
