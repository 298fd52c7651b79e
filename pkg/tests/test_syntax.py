import pytest

from core.lang_tcl import IllTyped, UNIT, arrow
from core.syntax import ParseError, parse_type, tokenize


def test_tokenizer_normalizes_unicode():
    assert tokenize("S″ ⊕ K′ ∥ λx. x") == ["S''", "(+)", "K'", "||", "\\", "x", ".", "x"]


@pytest.mark.parametrize(
    "text",
    ["S K I e", "S'(K) I e", "S''(K, I) e", "(K e)(I e)", "K'(e)(I e)", "I(I e)"],
)
def test_typed_printing_round_trips(xtcl, text):
    t = xtcl.parse(text)
    assert xtcl.show(t) == text
    assert xtcl.parse(xtcl.show(t)) == t


def test_application_is_left_associative(xcl):
    assert xcl.parse("S K I") == xcl.parse("(S K) I")
    assert xcl.parse("S (K I)") != xcl.parse("S K I")


def test_infix_precedence(xnccl, xptcl):
    t = xnccl.parse("S K (+) I || K")
    assert t.op.name == "par"
    assert t.children[0].op.name == "plus"
    assert xnccl.show(t) == "S K (+) I || K"
    assert xptcl.show(xptcl.parse("e ⊕ I e")) == "e (+) I e"


def test_explicit_subscripts(xtcl):
    t = xtcl.parse("I[unit -> unit]")
    assert t.sort == arrow(arrow(UNIT, UNIT), arrow(UNIT, UNIT))
    assert xtcl.show(t) == "I[unit -> unit]"


def test_unconstrained_variables_default_to_unit(xtcl):
    assert xtcl.parse("I").sort == arrow(UNIT, UNIT)
    assert xtcl.parse("K e").sort == arrow(UNIT, UNIT)


def test_self_application_is_ill_typed(xtcl):
    with pytest.raises(IllTyped):
        xtcl.parse("S I I e")


def test_terminal_is_not_a_function(xtcl):
    with pytest.raises(IllTyped):
        xtcl.parse("e e")


@pytest.mark.parametrize(
    "lang_fixture, text",
    [
        ("xtcl", "S K ("),
        ("xtcl", "Q"),
        ("xtcl", "I || I"),
        ("xtcl", "S'(K, I)"),
        ("xcl", "I[unit]"),
        ("xcl", "e"),
        ("xcl", ""),
        ("lam", "\\x. y"),
        ("lam", "\\. x"),
    ],
)
def test_parse_errors(request, lang_fixture, text):
    lang = request.getfixturevalue(lang_fixture)
    with pytest.raises(ParseError):
        lang.parse(text)


def test_type_grammar():
    t = parse_type("(unit -> unit) -> unit")
    assert t.source.source is not None
    assert t.target.source is None


def test_lambda_binders_and_levels(lam):
    t = lam.parse("\\x y. x")
    assert lam.show(t) == "λx0. λx1. x0"
    assert lam.parse("λa. λb. a") == t
    assert lam.show(lam.parse("(\\x. x) (\\x. x x)")) == "(λx0. x0) (λx0. x0 x0)"


def test_lambda_free_names_form_the_context(lam):
    t = lam.parse("f (\\x. x)", free=["f"])
    assert t.sort == 1
    assert lam.show(t) == "x0 (λx1. x1)"
