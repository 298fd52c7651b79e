import pytest

from core.behavior import BranchingEffect, StepTag
from core.config import RULES_DIR
from core.languages import LANGUAGE_NAMES, get_language
from core.rules import (
    AmbiguousRules,
    NoRuleApplies,
    RuleSyntaxError,
    format_law,
    parse_law,
    parse_rule,
)

TOY = """\
law toy
effect deterministic
guarded no
rank app 0
rank I 1

I => fun ?
app(F, _) => reduct f0(x1)
"""


@pytest.mark.parametrize("name", LANGUAGE_NAMES)
def test_shipped_tables_are_canonical(name):
    lang = get_language(name)
    text = (RULES_DIR / lang.rules_file).read_text(encoding="utf-8")
    assert format_law(parse_law(text)) == text


def test_rule_round_trip():
    for text in (
        "app(R, _) => reduct app(y0, x1)",
        "app(_, _) @0 => reduct *",
        "plus(_, _) => reduct x0 | x1",
        "lam(_) => fun g0[id, ?] with subst lam(g0[wk(u), fresh])",
        "var => terminal with subst u[j]",
    ):
        assert str(parse_rule(text)) == text


def test_parse_law_headers():
    law = parse_law(TOY)
    assert law.name == "toy"
    assert law.effect is BranchingEffect.DETERMINISTIC
    assert not law.guarded
    assert law.rank_of("I") == 1
    assert law.rank_of("S") is None
    assert len(law.rules) == 2


def test_select_requires_a_rule():
    law = parse_law(TOY)
    assert str(law.select("app", [StepTag.FUNCTION, StepTag.TERMINAL]).pattern) == "app(F, _)"
    with pytest.raises(NoRuleApplies):
        law.select("app", [StepTag.REDUCT, StepTag.TERMINAL])


def test_with_rule_replaces_same_pattern():
    law = parse_law(TOY).with_rule(parse_rule("app(F, _) => reduct x0"))
    assert len(law.rules) == 2
    assert str(law.rules[1]) == "app(F, _) => reduct x0"


@pytest.mark.parametrize(
    "body",
    [
        "app(F, _) => reduct y0",  # y0 needs an R premise
        "app(R, _) => reduct f0(x1)",  # f0 needs an F premise
        "I => reduct x0",  # no premise 0
        "app(R, _) => reduct app(?, x1)",  # ? outside fun
        "app(R, _) @0 => reduct *",  # stage guard in an unguarded law
    ],
)
def test_shape_errors(body):
    with pytest.raises(RuleSyntaxError):
        parse_law(TOY + body + "\n")


def test_overlapping_rules_are_rejected():
    with pytest.raises(AmbiguousRules):
        parse_law(TOY + "app(_, T) => terminal\n")


def test_deterministic_laws_take_one_reduct():
    with pytest.raises(RuleSyntaxError):
        parse_law(TOY + "app(R, _) => reduct x0 | x1\n")


def test_syntax_errors_name_the_line():
    with pytest.raises(RuleSyntaxError, match="line 1"):
        parse_rule("app(Q, _) => terminal")
    with pytest.raises(RuleSyntaxError):
        parse_law("effect deterministic\n")
