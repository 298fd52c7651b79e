from fractions import Fraction

import pytest

from core.behavior import Det, StepTag
from core.gsos_service import (
    DenotationalModel,
    FlatnessViolation,
    check_bialgebra_law,
    check_flatness,
    gsos_service,
)
from core.kernel import UNTYPED, UnboundMetavariable, meta
from core.languages import LANGUAGE_NAMES, get_language
from core.rules import parse_law

NESTED = """\
law nested
effect deterministic
guarded no
rank app 0
rank I 1

I => fun ?
app(R, _) => reduct app(app(y0, x1), x1)
app(F, _) => reduct f0(x1)
"""


def trace(lang, text, fuel=50, **kwargs):
    return gsos_service.run_trace(lang, lang.parse(text), fuel, **kwargs)


def shown(lang, result):
    return [lang.show(entry.term) for entry in result.entries]


def test_typed_trace_reaches_a_terminal(xtcl):
    result = trace(xtcl, "S K I e")
    assert shown(xtcl, result) == ["S K I e", "S'(K) I e", "S''(K, I) e", "(K e)(I e)", "K'(e)(I e)", "e"]
    assert [entry.kind for entry in result.entries] == ["reduct"] * 5 + ["terminal"]
    assert not result.diverged


def test_untyped_trace_stops_at_a_function(xcl):
    result = trace(xcl, "S I I K")
    assert shown(xcl, result)[-1] == "K'(I K)"
    assert result.entries[-1].kind == "function"


def test_stage_budget_ends_guarded_traces(xcl):
    result = trace(xcl, "S I I K", stage=2)
    assert len(result.entries) == 3
    assert result.entries[-1].kind == "later"
    assert not result.diverged


def test_fuel_ends_divergent_traces(xcl):
    result = trace(xcl, "S I I (S I I)", fuel=3)
    assert len(result.entries) == 4
    assert result.entries[-1].kind == "fuel"
    assert result.diverged


def test_probabilistic_choice_carries_weights(xptcl):
    result = trace(xptcl, "e (+) I e")
    first = result.entries[0]
    assert [w for _, w in first.branches] == [Fraction(1, 2), Fraction(1, 2)]
    assert first.chosen == 0
    assert shown(xptcl, result) == ["e (+) I e", "e"]
    sampled = trace(xptcl, "e (+) I e", branch="sample", seed=3)
    assert sampled.entries[0].chosen in (0, 1)
    assert sampled == trace(xptcl, "e (+) I e", branch="sample", seed=3)


def test_nondeterministic_choice_has_no_weights(xnccl):
    result = trace(xnccl, "I K (+) K")
    assert [w for _, w in result.entries[0].branches] == [None, None]
    assert shown(xnccl, result) == ["I K (+) K", "I K", "K"]
    assert [entry.kind for entry in result.entries] == ["reduct", "reduct", "function"]


def test_lambda_beta_step(lam):
    result = trace(lam, "(\\x. x) (\\y. y)")
    assert shown(lam, result) == ["(λx0. x0) (λx0. x0)", "λx0. x0"]
    assert result.entries[-1].kind == "function"


def test_trace_arguments_are_checked(xtcl):
    with pytest.raises(ValueError):
        trace(xtcl, "I e", fuel=-1)
    with pytest.raises(ValueError):
        trace(xtcl, "I e", branch="last")


def test_guarded_application_collapses_at_stage_zero(xcl):
    model = gsos_service.operational(xcl)
    t = xcl.parse("I K")
    assert model.behavior(t, 0).tag is StepTag.REDUCT
    later = model.behavior(t, 5).step.bag
    assert isinstance(later, Det)
    assert xcl.show(later.value) == "K"
    assert model.stage_key(5) == model.stage_key(None) == 1


def test_operational_model_needs_closed_terms(xcl):
    with pytest.raises(UnboundMetavariable):
        gsos_service.operational(xcl).behavior(meta("x", UNTYPED))


@pytest.mark.parametrize("name", LANGUAGE_NAMES)
def test_shipped_laws_are_relatively_flat(name):
    assert check_flatness(get_language(name).law).flat


def test_nested_same_rank_operator_is_not_flat(xcl):
    law = parse_law(NESTED)
    report = check_flatness(law)
    assert not report.flat
    assert any("nested app" in v for v in report.violations)
    with pytest.raises(FlatnessViolation):
        DenotationalModel(law, xcl.signature)


def test_denotations_are_shared(xtcl):
    t = xtcl.parse("S K I e")
    assert gsos_service.denote(xtcl, t) is gsos_service.denote(xtcl, t)


@pytest.mark.parametrize(
    "name, text",
    [("xtcl", "S K I e"), ("xcl", "S I I K"), ("xptcl", "e (+) I e"), ("xnccl", "I K || K")],
)
def test_denotational_model_satisfies_the_law(name, text):
    lang = get_language(name)
    report = check_bialgebra_law(
        lang.law,
        gsos_service.denotational(lang),
        [lang.parse(text)],
        2,
        lang.denotational_probes(3, 3),
        show=lang.show,
    )
    assert report.holds, report.violations
    assert report.checked > 0


def test_operational_model_satisfies_the_law_exactly(xtcl):
    model = gsos_service.operational(xtcl)
    report = check_bialgebra_law(
        xtcl.law, model.carrier, [xtcl.parse("S K I e")], 1, xtcl.probes(3, 3), exact=True, show=xtcl.show
    )
    assert report.holds


def step_of(lang, text, stage=1):
    return gsos_service.operational(lang).behavior(lang.parse(text), stage).step


def reducts(lang, text):
    step = step_of(lang, text)
    assert step.tag is StepTag.REDUCT
    return set(step.bag.support())


def parsed(lang, *texts):
    return {lang.parse(text) for text in texts}


def test_parallel_steps_both_sides_together(xnccl):
    assert reducts(xnccl, "(I K) || (I K)") == parsed(xnccl, "K || K")
    assert reducts(xnccl, "(I K (+) K) || (I K)") == parsed(xnccl, "(I K) || K", "K || K")


def test_parallel_steps_one_side_past_a_value(xnccl):
    assert reducts(xnccl, "(I K) || K") == parsed(xnccl, "K || K")
    assert reducts(xnccl, "K || (I K)") == parsed(xnccl, "K || K")
    assert reducts(xnccl, "K || (I K (+) K)") == parsed(xnccl, "K || (I K)", "K || K")


def test_parallel_values_form_a_function(xnccl):
    step = step_of(xnccl, "K || I")
    assert step.tag is StepTag.FUNCTION
    assert step.apply(xnccl.parse("K")) == xnccl.parse("(K K) || (I K)")


def test_choice_under_an_application_splits_the_mass(xptcl):
    step = step_of(xptcl, "(I (+) K'(e)) e", stage=None)
    assert step.bag.effect.value == "distribution"
    assert step.bag.weight(xptcl.parse("I e")) == Fraction(1, 2)
    assert step.bag.weight(xptcl.parse("K'(e) e")) == Fraction(1, 2)
    nested = step_of(xptcl, "((I (+) K'(e)) (+) I) e", stage=None)
    assert dict(nested.bag.entries) == {
        xptcl.parse("(I (+) K'(e)) e"): Fraction(1, 2),
        xptcl.parse("I e"): Fraction(1, 2),
    }
