import pytest

from core.harness import (
    MUTATIONS,
    UnknownSuite,
    check_adequacy,
    check_choice,
    check_compositionality,
    check_guardedness,
    check_oracles,
    check_pentagon,
    check_tower,
    check_ultrametric,
    gen_terms,
    get_mutation,
    run_suite,
    suite_parameters,
)
from core.kernel import UNTYPED, UninhabitedSort
from core.languages import get_language

SMALL = {"probe_size": 3, "depth": 3}


def test_generated_terms_are_distinct_and_bounded(xcl):
    terms = gen_terms(xcl, UNTYPED, 4, 20, seed=1)
    assert len(terms) == len(set(terms)) == 20
    assert all(t.size <= 4 for t in terms)
    assert terms == gen_terms(xcl, UNTYPED, 4, 20, seed=1)


def test_generation_stops_at_the_population(xcl, lam):
    assert len(gen_terms(xcl, UNTYPED, 1, 10, seed=0)) == 3
    assert gen_terms(xcl, UNTYPED, 3, 0, seed=0) == []
    with pytest.raises(UninhabitedSort):
        gen_terms(lam, 0, 1, 5, seed=0)


def test_mutation_registry(xtcl):
    assert get_mutation(None) is None
    with pytest.raises(UnknownSuite):
        get_mutation("K-forgets")
    mutation = get_mutation("I-returns-I")
    assert mutation.law_for(xtcl).name == "xtcl~I-returns-I"
    assert MUTATIONS["unguarded-arguments"].apply(xtcl) is xtcl
    assert MUTATIONS["par-forgets-right"].languages == ("xnccl",)


def test_pentagon_holds_for_shipped_laws(xtcl, lam):
    assert check_pentagon(xtcl, samples=[xtcl.parse("S K I e")], **SMALL).verdict == "pass"
    assert check_pentagon(lam, samples=[lam.parse("(\\x. x) (\\y. y)")], **SMALL).verdict == "pass"


@pytest.mark.parametrize(
    "lang_fixture, sample, mutation",
    [
        ("xtcl", "K'(e)", "K'-drops-argument"),
        ("xtcl", "I e", "I-returns-I"),
        ("lam", "(\\x. x) (\\x. x) (\\x. x)", "lambda-app-drops-argument"),
        ("xptcl", "e (+) I e", "plus-biased"),
        ("xnccl", "(I K) || (I K)", "par-forgets-right"),
    ],
)
def test_pentagon_catches_rule_mutations(request, lang_fixture, sample, mutation):
    lang = request.getfixturevalue(lang_fixture)
    record = check_pentagon(lang, samples=[lang.parse(sample)], mutation=get_mutation(mutation), **SMALL)
    assert record.verdict == "fail"
    assert record.mutation == mutation
    assert record.witness is not None


def test_adequacy_witnesses_distinguished_pairs(xtcl):
    pairs = [(xtcl.parse("I e"), xtcl.parse("I (I e)"))]
    record = check_adequacy(xtcl, pairs=pairs, depth=2, probe_size=3)
    assert record.verdict == "pass"
    assert record.details["distinguished"] == 1
    assert record.details["witnessed"] == 1


def test_adequacy_catches_a_collapsing_denotation(xtcl):
    pairs = [(xtcl.parse("I e"), xtcl.parse("I (I e)"))]
    record = check_adequacy(xtcl, pairs=pairs, depth=2, probe_size=3, mutation=get_mutation("app-function-ignores-argument"))
    assert record.verdict == "fail"


def test_adequacy_demands_enough_distinguished_pairs(xtcl):
    record = check_adequacy(xtcl, count=4, depth=1, probe_size=3, max_size=3, min_distinguished=1000)
    assert record.verdict == "fail"
    assert "distinguished pair(s)" in record.witness
    assert record.params["min_distinguished"] == 1000


@pytest.mark.slow
@pytest.mark.parametrize("name", ["xtcl", "xptcl", "xcl", "xnccl", "lambda"])
def test_adequacy_on_sampled_pairs(name):
    record = check_adequacy(get_language(name), count=300, depth=5, probe_size=3)
    assert record.verdict == "pass", record.witness
    assert record.details["distinguished"] >= 50
    assert record.details["witnessed"] == record.details["distinguished"]


def test_compositionality(xtcl):
    samples = [xtcl.parse("I e")]
    record = check_compositionality(xtcl, samples=samples, **SMALL)
    assert record.verdict == "pass"
    assert record.details["skipped"] == 0
    broken = check_compositionality(
        xtcl, samples=samples, mutation=get_mutation("app-function-ignores-argument"), **SMALL
    )
    assert broken.verdict == "fail"
    assert "congruence_checked" in broken.details


def test_substituting_equal_subterms_preserves_the_whole(xtcl):
    samples = [xtcl.parse(text) for text in ("S K I e", "K'(I e) e", "I (I e)")]
    record = check_compositionality(xtcl, samples=samples, **SMALL)
    assert record.verdict == "pass"
    assert record.details["congruence_checked"] > 0
    assert record.details["congruence_violations"] == 0


@pytest.mark.slow
@pytest.mark.parametrize("name", ["xtcl", "xcl"])
def test_congruence_holds_on_sampled_terms(request, name):
    lang = request.getfixturevalue(name)
    record = check_compositionality(lang, count=40, depth=4, probe_size=3, max_size=6)
    assert record.verdict == "pass", record.witness
    assert record.details["congruence_checked"] > 0
    assert record.details["congruence_violations"] == 0


def test_compositionality_counts_terms_without_probes(xtcl):
    record = check_compositionality(xtcl, samples=[xtcl.parse("S K I e")], depth=2, probe_size=0)
    assert record.details["skipped"] > 0


def test_guardedness(xcl, xtcl):
    assert check_guardedness(xcl, count=20, depth=3, probe_size=3, max_size=5).verdict == "pass"
    forced = check_guardedness(
        xcl, count=20, depth=3, probe_size=3, max_size=5, mutation=get_mutation("unguarded-arguments")
    )
    assert forced.verdict == "fail"
    assert check_guardedness(xtcl).verdict == "skipped"


def test_stage_tower(xcl):
    record = check_tower(xcl, bound=2)
    assert record.verdict == "pass"
    assert record.details["sizes"] == {"0": 2, "1": 6}


@pytest.mark.slow
def test_stage_tower_catches_unfiltered_tuples(xcl):
    record = check_tower(xcl, bound=3, mutation=get_mutation("unfiltered-tuples"))
    assert record.verdict == "fail"
    assert "stage 2" in record.witness


def test_typed_tower(xtcl, lam):
    assert check_tower(xtcl, bound=1, depth=2, probe_size=3, count=3, max_size=4).verdict == "pass"
    assert check_tower(lam).verdict == "skipped"


def test_lambda_oracles(lam, xtcl):
    record = check_oracles(lam, count=20, max_size=6)
    assert record.verdict == "pass"
    assert record.details["steps"] > 0
    assert check_oracles(xtcl).verdict == "skipped"


def test_ultrametric(xtcl):
    record = check_ultrametric(xtcl, count=10, depth=3, probe_size=3, max_size=5)
    assert record.verdict == "pass"
    assert record.checked > 0


def test_choice(xptcl, xtcl):
    assert check_choice(xptcl, count=5, depth=4, max_size=4).verdict == "pass"
    assert check_choice(xtcl).verdict == "skipped"


def test_suite_parameters():
    assert suite_parameters("choice") == ["count", "depth", "probe_size", "probe_limit", "max_size"]
    assert "bound" in suite_parameters("tower")
    with pytest.raises(UnknownSuite):
        suite_parameters("smoke")


def test_run_suite_skips_untouched_languages():
    records = run_suite("pentagon", ["xtcl"], mutation="par-forgets-right")
    assert [r.verdict for r in records] == ["skipped"]
    assert records[0].details["reason"] == "mutation does not apply"


def test_run_suite_rejects_unknown_parameters():
    with pytest.raises(UnknownSuite):
        run_suite("tower", ["xcl"], params={"width": 3})


def test_run_suite_records_the_run():
    records = run_suite("oracles", ["xtcl", "lambda"], seed=5, params={"count": 10, "max_size": 5})
    assert [r.language for r in records] == ["xtcl", "lambda"]
    assert records[0].verdict == "skipped"
    assert records[1].seed == 5
    assert records[1].params == {"count": 10, "max_size": 5}
