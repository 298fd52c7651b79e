import pytest

from core.behavior import BranchingEffect
from core.bisim_service import bisim_service
from core.gitrees import Observer
from core.gsos_service import gsos_service
from core.harness import gen_terms
from core.kernel import UNTYPED, WorkbenchError
from core.stage_service import FinalFamily, StageTooLarge, TerminalFamily, stage_service


def keys(elements):
    return [e.key for e in elements]


def test_deterministic_stage_sizes(xcl):
    assert [len(stage_service.enumerate_stage(xcl, n)) for n in (0, 1)] == [2, 6]


@pytest.mark.slow
def test_deterministic_stage_two(xcl):
    assert len(stage_service.enumerate_stage(xcl, 2)) == 5446


def test_powerset_stage_sizes(xnccl):
    assert [len(stage_service.enumerate_stage(xnccl, n)) for n in (0, 1)] == [3, 35]


def test_powerset_stage_two_exceeds_the_cap(xnccl):
    with pytest.raises(StageTooLarge):
        stage_service.enumerate_stage(xnccl, 2)


def test_stage_zero_keys(xcl, xnccl):
    assert keys(stage_service.enumerate_stage(xcl, 0)) == ["R(*)", "F<>"]
    assert keys(stage_service.enumerate_stage(xnccl, 0)) == ["R{}", "R{*}", "F<>"]


def test_stage_one_keys(xcl):
    found = keys(stage_service.enumerate_stage(xcl, 1))
    assert found[:2] == ["R(R(*))", "R(F<>)"]
    assert "F<R(*)>R(*)|F<>>F<>>" in found
    assert len(set(found)) == len(found)


def test_restriction_lands_in_the_previous_stage(xcl, xnccl):
    for lang in (xcl, xnccl):
        family = stage_service.family(lang)
        below = set(keys(family.stage(0)))
        assert {family.restrict(e).key for e in family.stage(1)} == below


def test_stage_zero_has_no_restriction(xcl):
    family = stage_service.family(xcl)
    with pytest.raises(ValueError):
        family.restrict(family.stage(0)[0])


def test_bounds_are_enforced(xcl):
    with pytest.raises(StageTooLarge):
        stage_service.enumerate_stage(xcl, 3)
    with pytest.raises(ValueError):
        stage_service.enumerate_stage(xcl, -1)
    small = FinalFamily(BranchingEffect.DETERMINISTIC, cap=3)
    with pytest.raises(StageTooLarge):
        small.stage(1)


def test_typed_and_probabilistic_languages_have_no_stages(xtcl, xptcl):
    with pytest.raises(WorkbenchError):
        stage_service.enumerate_stage(xtcl, 0)
    with pytest.raises(WorkbenchError):
        FinalFamily(BranchingEffect.DISTRIBUTION)


def test_approximants(xcl):
    assert isinstance(stage_service.approximant(xcl, 0), TerminalFamily)
    first = stage_service.approximant(xcl, 1)
    assert [len(first.stage(n)) for n in (0, 1, 2)] == [2, 4, 8]
    with pytest.raises(StageTooLarge):
        stage_service.approximant(xcl, 99)


def stage_samples(lang):
    return gen_terms(lang, UNTYPED, 5, 12, seed=3)


@pytest.mark.parametrize(
    "name, top",
    [
        ("xcl", 3),
        ("xnccl", 3),
        pytest.param("xcl", 6, marks=pytest.mark.slow),
        pytest.param("xnccl", 6, marks=pytest.mark.slow),
    ],
)
def test_later_stages_restrict_to_earlier_ones(request, name, top):
    lang = request.getfixturevalue(name)
    model = gsos_service.denotational(lang)
    observer = Observer.for_denotations(lang.denotational_probes(3, 2), guarded=True)
    for t in stage_samples(lang):
        d = model.denote(t)
        for n in range(top + 1):
            assert observer.node_tree(d.node(n + 1), t.sort, n) == observer.tree(d, n), (lang.show(t), n)


@pytest.mark.parametrize("name", ["xcl", "xnccl"])
def test_operational_stages_agree_below_the_cut(request, name):
    lang = request.getfixturevalue(name)
    model = gsos_service.operational(lang)
    observer = bisim_service.observer(lang, lang.probes(3, 2))
    for t in stage_samples(lang):
        for n in range(7):
            assert model.behavior(t, n + 1).tag == model.behavior(t, n).tag
            if n <= 3:
                assert observer.node_tree(model.behavior(t, n + 1), t.sort, n) == observer.tree(t, n), (lang.show(t), n)
