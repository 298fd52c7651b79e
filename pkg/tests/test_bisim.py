import pytest

from core.behavior import EffectMismatch
from core.bisim_service import UniverseExplosion, bisim_service
from core.gsos_service import gsos_service
from core.kernel import SortMismatch


def parse_all(lang, *texts):
    return [lang.parse(text) for text in texts]


def test_terminal_and_reduct_are_distinguished_at_the_root(xtcl, small_probes):
    e, ie = parse_all(xtcl, "e", "I e")
    report = bisim_service.bisim(xtcl, e, ie, 1, small_probes(xtcl))
    assert report.verdict == "distinguished"
    assert report.witness.describe() == "root tags ✓ vs →"


def test_same_step_count_and_outcome_is_related(xtcl, small_probes):
    p, q = parse_all(xtcl, "I e", "K'(e) e")
    report = bisim_service.bisim(xtcl, p, q, 4, small_probes(xtcl))
    assert report.related
    assert report.witness is None
    assert not bisim_service.replay_witness(xtcl, p, q, report, small_probes(xtcl))


def test_witness_through_a_probe_replays(xtcl, small_probes):
    probes = small_probes(xtcl)
    p, q = parse_all(xtcl, "K e", "K (I e)")
    report = bisim_service.bisim(xtcl, p, q, 3, probes)
    assert report.witness.path == ("step", "probe e")
    assert report.witness.describe() == "step / probe e tags ✓ vs →"
    assert "I e" in report.probe_labels
    assert bisim_service.replay_witness(xtcl, p, q, report, probes)


def test_bisim_arguments_are_checked(xtcl, small_probes):
    e, i = parse_all(xtcl, "e", "I")
    with pytest.raises(SortMismatch):
        bisim_service.bisim(xtcl, e, i, 2, small_probes(xtcl))
    with pytest.raises(ValueError):
        bisim_service.bisim(xtcl, e, e, -1, small_probes(xtcl))


def test_partition_groups_by_behavior(xtcl, small_probes):
    universe = parse_all(xtcl, "e", "I e", "K'(e) e", "I (I e)")
    result = bisim_service.partition(xtcl, universe, 3, small_probes(xtcl))
    assert [len(block) for block in result.blocks] == [1, 2, 1]
    assert result.related(universe[1], universe[2])
    assert not result.related(universe[1], universe[3])
    assert result.closure_size >= len(universe)
    with pytest.raises(KeyError):
        result.block_of(xtcl.parse("I (I (I e))"))


def test_probabilistic_choice_commutes(xptcl, small_probes):
    p, q, r = parse_all(xptcl, "e (+) I e", "I e (+) e", "I e")
    result = bisim_service.prob_bisim(xptcl, [p, q, r], 3, small_probes(xptcl))
    assert result.related(p, q)
    assert not result.related(p, r)


def test_nondeterministic_choice_commutes(xnccl, small_probes):
    p, q = parse_all(xnccl, "I K (+) K", "K (+) I K")
    assert bisim_service.pow_bisim(xnccl, [p, q], 2, small_probes(xnccl)).related(p, q)


def test_effect_specific_partitions_check_the_language(xtcl, xptcl):
    with pytest.raises(EffectMismatch):
        bisim_service.prob_bisim(xtcl, [xtcl.parse("e")])
    with pytest.raises(EffectMismatch):
        bisim_service.pow_bisim(xptcl, [xptcl.parse("e")])


def test_closure_is_capped(xtcl, small_probes):
    with pytest.raises(UniverseExplosion):
        bisim_service.closure(xtcl, [xtcl.parse("I (I e)")], 3, small_probes(xtcl), cap=2)


def test_states_past_the_closure_are_sealed_by_step_tag(xtcl):
    e, ie, iie, ke = parse_all(xtcl, "e", "I e", "I (I e)", "K'(e) e")
    of = bisim_service._block_lookup({ie: 0}, gsos_service.operational(xtcl))
    assert of(ie) == 0
    assert of(e) != of(iie)
    assert of(iie) == of(ke)
    assert of(e) == (str(e.sort), "terminal")
