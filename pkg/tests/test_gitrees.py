from fractions import Fraction

import pytest

from core.behavior import StepTag
from core.gitrees import (
    Branch,
    FiniteTree,
    GuardednessViolation,
    InstrumentedDenotation,
    Observer,
    ProbeSet,
    ProbeSetEmpty,
    RecordingDenotation,
    distance,
    first_difference,
    graft,
    obs_equal,
    tower_tree,
    truncate,
    unravel,
    underlying,
)
from core.gsos_service import gsos_service
from core.kernel import SortMismatch

TERMINAL = FiniteTree("terminal")


def denote(lang, text):
    return gsos_service.denote(lang, lang.parse(text))


def test_truncation_of_terminal_and_reduct(xtcl):
    probes = xtcl.denotational_probes(3, 3)
    assert truncate(denote(xtcl, "e"), 3, probes) == TERMINAL
    assert truncate(denote(xtcl, "I e"), 1, probes) == FiniteTree("reduct", branches=(Branch(TERMINAL),))
    assert truncate(denote(xtcl, "I e"), 0, probes) == FiniteTree("reduct")


def test_function_nodes_are_probed_in_order(xtcl):
    tree = truncate(denote(xtcl, "I"), 1, xtcl.denotational_probes(3, 3))
    assert tree.tag == "function"
    assert [b.label for b in tree.branches] == ["e", "I e"]
    assert tree.branches[0].tree == TERMINAL


def test_unravel_reads_steps_and_outcome(xtcl, xcl):
    assert str(unravel(denote(xtcl, "I e"), 100)) == "(1, ✓)"
    assert str(unravel(denote(xtcl, "e"), 100)) == "(0, ✓)"
    assert str(unravel(denote(xtcl, "S K I e"), 100)) == "(5, ✓)"
    assert str(unravel(denote(xtcl, "I"), 100)) == "(0, →t)"
    assert str(unravel(denote(xcl, "S I I (S I I)"), 20)) == "divergent"


def test_observational_equality_and_distance(xtcl):
    probes = xtcl.denotational_probes(3, 3)
    once, twice = denote(xtcl, "I e"), denote(xtcl, "I (I e)")
    assert obs_equal(once, twice, 0, probes)
    assert not obs_equal(once, twice, 1, probes)
    assert distance(once, twice, 5, probes) == Fraction(1, 2)
    assert distance(once, once, 5, probes) == 0
    with pytest.raises(SortMismatch):
        distance(once, denote(xtcl, "I"), 5, probes)


def test_first_difference_path(xtcl):
    probes = xtcl.denotational_probes(3, 3)
    left = truncate(denote(xtcl, "I (I e)"), 2, probes)
    right = truncate(denote(xtcl, "I e"), 2, probes)
    diff = first_difference(left, right)
    assert diff.path == ("step",)
    assert diff.describe() == "step tags → vs ✓"
    assert first_difference(left, left) is None


def test_guarded_denotations_need_a_stage(xcl):
    with pytest.raises(ValueError):
        denote(xcl, "K").node(None)


def test_restricted_views_refuse_deeper_stages(xcl, xtcl):
    view = denote(xcl, "K").restrict(1)
    assert view.node(1).tag is StepTag.FUNCTION
    with pytest.raises(GuardednessViolation):
        view.node(2)
    e = denote(xtcl, "e")
    assert e.restrict(1) is e


def test_graft_switches_above_the_stage(xcl, xtcl):
    grafted = graft(denote(xcl, "K"), denote(xcl, "I K"), 0)
    assert grafted.node(0).tag is StepTag.FUNCTION
    assert grafted.node(1).tag is StepTag.REDUCT
    with pytest.raises(SortMismatch):
        graft(denote(xtcl, "e"), denote(xtcl, "I"), 0)


def test_instrumented_denotations_record_forcing(xcl):
    forced = []
    watched = InstrumentedDenotation(denote(xcl, "K"), 1, forced)
    watched.node(0)
    watched.node(1)
    assert forced == []
    watched.node(3)
    assert forced == [3]
    rebuilt = watched.map_parts(lambda part: part)
    rebuilt.node(2)
    assert forced == [3, 2]


def test_empty_probe_pools(xtcl):
    probes = ProbeSet.explicit(xtcl.signature, [])
    with pytest.raises(ProbeSetEmpty):
        probes.for_sort(xtcl.default_sort)


def test_environments_for_open_contexts(lam):
    probes = lam.probes(3, 2)
    assert probes.environments(0) == []
    envs = probes.environments(2)
    assert len(envs) == 2
    assert envs[0][0] == "[λx0. x0, λx0. x0]"
    assert envs[0][1].context == 0


def test_tower_tree_tables_grow_with_the_iteration(xtcl, small_probes):
    model = gsos_service.operational(xtcl)
    observer = Observer(model.behavior, lambda t: t.sort, small_probes(xtcl), guarded=False)
    identity = xtcl.parse("I")
    assert tower_tree(observer, identity, 2, 0) == FiniteTree("value", label="1")
    assert len(tower_tree(observer, identity, 2, 1).branches) == 1
    assert len(tower_tree(observer, identity, 2, 2).branches) == 2


def test_recording_denotations_collect_their_inputs(xcl):
    s, i = denote(xcl, "S"), denote(xcl, "I")
    recorder = RecordingDenotation(denote(xcl, "K"))
    partial = recorder.node(2).step.apply(s)
    assert isinstance(partial, RecordingDenotation)
    result = partial.node(1).step.apply(i)
    assert isinstance(result, RecordingDenotation)
    assert recorder.inputs == [s, i]
    assert partial.inputs is recorder.inputs


def test_underlying_strips_views(xcl):
    k = denote(xcl, "K")
    assert underlying(RecordingDenotation(k.restrict(2))) is k
    assert underlying(k) is k


def test_extended_pools_append_new_states(xtcl):
    e, ie, i = denote(xtcl, "e"), denote(xtcl, "I e"), denote(xtcl, "I")
    base = ProbeSet.explicit(xtcl.signature, [xtcl.parse("e")], embed=lambda t: e, show=xtcl.show)
    extended = base.extended([ie, ie, e, i])
    assert extended.for_sort(xtcl.default_sort) == [("e", e), ("input 0", ie)]
    assert extended.for_sort(i.sort) == [("input 2", i)]
    with pytest.raises(ProbeSetEmpty):
        base.for_sort(i.sort)
