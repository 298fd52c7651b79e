import random

import pytest

from core.harness import gen_terms
from core.kernel import (
    UNTYPED,
    ArityMismatch,
    SortMismatch,
    UnboundMetavariable,
    UninhabitedSort,
    compositions,
    enumerate_terms,
    fold,
    make_term,
    meta,
    primitive_recursion,
)


def test_make_term_checks_arity(xcl):
    app = xcl.signature.instantiate("app", [UNTYPED, UNTYPED])
    with pytest.raises(ArityMismatch):
        make_term(app, [])


def test_make_term_checks_sorts(xtcl):
    e = xtcl.parse("e")
    unit = e.sort
    app = xtcl.signature.instantiate("app", [xtcl.parse("I").sort, unit])
    with pytest.raises(SortMismatch):
        make_term(app, [e, e])


def test_fold_by_operator_name(xcl):
    t = xcl.parse("S K (I K)")
    size = fold({name: (lambda *xs: 1 + sum(xs)) for name in xcl.signature.family_names}, t)
    assert size == t.size == 7


def test_fold_rejects_metavariables():
    with pytest.raises(UnboundMetavariable):
        fold(lambda op, xs: 0, meta("x", UNTYPED))


def test_primitive_recursion_sees_children(xcl):
    t = xcl.parse("I K")
    shown = primitive_recursion(lambda op, pairs: op.name + "".join(f"<{c}>" for c, _ in pairs), t)
    assert shown == "app<I><K>"


def test_compositions():
    assert list(compositions(3, 2)) == [(1, 2), (2, 1)]
    assert list(compositions(0, 0)) == [()]
    assert list(compositions(1, 2)) == []


def test_enumeration_counts(xcl):
    space = xcl.signature.term_space
    assert space.count(UNTYPED, 1) == 3
    assert space.count(UNTYPED, 2) == 6
    assert space.count(UNTYPED, 3) == 30
    terms = enumerate_terms(xcl.signature, UNTYPED, 3)
    assert len(terms) == len(set(terms)) == 39
    assert [t.size for t in terms] == sorted(t.size for t in terms)


def test_enumeration_in_an_empty_context(lam):
    terms = enumerate_terms(lam.signature, 0, 2)
    assert [lam.show(t) for t in terms] == ["λx0. x0"]


def test_sampling_is_seeded_and_sized(xcl):
    space = xcl.signature.term_space
    first = space.sample(UNTYPED, 5, random.Random(7))
    again = space.sample(UNTYPED, 5, random.Random(7))
    assert first == again
    assert first.size == 5


def test_sampling_uninhabited_size(lam):
    with pytest.raises(UninhabitedSort):
        lam.signature.term_space.sample(0, 1, random.Random(0))


def test_subterms_are_post_order_and_distinct(xcl):
    t = xcl.parse("(I K)(I K)")
    subterms = t.subterms()
    assert subterms[-1] == t
    assert len(subterms) == len(set(subterms)) == 4


def kernel_samples(lang):
    return [t for seed in (1, 2) for t in gen_terms(lang, lang.default_sort, 6, 25, seed)]


@pytest.mark.parametrize("name", ["xcl", "xtcl"])
def test_fold_with_the_term_algebra_is_the_identity(request, name):
    lang = request.getfixturevalue(name)
    for t in kernel_samples(lang):
        assert fold(make_term, t) == t


@pytest.mark.parametrize("name", ["xcl", "xtcl"])
def test_primitive_recursion_ignoring_children_is_fold(request, name):
    lang = request.getfixturevalue(name)

    def depth(op, values):
        return 1 + max(values, default=0)

    for t in kernel_samples(lang):
        assert primitive_recursion(lambda op, pairs: depth(op, [v for _, v in pairs]), t) == fold(depth, t)
        assert fold(depth, t) == depth(t.op, [fold(depth, c) for c in t.children])


@pytest.mark.parametrize("name", ["xcl", "xtcl"])
def test_enumeration_grows_with_the_size_bound(request, name):
    lang = request.getfixturevalue(name)
    for k in range(4):
        smaller = enumerate_terms(lang.signature, lang.default_sort, k)
        larger = enumerate_terms(lang.signature, lang.default_sort, k + 1)
        assert set(smaller) <= set(larger)
        assert larger[: len(smaller)] == smaller
