from fractions import Fraction

import pytest

from core.behavior import (
    TERMINAL,
    BehaviorNode,
    BranchingEffect,
    Det,
    Dist,
    EffectMismatch,
    Environment,
    FunctionNode,
    MalformedDistribution,
    PowerSet,
    Reduct,
    SubstComponent,
    effect_equal,
    iter_weighted,
    map_contra,
    map_cov,
    mixture,
    product_bag,
    unit_bag,
)

HALF = Fraction(1, 2)


def test_distribution_merges_equal_elements():
    d = Dist((("a", HALF), ("a", HALF)))
    assert d.entries == (("a", Fraction(1)),)


@pytest.mark.parametrize(
    "entries",
    [
        (("a", HALF),),
        (("a", Fraction(3, 2)),),
        (("a", Fraction(0)), ("b", Fraction(1))),
    ],
)
def test_malformed_distributions(entries):
    with pytest.raises(MalformedDistribution):
        Dist(entries)


def test_distribution_equality_ignores_order():
    assert Dist((("a", HALF), ("b", HALF))) == Dist((("b", HALF), ("a", HALF)))


def test_powerset_drops_duplicates():
    assert PowerSet(("a", "b", "a")).support() == ("a", "b")
    assert PowerSet(("a", "b")) == PowerSet(("b", "a"))


def test_product_of_distributions_is_independent():
    coin = Dist.uniform([0, 1])
    pairs = product_bag(BranchingEffect.DISTRIBUTION, [coin, coin])
    assert sorted(pairs.support()) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert all(w == Fraction(1, 4) for _, w in iter_weighted(pairs))


def test_product_rejects_mixed_effects():
    with pytest.raises(EffectMismatch):
        product_bag(BranchingEffect.DISTRIBUTION, [Dist.dirac(0), PowerSet((0,))])


def test_mixture_per_effect():
    assert mixture(BranchingEffect.DISTRIBUTION, [Dist.dirac("p"), Dist.dirac("q")]) == Dist.uniform(["p", "q"])
    assert mixture(BranchingEffect.POWERSET, [PowerSet(("p",)), PowerSet(("q", "p"))]) == PowerSet(("p", "q"))
    with pytest.raises(EffectMismatch):
        mixture(BranchingEffect.DETERMINISTIC, [Det("p"), Det("q")])


def test_distribution_lifting_sums_mass_per_class():
    split = Dist((("a", HALF), ("b", HALF)))
    assert effect_equal(split, Dist.dirac("c"), lambda x, y: True)
    assert not effect_equal(split, Dist.dirac("a"), lambda x, y: x == y)


def test_powerset_lifting_is_egli_milner():
    same_parity = lambda x, y: x % 2 == y % 2  # noqa: E731
    assert effect_equal(PowerSet((1, 2)), PowerSet((3, 4, 6)), same_parity)
    assert not effect_equal(PowerSet((1, 2)), PowerSet((3,)), same_parity)
    assert effect_equal(PowerSet(()), PowerSet(()), same_parity)


def test_lifting_rejects_mixed_effects():
    with pytest.raises(EffectMismatch):
        effect_equal(Det(1), unit_bag(BranchingEffect.POWERSET, 1), lambda x, y: True)


def test_map_cov_reaches_every_poststate():
    reduct = map_cov(BehaviorNode(Reduct(PowerSet((1, 2)))), lambda x: x * 10)
    assert reduct.step.bag == PowerSet((10, 20))
    node = BehaviorNode(
        FunctionNode(lambda x: x + 1, stage=2),
        SubstComponent(lambda env: sum(env.entries)),
    )
    mapped = map_cov(node, str)
    assert mapped.step.apply(4) == "5"
    assert mapped.step.stage == 2
    assert mapped.subst.apply(Environment((1, 2), 0)) == "3"
    assert map_cov(BehaviorNode(TERMINAL), str).step is TERMINAL


def test_map_contra_only_touches_inputs():
    node = BehaviorNode(
        FunctionNode(lambda x: x + 1),
        SubstComponent(lambda env: (env.entries, env.context)),
    )
    mapped = map_contra(node, len)
    assert mapped.step.apply("abc") == 4
    assert mapped.subst.apply(Environment(("ab", "c"), 3)) == ((2, 1), 3)
    reduct = BehaviorNode(Reduct(Det("p")))
    assert map_contra(reduct, len).step.bag == Det("p")
