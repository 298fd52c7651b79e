"""
One observation step of a state: the branching effect bags, the step
variants (reduct, function node, terminal) and the optional substitution
component carried by the lambda calculus.

Weights are exact Fractions everywhere; no floating point.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, Generic, Iterable, List, Optional, Sequence, Tuple, TypeVar, Union

from core.kernel import WorkbenchError

A = TypeVar("A")
B = TypeVar("B")


class MalformedDistribution(WorkbenchError):
    """Custom exception for distributions whose weights are not positive or do not sum to 1."""
    pass


class EffectMismatch(WorkbenchError):
    """Custom exception for comparing or combining bags of different effects."""
    pass


class BranchingEffect(str, Enum):
    DETERMINISTIC = "deterministic"
    DISTRIBUTION = "distribution"
    POWERSET = "powerset"


@dataclass(frozen=True)
class Trivial:
    """The single inhabitant of the later modality at stage 0."""

    def __str__(self) -> str:
        return "*"


TRIVIAL = Trivial()


# --- Effect bags ---

class Bag(ABC, Generic[A]):
    effect: BranchingEffect

    @abstractmethod
    def support(self) -> Tuple[A, ...]:
        """Elements in first-occurrence order."""

    @abstractmethod
    def map(self, f: Callable[[A], B]) -> "Bag[B]":
        pass

    @abstractmethod
    def bind(self, f: Callable[[A], "Bag[B]"]) -> "Bag[B]":
        pass


@dataclass(frozen=True)
class Det(Bag[A]):
    value: Any

    effect = BranchingEffect.DETERMINISTIC

    def support(self) -> Tuple[A, ...]:
        return (self.value,)

    def map(self, f):
        return Det(f(self.value))

    def bind(self, f):
        result = f(self.value)
        if not isinstance(result, Det):
            raise EffectMismatch("Deterministic bind must produce a deterministic bag")
        return result


@dataclass(frozen=True, eq=False)
class Dist(Bag[A]):
    """Finite distribution; equal elements are merged on construction."""

    entries: Tuple[Tuple[Any, Fraction], ...]

    effect = BranchingEffect.DISTRIBUTION

    def __post_init__(self):
        merged: Dict[Any, Fraction] = {}
        for element, weight in self.entries:
            weight = Fraction(weight)
            if weight <= 0 or weight > 1:
                raise MalformedDistribution(f"Weight {weight} outside (0, 1]")
            merged[element] = merged.get(element, Fraction(0)) + weight
        total = sum(merged.values(), Fraction(0))
        if total != 1:
            raise MalformedDistribution(f"Weights sum to {total}, expected 1")
        object.__setattr__(self, "entries", tuple(merged.items()))

    @classmethod
    def dirac(cls, value: Any) -> "Dist":
        return cls(((value, Fraction(1)),))

    @classmethod
    def uniform(cls, values: Sequence[Any]) -> "Dist":
        if not values:
            raise MalformedDistribution("Uniform distribution over an empty support")
        weight = Fraction(1, len(values))
        return cls(tuple((v, weight) for v in values))

    def weight(self, value: Any) -> Fraction:
        return dict(self.entries).get(value, Fraction(0))

    def support(self):
        return tuple(element for element, _ in self.entries)

    def map(self, f):
        return Dist(tuple((f(element), weight) for element, weight in self.entries))

    def bind(self, f):
        combined: List[Tuple[Any, Fraction]] = []
        for element, weight in self.entries:
            inner = f(element)
            if not isinstance(inner, Dist):
                raise EffectMismatch("Distribution bind must produce a distribution")
            combined.extend((value, weight * w) for value, w in inner.entries)
        return Dist(tuple(combined))

    def __eq__(self, other):
        if not isinstance(other, Dist):
            return NotImplemented
        return dict(self.entries) == dict(other.entries)

    def __hash__(self):
        return hash(frozenset(self.entries))


@dataclass(frozen=True, eq=False)
class PowerSet(Bag[A]):
    """Finite set; duplicates are dropped on construction, first occurrence kept."""

    elements: Tuple[Any, ...]

    effect = BranchingEffect.POWERSET

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(dict.fromkeys(self.elements)))

    def support(self):
        return self.elements

    def map(self, f):
        return PowerSet(tuple(f(element) for element in self.elements))

    def bind(self, f):
        combined: List[Any] = []
        for element in self.elements:
            inner = f(element)
            if not isinstance(inner, PowerSet):
                raise EffectMismatch("Powerset bind must produce a powerset")
            combined.extend(inner.elements)
        return PowerSet(tuple(combined))

    def __eq__(self, other):
        if not isinstance(other, PowerSet):
            return NotImplemented
        return frozenset(self.elements) == frozenset(other.elements)

    def __hash__(self):
        return hash(frozenset(self.elements))


def unit_bag(effect: BranchingEffect, value: Any) -> Bag:
    if effect is BranchingEffect.DETERMINISTIC:
        return Det(value)
    if effect is BranchingEffect.DISTRIBUTION:
        return Dist.dirac(value)
    return PowerSet((value,))


def product_bag(effect: BranchingEffect, bags: Sequence[Bag]) -> Bag:
    """The bag of tuples picking one element from each bag (independent choices)."""
    result = unit_bag(effect, ())
    for bag in bags:
        if bag.effect is not effect:
            raise EffectMismatch(f"Expected a {effect.value} bag, got {bag.effect.value}")
        result = result.bind(lambda prefix, bag=bag: bag.map(lambda x, prefix=prefix: prefix + (x,)))
    return result


def mixture(effect: BranchingEffect, bags: Sequence[Bag]) -> Bag:
    """Fair choice between alternatives: uniform mixture, union, or the single deterministic bag."""
    if not bags:
        raise EffectMismatch("A mixture needs at least one alternative")
    if effect is BranchingEffect.DETERMINISTIC:
        if len(bags) != 1:
            raise EffectMismatch("Deterministic laws cannot offer several alternatives")
        return bags[0]
    if effect is BranchingEffect.DISTRIBUTION:
        share = Fraction(1, len(bags))
        return Dist(tuple((element, share * weight) for bag in bags for element, weight in bag.entries))
    return PowerSet(tuple(element for bag in bags for element in bag.elements))


def effect_equal(e1: Bag, e2: Bag, eq: Callable[[Any, Any], bool]) -> bool:
    """
    Lift an equivalence on elements to bags.

    Deterministic: the unique elements are related. Powerset: Egli-Milner
    (every element on each side has a related element on the other).
    Distribution: equal total mass on every equivalence class.
    """
    if e1.effect is not e2.effect:
        raise EffectMismatch(f"Cannot compare {e1.effect.value} with {e2.effect.value}")
    if isinstance(e1, Det):
        return eq(e1.value, e2.value)
    if isinstance(e1, PowerSet):
        left, right = e1.elements, e2.elements
        return all(any(eq(a, b) for b in right) for a in left) and all(
            any(eq(a, b) for a in left) for b in right
        )
    for bag in (e1, e2):
        total = sum((w for _, w in bag.entries), Fraction(0))
        if total != 1:
            raise MalformedDistribution(f"Weights sum to {total}, expected 1")
    representatives: List[Any] = []
    masses: List[List[Fraction]] = []
    for side, bag in enumerate((e1, e2)):
        for element, weight in bag.entries:
            for index, rep in enumerate(representatives):
                if eq(rep, element):
                    masses[index][side] += weight
                    break
            else:
                representatives.append(element)
                mass = [Fraction(0), Fraction(0)]
                mass[side] = weight
                masses.append(mass)
    return all(left == right for left, right in masses)


# --- Steps ---

class StepTag(str, Enum):
    REDUCT = "reduct"
    FUNCTION = "function"
    TERMINAL = "terminal"


@dataclass(frozen=True)
class Reduct:
    bag: Bag

    tag = StepTag.REDUCT


@dataclass(frozen=True, eq=False)
class FunctionNode:
    """
    An opaque map from arguments to results.

    `stage` is the stage of the node for guarded languages; the map reads its
    argument only up to stage - 1.
    """

    apply: Callable[[Any], Any]
    stage: Optional[int] = None

    tag = StepTag.FUNCTION


@dataclass(frozen=True)
class Terminal:
    tag = StepTag.TERMINAL


TERMINAL = Terminal()

Step = Union[Reduct, FunctionNode, Terminal]


@dataclass(frozen=True)
class Environment:
    """A substitution: `entries[j]` replaces variable j; entries live in context `context`."""

    entries: Tuple[Any, ...]
    context: int


@dataclass(frozen=True, eq=False)
class SubstComponent:
    apply: Callable[[Environment], Any]
    stage: Optional[int] = None


@dataclass(frozen=True, eq=False)
class BehaviorNode:
    """One step plus, for the lambda calculus, the substitution observable."""

    step: Step
    subst: Optional[SubstComponent] = None

    @property
    def tag(self) -> StepTag:
        return self.step.tag


def map_cov(b: BehaviorNode, f: Callable[[Any], Any]) -> BehaviorNode:
    """Post-compose f with every poststate: reducts, function results, substitution results."""
    step = b.step
    if isinstance(step, Reduct):
        step = Reduct(step.bag.map(f))
    elif isinstance(step, FunctionNode):
        inner = step.apply
        step = FunctionNode(lambda x: f(inner(x)), step.stage)
    subst = b.subst
    if subst is not None:
        inner_subst = subst.apply
        subst = SubstComponent(lambda env: f(inner_subst(env)), subst.stage)
    return BehaviorNode(step, subst)


def map_contra(b: BehaviorNode, g: Callable[[Any], Any]) -> BehaviorNode:
    """Pre-compose g with function arguments and environment entries."""
    step = b.step
    if isinstance(step, FunctionNode):
        inner = step.apply
        step = FunctionNode(lambda x: inner(g(x)), step.stage)
    subst = b.subst
    if subst is not None:
        inner_subst = subst.apply
        subst = SubstComponent(
            lambda env: inner_subst(Environment(tuple(g(e) for e in env.entries), env.context)),
            subst.stage,
        )
    return BehaviorNode(step, subst)


def reduct_support(b: BehaviorNode) -> Tuple[Any, ...]:
    if isinstance(b.step, Reduct):
        return b.step.bag.support()
    return ()


def iter_weighted(bag: Bag) -> Iterable[Tuple[Any, Optional[Fraction]]]:
    """Elements with their weights (None outside distributions)."""
    if isinstance(bag, Dist):
        return list(bag.entries)
    return [(element, None) for element in bag.support()]
