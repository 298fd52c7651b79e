"""
Denotations and their finite observations.

A Denotation is a lazily unfolded state of the locally final coalgebra: its
node is computed on demand (and memoized per stage). Observations cut it to a
FiniteTree of bounded depth, probing function nodes with a fixed ProbeSet.
For guarded languages the depth of an observation is also its stage.
"""

import itertools
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from core.behavior import (
    BehaviorNode,
    BranchingEffect,
    Det,
    EffectMismatch,
    Environment,
    FunctionNode,
    PowerSet,
    Reduct,
    StepTag,
    Terminal,
    iter_weighted,
    map_contra,
    map_cov,
)
from core.config import PROBE_LIMIT
from core.kernel import OperatorDecl, Signature, Sort, SortMismatch, Term, WorkbenchError, enumerate_terms
from core.logger import get_logger

logger = get_logger(__name__)


class GuardednessViolation(WorkbenchError):
    """Custom exception for denotations forced beyond the stage their consumer may read."""
    pass


class ProbeSetEmpty(WorkbenchError):
    """Custom exception for function nodes met at a sort without probes."""
    pass


class UninhabitedAtSize(WorkbenchError):
    """Custom exception for probe pools requested at a size with no closed terms."""
    pass


# --- Denotations ---

class Denotation:
    """
    A deferred coalgebra state.

    Args:
        sort: the sort of the state
        unfold: computes the node at a stage (None for unguarded languages)
        guarded: whether nodes are stage-indexed
        origin: the (operator, arguments) this state was built from, if any
    """

    def __init__(
        self,
        sort: Sort,
        unfold: Callable[[Optional[int]], BehaviorNode],
        guarded: bool = False,
        origin: Optional[Tuple[OperatorDecl, Tuple["Denotation", ...]]] = None,
    ):
        self.sort = sort
        self.guarded = guarded
        self.origin = origin
        self._unfold = unfold
        self._nodes: Dict[Optional[int], BehaviorNode] = {}
        self._views: Dict[int, "RestrictedDenotation"] = {}
        self._lock = threading.Lock()

    @property
    def stage_bound(self) -> Optional[int]:
        return None

    def node(self, stage: Optional[int] = None) -> BehaviorNode:
        key = self._stage_key(stage)
        with self._lock:
            found = self._nodes.get(key)
        if found is not None:
            return found
        computed = self._unfold(key)
        with self._lock:
            return self._nodes.setdefault(key, computed)

    def _stage_key(self, stage: Optional[int]) -> Optional[int]:
        if not self.guarded:
            return None
        if stage is None or stage < 0:
            raise ValueError(f"Guarded denotations need a stage >= 0, got {stage}")
        return stage

    def restrict(self, stage: Optional[int]) -> "Denotation":
        """A view readable only up to `stage`; forcing it deeper raises GuardednessViolation."""
        if not self.guarded or stage is None:
            return self
        with self._lock:
            view = self._views.get(stage)
            if view is None:
                view = RestrictedDenotation(self, stage)
                self._views[stage] = view
        return view

    def map_parts(self, f: Callable[["Denotation"], "Denotation"]) -> Optional["Denotation"]:
        """Rebuild a derived denotation from transformed parts; None for denotations with no parts."""
        return None

    def __repr__(self) -> str:
        if self.origin is not None:
            return f"Denotation({self.origin[0]}, sort={self.sort})"
        return f"Denotation(sort={self.sort})"


class RestrictedDenotation(Denotation):
    def __init__(self, base: Denotation, bound: int):
        super().__init__(base.sort, base.node, guarded=True, origin=base.origin)
        self.base = base
        self.bound = bound

    @property
    def stage_bound(self) -> Optional[int]:
        return self.bound

    def node(self, stage: Optional[int] = None) -> BehaviorNode:
        if stage is not None and stage > self.bound:
            raise GuardednessViolation(
                f"{self.base!r} forced at stage {stage}, readable only up to {self.bound}"
            )
        return self.base.node(stage)

    def restrict(self, stage: Optional[int]) -> Denotation:
        if stage is None:
            return self
        return self.base.restrict(min(stage, self.bound))


class GraftedDenotation(Denotation):
    def __init__(self, prefix: Denotation, suffix: Denotation, stage: int):
        super().__init__(
            prefix.sort,
            lambda k: prefix.node(k) if k <= stage else suffix.node(k),
            guarded=True,
        )
        self.prefix = prefix
        self.suffix = suffix
        self.stage = stage

    def map_parts(self, f):
        return graft(f(self.prefix), f(self.suffix), self.stage)


def graft(prefix: Denotation, suffix: Denotation, stage: int) -> Denotation:
    """Agrees with `prefix` up to `stage` and with `suffix` above it."""
    if prefix.sort != suffix.sort:
        raise SortMismatch(f"Cannot graft {prefix.sort} onto {suffix.sort}")
    return GraftedDenotation(prefix, suffix, stage)


class InstrumentedDenotation(Denotation):
    """Records every stage above `bound` it is forced at into the shared `forced` list."""

    def __init__(self, base: Denotation, bound: int, forced: Optional[List[int]] = None):
        super().__init__(base.sort, self._observe, guarded=True)
        self.base = base
        self.bound = bound
        self.forced = forced if forced is not None else []

    def _observe(self, stage: Optional[int]) -> BehaviorNode:
        if stage is not None and stage > self.bound:
            self.forced.append(stage)
        return self.base.node(stage)

    def node(self, stage: Optional[int] = None) -> BehaviorNode:
        return self._observe(self._stage_key(stage))

    def map_parts(self, f):
        return InstrumentedDenotation(f(self.base), self.bound, self.forced)


class RecordingDenotation(Denotation):
    """
    Behaves as `base`. Every argument or environment entry fed to it, or to
    any state reached from it, is appended to the shared `inputs` list.
    """

    def __init__(self, base: Denotation, inputs: Optional[List[Denotation]] = None):
        super().__init__(base.sort, self._observe, guarded=base.guarded, origin=None)
        self.base = base
        self.inputs = inputs if inputs is not None else []

    def _observe(self, stage: Optional[int]) -> BehaviorNode:
        return map_cov(map_contra(self.base.node(stage), self._record), self._follow)

    def _record(self, x: Any) -> Any:
        self.inputs.append(x)
        return x

    def _follow(self, x: Any) -> Any:
        if isinstance(x, Denotation):
            return RecordingDenotation(x, self.inputs)
        return x

    def map_parts(self, f):
        return RecordingDenotation(f(self.base), self.inputs)


def underlying(d: Denotation) -> Denotation:
    """Strip restriction and recording views."""
    while isinstance(d, (RestrictedDenotation, RecordingDenotation)):
        d = d.base
    return d


# --- Finite observations ---

@dataclass(frozen=True)
class Branch:
    tree: "FiniteTree"
    label: Optional[str] = None
    weight: Optional[Fraction] = None

    @cached_property
    def key(self) -> str:
        prefix = ""
        if self.label is not None:
            prefix += f"{self.label}="
        if self.weight is not None:
            prefix += f"{self.weight}:"
        return prefix + self.tree.key


@dataclass(frozen=True)
class FiniteTree:
    """
    The observable image of a state up to some depth.

    tag is terminal, reduct, function, or value (an exact leaf in pentagon checks).
    branches is None where the depth ran out.
    """

    tag: str
    effect: Optional[str] = None
    branches: Optional[Tuple[Branch, ...]] = None
    substitutions: Optional[Tuple[Branch, ...]] = None
    label: Optional[str] = None

    @cached_property
    def key(self) -> str:
        text = self.tag[0].upper()
        if self.effect is not None:
            text += self.effect[0]
        if self.label is not None:
            text += repr(self.label)
        if self.branches is not None:
            text += "[" + ",".join(b.key for b in self.branches) + "]"
        if self.substitutions is not None:
            text += "{" + ",".join(b.key for b in self.substitutions) + "}"
        return text

    @cached_property
    def height(self) -> int:
        children = list(self.branches or ()) + list(self.substitutions or ())
        return 1 + max((b.tree.height for b in children), default=-1)


def _canonical_bag(effect: BranchingEffect, branches: List[Branch]) -> Tuple[Branch, ...]:
    if effect is BranchingEffect.DETERMINISTIC:
        return tuple(branches)
    if effect is BranchingEffect.DISTRIBUTION:
        merged: Dict[str, Branch] = {}
        for branch in branches:
            found = merged.get(branch.tree.key)
            weight = branch.weight if found is None else found.weight + branch.weight
            merged[branch.tree.key] = Branch(branch.tree, weight=weight)
        return tuple(merged[key] for key in sorted(merged))
    unique = {branch.tree.key: branch for branch in branches}
    return tuple(unique[key] for key in sorted(unique))


class ProbeSet:
    """
    Ordered probes per sort, plus environments for open contexts.

    Args:
        signature: used to find the argument sort of a function observation
        pool: sort -> ordered (label, element) pairs
        limit: at most this many probes per sort
    """

    def __init__(
        self,
        signature: Signature,
        pool: Callable[[Sort], Sequence[Tuple[str, Any]]],
        limit: int = PROBE_LIMIT,
    ):
        self.signature = signature
        self._pool = pool
        self.limit = limit
        self._cache: Dict[Sort, List[Tuple[str, Any]]] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_terms(
        cls,
        signature: Signature,
        size: int,
        embed: Callable[[Term], Any] = lambda t: t,
        show: Callable[[Term], str] = str,
        limit: int = PROBE_LIMIT,
    ) -> "ProbeSet":
        """Probes are the first `limit` enumerated closed terms of each sort, up to `size` nodes."""

        def pool(sort: Sort) -> List[Tuple[str, Any]]:
            terms = enumerate_terms(signature, sort, size)
            if len(terms) > limit:
                logger.warning(f"Probe pool at {sort} truncated from {len(terms)} to {limit}")
            return [(show(t), embed(t)) for t in terms[:limit]]

        return cls(signature, pool, limit)

    @classmethod
    def explicit(
        cls,
        signature: Signature,
        terms: Iterable[Term],
        embed: Callable[[Term], Any] = lambda t: t,
        show: Callable[[Term], str] = str,
    ) -> "ProbeSet":
        by_sort: Dict[Sort, List[Tuple[str, Any]]] = {}
        for t in terms:
            by_sort.setdefault(t.sort, []).append((show(t), embed(t)))
        limit = max((len(v) for v in by_sort.values()), default=0)
        return cls(signature, lambda sort: by_sort.get(sort, []), limit)

    def extended(self, extra: Iterable[Denotation], prefix: str = "input") -> "ProbeSet":
        """These probes plus `extra`, each under its own sort; states already present are not repeated."""
        by_sort: Dict[Sort, List[Tuple[str, Any]]] = {}
        seen = set()
        for x in extra:
            if id(x) in seen:
                continue
            seen.add(id(x))
            by_sort.setdefault(x.sort, []).append((f"{prefix} {len(seen) - 1}", x))

        def pool(sort: Sort) -> List[Tuple[str, Any]]:
            try:
                found = list(self.for_sort(sort))
            except ProbeSetEmpty:
                found = []
            known = {id(value) for _, value in found}
            return found + [(label, x) for label, x in by_sort.get(sort, []) if id(x) not in known]

        return ProbeSet(self.signature, pool, self.limit + len(seen))

    def for_sort(self, sort: Sort) -> List[Tuple[str, Any]]:
        with self._lock:
            found = self._cache.get(sort)
        if found is None:
            found = list(self._pool(sort))[: max(self.limit, 0)]
            with self._lock:
                self._cache[sort] = found
        if not found:
            raise ProbeSetEmpty(f"No probes of sort {sort}")
        return found

    def for_argument(self, sort: Sort) -> List[Tuple[str, Any]]:
        return self.for_sort(self.signature.domain(sort))

    def environments(self, context: Any) -> List[Tuple[str, Environment]]:
        """Closed substitutions for an open context of size `context` (none when closed)."""
        if not isinstance(context, int) or isinstance(context, bool) or context <= 0:
            return []
        closed = self.for_sort(0)
        envs = []
        for combo in itertools.islice(itertools.product(closed, repeat=context), self.limit):
            label = "[" + ", ".join(lbl for lbl, _ in combo) + "]"
            envs.append((label, Environment(tuple(value for _, value in combo), 0)))
        return envs

    def labels(self) -> Dict[str, List[str]]:
        with self._lock:
            return {str(sort): [lbl for lbl, _ in items] for sort, items in self._cache.items()}


class Observer:
    """
    Cuts states into FiniteTrees.

    Args:
        behavior_of: (state, stage) -> BehaviorNode
        sort_of: state -> sort
        probes: the probe set for function nodes and environments
        guarded: depth doubles as stage when True
        exact: children become exact `value` leaves labelled by `show`
    """

    def __init__(
        self,
        behavior_of: Callable[[Any, Optional[int]], BehaviorNode],
        sort_of: Callable[[Any], Sort],
        probes: ProbeSet,
        guarded: bool,
        exact: bool = False,
        show: Callable[[Any], str] = str,
    ):
        self.behavior_of = behavior_of
        self.sort_of = sort_of
        self.probes = probes
        self.guarded = guarded
        self.exact = exact
        self.show = show
        self._memo: Dict[Tuple[Any, int], FiniteTree] = {}

    @classmethod
    def for_denotations(cls, probes: ProbeSet, guarded: bool) -> "Observer":
        return cls(lambda d, stage: d.node(stage), lambda d: d.sort, probes, guarded)

    def stage_for(self, depth: int) -> Optional[int]:
        return depth if self.guarded else None

    def tree(self, x: Any, depth: int) -> FiniteTree:
        key = (x, depth)
        found = self._memo.get(key)
        if found is None:
            node = self.behavior_of(x, self.stage_for(depth))
            found = self.node_tree(node, self.sort_of(x), depth)
            self._memo[key] = found
        return found

    def child(self, x: Any, depth: int) -> FiniteTree:
        if self.exact:
            return FiniteTree("value", label=self.show(x))
        return self.tree(x, depth)

    def node_tree(self, node: BehaviorNode, sort: Sort, depth: int) -> FiniteTree:
        step = node.step
        effect = None
        if isinstance(step, Reduct) and step.bag.effect is not BranchingEffect.DETERMINISTIC:
            effect = step.bag.effect.value
        if depth <= 0:
            if isinstance(step, Reduct) and isinstance(step.bag, PowerSet) and not step.bag.elements:
                return FiniteTree(StepTag.REDUCT.value, effect=effect, branches=())
            return FiniteTree(step.tag.value, effect=effect)
        branches: Optional[Tuple[Branch, ...]] = None
        if isinstance(step, Reduct):
            raw = [Branch(self.child(x, depth - 1), weight=w) for x, w in iter_weighted(step.bag)]
            branches = _canonical_bag(step.bag.effect, raw)
        elif isinstance(step, FunctionNode):
            branches = tuple(
                Branch(self.child(step.apply(probe), depth - 1), label=label)
                for label, probe in self.probes.for_argument(sort)
            )
        substitutions = None
        if node.subst is not None:
            envs = self.probes.environments(sort)
            if envs:
                substitutions = tuple(
                    Branch(self.child(node.subst.apply(env), depth - 1), label=label)
                    for label, env in envs
                )
        return FiniteTree(step.tag.value, effect=effect, branches=branches, substitutions=substitutions)


def truncate(d: Denotation, depth: int, probes: ProbeSet) -> FiniteTree:
    """Cut a denotation at `depth`, probing function nodes with `probes`."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return Observer.for_denotations(probes, d.guarded).tree(d, depth)


def obs_equal(d1: Denotation, d2: Denotation, depth: int, probes: ProbeSet) -> bool:
    if d1.sort != d2.sort:
        raise SortMismatch(f"Cannot compare states of sorts {d1.sort} and {d2.sort}")
    observer = Observer.for_denotations(probes, d1.guarded)
    return observer.tree(d1, depth) == observer.tree(d2, depth)


def distance(
    d1: Denotation, d2: Denotation, max_depth: int, probes: ProbeSet, observer: Optional[Observer] = None
) -> Fraction:
    """2^-k for the least depth k where the truncations differ; 0 if none up to max_depth."""
    if d1.sort != d2.sort:
        raise SortMismatch(f"Cannot compare states of sorts {d1.sort} and {d2.sort}")
    observer = observer or Observer.for_denotations(probes, d1.guarded)
    for k in range(max_depth + 1):
        if observer.tree(d1, k) != observer.tree(d2, k):
            return Fraction(1, 2 ** k)
    return Fraction(0)


@dataclass(frozen=True)
class Difference:
    path: Tuple[str, ...]
    left: str
    right: str

    def describe(self) -> str:
        where = " / ".join(self.path) if self.path else "root"
        return f"{where} {self.left} vs {self.right}"


TAG_SYMBOLS = {"terminal": "✓", "reduct": "→", "function": "→t", "value": "="}


def first_difference(t1: FiniteTree, t2: FiniteTree) -> Optional[Difference]:
    """The shallowest-first path where two trees disagree, or None if equal."""
    if t1 == t2:
        return None
    return _difference(t1, t2, ())


def _difference(t1: FiniteTree, t2: FiniteTree, path: Tuple[str, ...]) -> Difference:
    if t1.tag != t2.tag or t1.effect != t2.effect:
        return Difference(path, f"tags {TAG_SYMBOLS.get(t1.tag, t1.tag)}", TAG_SYMBOLS.get(t2.tag, t2.tag))
    if t1.label != t2.label:
        return Difference(path, f"values {t1.label}", str(t2.label))
    if t1.branches is not None and t2.branches is not None:
        if t1.tag == "function":
            for b1, b2 in zip(t1.branches, t2.branches):
                if b1 != b2:
                    return _difference(b1.tree, b2.tree, path + (f"probe {b1.label}",))
        elif t1.effect is None and len(t1.branches) == len(t2.branches) == 1:
            return _difference(t1.branches[0].tree, t2.branches[0].tree, path + ("step",))
        else:
            only_left = [b for b in t1.branches if b not in t2.branches]
            only_right = [b for b in t2.branches if b not in t1.branches]
            return Difference(
                path + ("branches",),
                f"{len(only_left)} unmatched left",
                f"{len(only_right)} unmatched right",
            )
    if t1.substitutions is not None and t2.substitutions is not None:
        for b1, b2 in zip(t1.substitutions, t2.substitutions):
            if b1 != b2:
                return _difference(b1.tree, b2.tree, path + (f"subst {b1.label}",))
    return Difference(path, "shape", "shape")


# --- Final-coalgebra reading of deterministic states ---

@dataclass(frozen=True)
class Unravelling:
    """(steps, outcome): outcome is terminal, function, or divergent within the fuel."""

    steps: int
    outcome: str

    def __str__(self) -> str:
        if self.outcome == "divergent":
            return "divergent"
        mark = "✓" if self.outcome == "terminal" else "→t"
        return f"({self.steps}, {mark})"


def unravel(d: Denotation, fuel: int) -> Unravelling:
    """Follow reduct steps of a deterministic denotation until it stops or the fuel runs out."""
    steps = 0
    current = d
    stage = fuel + 1 if d.guarded else None
    while True:
        node = current.node(stage)
        if isinstance(node.step, Terminal):
            return Unravelling(steps, "terminal")
        if isinstance(node.step, FunctionNode):
            return Unravelling(steps, "function")
        if steps >= fuel:
            return Unravelling(steps, "divergent")
        bag = node.step.bag
        if not isinstance(bag, Det):
            raise EffectMismatch("unravel follows deterministic states only")
        current = bag.value
        steps += 1
        if stage is not None:
            stage -= 1


# --- Iterated observation for typed languages ---

def tower_tree(
    observer: Observer, x: Any, depth: int, iteration: int, memo: Optional[Dict[Tuple[Any, int, int], FiniteTree]] = None
) -> FiniteTree:
    """
    Observation of x where function tables are keyed by the probes' own
    observations at the previous iteration; iteration 0 is the trivial tree.
    """
    if iteration <= 0:
        return FiniteTree("value", label="1")
    memo = {} if memo is None else memo
    found = memo.get((x, depth, iteration))
    if found is not None:
        return found
    node = observer.behavior_of(x, observer.stage_for(depth))
    step = node.step
    if depth <= 0:
        return FiniteTree(step.tag.value)
    branches: Optional[Tuple[Branch, ...]] = None
    if isinstance(step, Reduct):
        raw = [
            Branch(tower_tree(observer, child, depth - 1, iteration, memo), weight=w)
            for child, w in iter_weighted(step.bag)
        ]
        branches = _canonical_bag(step.bag.effect, raw)
    elif isinstance(step, FunctionNode):
        table: Dict[str, Branch] = {}
        for _, probe in observer.probes.for_argument(observer.sort_of(x)):
            key = tower_tree(observer, probe, depth - 1, iteration - 1, memo).key
            if key not in table:
                table[key] = Branch(tower_tree(observer, step.apply(probe), depth - 1, iteration, memo), label=key)
        branches = tuple(table[k] for k in sorted(table))
    found = FiniteTree(step.tag.value, branches=branches)
    memo[(x, depth, iteration)] = found
    return found
