"""
Behavioural equivalence on closed terms.

`bisim` compares two terms by their depth-n observation trees over the
operational model; `partition` refines a finite universe (closed under
successors up to the depth) into equivalence classes, matching reduct
distributions by class mass and reduct sets by Egli-Milner.

Labels of function nodes range over a finite probe set. "related" therefore
means "not distinguished by these probes to this depth"; "distinguished" is
always sound. Successors beyond the closure are told apart only by sort and
step tag.
"""

import threading
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from core.behavior import BranchingEffect, Det, Dist, EffectMismatch, FunctionNode, PowerSet, Reduct
from core.config import DEFAULT_DEPTH, UNIVERSE_CAP
from core.gitrees import Difference, FiniteTree, Observer, ProbeSet, first_difference
from core.gsos_service import gsos_service
from core.kernel import SortMismatch, Term, WorkbenchError
from core.logger import get_logger

logger = get_logger(__name__)


class UniverseExplosion(WorkbenchError):
    """Custom exception for partition universes growing past UNIVERSE_CAP."""
    pass


@dataclass(frozen=True)
class BisimReport:
    related: bool
    depth: int
    probe_labels: Tuple[str, ...]
    witness: Optional[Difference] = None
    left: Optional[FiniteTree] = None
    right: Optional[FiniteTree] = None

    @property
    def verdict(self) -> str:
        return "related" if self.related else "distinguished"


@dataclass(frozen=True)
class Partition:
    """Blocks over the requested universe, in first-occurrence order."""

    blocks: Tuple[Tuple[Term, ...], ...]
    rounds: int
    closure_size: int

    def block_of(self, t: Term) -> int:
        for index, block in enumerate(self.blocks):
            if t in block:
                return index
        raise KeyError(f"{t} is not in the universe")

    def related(self, p: Term, q: Term) -> bool:
        return self.block_of(p) == self.block_of(q)


def _flat_labels(probes: ProbeSet) -> Tuple[str, ...]:
    return tuple(label for labels in probes.labels().values() for label in labels)


class BisimService:
    def __init__(self):
        logger.info("Initializing bisimilarity service")
        self._lock = threading.Lock()

    def observer(self, lang, probes: ProbeSet) -> Observer:
        model = gsos_service.operational(lang)
        return Observer(model.behavior, lambda t: t.sort, probes, lang.guarded, show=lang.show)

    def bisim(
        self,
        lang,
        p: Term,
        q: Term,
        depth: int = DEFAULT_DEPTH,
        probes: Optional[ProbeSet] = None,
    ) -> BisimReport:
        """
        Depth-indexed applicative bisimilarity of p and q, restricted to `probes`.

        Raises:
            SortMismatch: if p and q have different sorts
        """
        if p.sort != q.sort:
            raise SortMismatch(f"Cannot compare terms of sorts {p.sort} and {q.sort}")
        if depth < 0:
            raise ValueError("depth must be >= 0")
        probes = probes if probes is not None else lang.probes()
        report = self.compare(self.observer(lang, probes), p, q, depth)
        logger.debug(f"bisim {lang.show(p)} / {lang.show(q)} at depth {depth}: {report.verdict}")
        return report

    def compare(self, observer: Observer, p: Term, q: Term, depth: int) -> BisimReport:
        """As `bisim`, reusing an observer (and its memo) across many pairs."""
        left, right = observer.tree(p, depth), observer.tree(q, depth)
        witness = first_difference(left, right)
        return BisimReport(witness is None, depth, _flat_labels(observer.probes), witness, left, right)

    def replay_witness(self, lang, p: Term, q: Term, report: BisimReport, probes: ProbeSet) -> bool:
        """Follow the witness path on the operational model and confirm the observations still differ."""
        if report.witness is None:
            return False
        model = gsos_service.operational(lang)
        observer = self.observer(lang, probes)
        x, y, remaining = p, q, report.depth
        for step in report.witness.path:
            if step == "branches":
                break
            stage = observer.stage_for(remaining)
            nx, ny = model.behavior(x, stage), model.behavior(y, stage)
            if step == "step":
                x, y = _only_reduct(nx), _only_reduct(ny)
            elif step.startswith("probe "):
                value = _lookup(probes.for_argument(x.sort), step[len("probe "):])
                x, y = nx.step.apply(value), ny.step.apply(value)
            elif step.startswith("subst "):
                env = _lookup(probes.environments(x.sort), step[len("subst "):])
                x, y = nx.subst.apply(env), ny.subst.apply(env)
            remaining -= 1
        return observer.tree(x, remaining) != observer.tree(y, remaining)

    # --- Partition refinement ---

    def closure(self, lang, universe: Sequence[Term], depth: int, probes: ProbeSet, cap: int = UNIVERSE_CAP) -> List[Term]:
        """The universe plus everything reachable in at most `depth` steps or probe applications."""
        model = gsos_service.operational(lang)
        seen: Dict[Term, int] = {}
        queue: deque = deque()
        for t in universe:
            if t not in seen:
                seen[t] = 0
                queue.append(t)
        while queue:
            t = queue.popleft()
            level = seen[t]
            if level >= depth:
                continue
            for successor in self._successors(model, t, probes):
                if successor not in seen:
                    seen[successor] = level + 1
                    if len(seen) > cap:
                        raise UniverseExplosion(f"Universe exceeded {cap} terms at depth {level + 1}")
                    queue.append(successor)
        return list(seen)

    @staticmethod
    def _successors(model, t: Term, probes: ProbeSet) -> List[Term]:
        node = model.behavior(t, None)
        found: List[Term] = []
        if isinstance(node.step, Reduct):
            found.extend(node.step.bag.support())
        elif isinstance(node.step, FunctionNode):
            found.extend(node.step.apply(value) for _, value in probes.for_argument(t.sort))
        if node.subst is not None:
            found.extend(node.subst.apply(env) for _, env in probes.environments(t.sort))
        return found

    def partition(
        self,
        lang,
        universe: Sequence[Term],
        depth: int = DEFAULT_DEPTH,
        probes: Optional[ProbeSet] = None,
    ) -> Partition:
        """
        Refine the universe by step signatures for at most `depth` rounds.

        Raises:
            UniverseExplosion: if the successor closure grows past UNIVERSE_CAP
        """
        probes = probes if probes is not None else lang.probes()
        model = gsos_service.operational(lang)
        terms = self.closure(lang, universe, depth, probes)
        nodes = {t: model.behavior(t, None) for t in terms}
        block: Dict[Term, int] = {}
        initial = {t: (str(t.sort), nodes[t].tag.value) for t in terms}
        ordered = sorted(set(initial.values()))
        block = {t: ordered.index(initial[t]) for t in terms}
        count = len(ordered)
        rounds = 0
        for _ in range(depth):
            of = self._block_lookup(block, model)
            keys = {t: (block[t], self._signature(nodes[t], t, of, probes)) for t in terms}
            distinct = sorted(set(keys.values()), key=repr)
            index = {key: position for position, key in enumerate(distinct)}
            block = {t: index[keys[t]] for t in terms}
            rounds += 1
            if len(distinct) == count:
                break
            count = len(distinct)
        groups: Dict[int, List[Term]] = {}
        for t in dict.fromkeys(universe):
            groups.setdefault(block[t], []).append(t)
        logger.debug(f"Partition of {len(universe)} terms ({len(terms)} in closure): {len(groups)} blocks after {rounds} rounds")
        return Partition(tuple(tuple(g) for g in groups.values()), rounds, len(terms))

    @staticmethod
    def _block_lookup(block: Dict[Term, int], model) -> Callable[[Term], Any]:
        """
        Block of a closure member; states past the closure edge are sealed by
        their sort and step tag, the only thing a depth-bounded comparison can
        still see of them.
        """
        edge: Dict[Term, Tuple[str, str]] = {}

        def of(x: Term) -> Any:
            found = block.get(x)
            if found is not None:
                return found
            if x not in edge:
                edge[x] = (str(x.sort), model.behavior(x, None).tag.value)
            return edge[x]

        return of

    @staticmethod
    def _signature(node, t: Term, of: Callable[[Term], Any], probes: ProbeSet) -> Tuple[Any, ...]:
        step = node.step
        if isinstance(step, Reduct):
            bag = step.bag
            if isinstance(bag, Det):
                key: Tuple[Any, ...] = (0, of(bag.value))
            elif isinstance(bag, Dist):
                masses: Dict[Any, Fraction] = {}
                for x, weight in bag.entries:
                    masses[of(x)] = masses.get(of(x), Fraction(0)) + weight
                key = (1, tuple(sorted(masses.items(), key=repr)))
            else:
                key = (2, tuple(sorted({of(x) for x in bag.elements}, key=repr)))
        elif isinstance(step, FunctionNode):
            key = (3, tuple(of(step.apply(value)) for _, value in probes.for_argument(t.sort)))
        else:
            key = (4,)
        if node.subst is not None:
            key += (tuple(of(node.subst.apply(env)) for _, env in probes.environments(t.sort)),)
        return key

    def prob_bisim(self, lang, universe: Sequence[Term], depth: int = DEFAULT_DEPTH, probes: Optional[ProbeSet] = None) -> Partition:
        if lang.effect is not BranchingEffect.DISTRIBUTION:
            raise EffectMismatch(f"{lang.name} does not branch probabilistically")
        return self.partition(lang, universe, depth, probes)

    def pow_bisim(self, lang, universe: Sequence[Term], depth: int = DEFAULT_DEPTH, probes: Optional[ProbeSet] = None) -> Partition:
        if lang.effect is not BranchingEffect.POWERSET:
            raise EffectMismatch(f"{lang.name} does not branch nondeterministically")
        return self.partition(lang, universe, depth, probes)


def _only_reduct(node) -> Term:
    step = node.step
    if not isinstance(step, Reduct) or not isinstance(step.bag, Det):
        raise WorkbenchError("Witness step does not follow a deterministic reduct")
    return step.bag.value


def _lookup(items: Sequence[Tuple[str, Any]], label: str) -> Any:
    for candidate, value in items:
        if candidate == label:
            return value
    raise WorkbenchError(f"Witness probe {label!r} is not in the probe set")


# Singleton instance
bisim_service = BisimService()
