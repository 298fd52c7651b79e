"""
Exact finite stages of the guarded untyped languages.

Stage k of the locally final coalgebra is built from stage k - 1:

    Z_0     = R(*) + F<>                       (deterministic: 2 elements)
            = R{} + R{*} + F<>                 (powerset: 3 elements)
    Z_{k+1} = R(Z_k) or R(P(Z_k)) + compatible tuples of tables (X_0 -> Z_0, ..., X_k -> Z_k)

A tuple is compatible when each table, restricted one stage down, agrees
with the previous table. X is the contravariant argument family: Z itself
for the coalgebra, the previous iterate for the approximants F^n 1.
"""

import itertools
import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

from core.behavior import BranchingEffect
from core.config import ITERATION_BOUND, STAGE_BOUND, STAGE_ELEMENT_CAP
from core.kernel import WorkbenchError
from core.logger import get_logger

logger = get_logger(__name__)


class StageTooLarge(WorkbenchError):
    """Custom exception for stages beyond the configured bound or element cap."""
    pass


TRIVIAL_KEY = "*"


@dataclass(frozen=True)
class StageElement:
    """
    One element of a finite stage.

    tag is unit (terminal family), reduct or function. payload is the
    trivial marker or a stage element (deterministic reduct), a key-sorted
    tuple of elements (powerset reduct), or a tuple of tables (function),
    each table a key-sorted tuple of (argument, result) pairs.
    """

    stage: int
    tag: str
    payload: Any = ()

    @cached_property
    def key(self) -> str:
        if self.tag == "unit":
            return "1"
        if self.tag == "reduct":
            if isinstance(self.payload, tuple):
                return "R{" + ",".join(_key(p) for p in self.payload) + "}"
            return f"R({_key(self.payload)})"
        tables = ";".join(
            "|".join(f"{x.key}>{y.key}" for x, y in table) for table in self.payload
        )
        return f"F<{tables}>"

    def __str__(self) -> str:
        return self.key


def _key(x: Any) -> str:
    return x.key if isinstance(x, StageElement) else TRIVIAL_KEY


# --- Stage families ---

class TerminalFamily:
    """The terminal presheaf: a single element at every stage."""

    def stage(self, k: int) -> List[StageElement]:
        return [StageElement(k, "unit")]

    def restrict(self, element: StageElement) -> StageElement:
        return StageElement(element.stage - 1, "unit")


class FinalFamily:
    """
    Stages of the final coalgebra of B(X, -) for a guarded untyped behavior.

    Args:
        shape: deterministic or powerset reducts
        contravariant: the family X of function arguments; None means the family itself
        filter_restrictions: drop function tuples whose tables are not restriction-compatible
        stage_bound: stages above this raise StageTooLarge
        cap: stages with more elements than this raise StageTooLarge
    """

    def __init__(
        self,
        shape: BranchingEffect,
        contravariant: Optional[Any] = None,
        filter_restrictions: bool = True,
        stage_bound: int = STAGE_BOUND,
        cap: int = STAGE_ELEMENT_CAP,
    ):
        if shape is BranchingEffect.DISTRIBUTION:
            raise WorkbenchError("Finite stages exist only for deterministic and powerset reducts")
        self.shape = shape
        self.contravariant = contravariant if contravariant is not None else self
        self.filter_restrictions = filter_restrictions
        self.stage_bound = stage_bound
        self.cap = cap
        self._stages: Dict[int, List[StageElement]] = {}
        self._lock = threading.RLock()

    def stage(self, k: int) -> List[StageElement]:
        if k < 0:
            raise ValueError(f"stage must be >= 0, got {k}")
        if k > self.stage_bound:
            raise StageTooLarge(f"Stage {k} exceeds the stage bound {self.stage_bound}")
        with self._lock:
            if k not in self._stages:
                elements = self._reducts(k) + self._functions(k)
                logger.debug(f"Stage {k} of {self.shape.value} family: {len(elements)} elements")
                self._stages[k] = elements
            return self._stages[k]

    def restrict(self, element: StageElement) -> StageElement:
        """The image of a stage-k element at stage k - 1."""
        k = element.stage
        if k <= 0:
            raise ValueError("Stage 0 elements have no restriction")
        if element.tag == "function":
            return StageElement(k - 1, "function", element.payload[:-1])
        if self.shape is BranchingEffect.DETERMINISTIC:
            inner = TRIVIAL_KEY if k == 1 else self.restrict(element.payload)
            return StageElement(k - 1, "reduct", inner)
        if k == 1:
            return StageElement(0, "reduct", (TRIVIAL_KEY,) if element.payload else ())
        images = {r.key: r for r in (self.restrict(p) for p in element.payload)}
        return StageElement(k - 1, "reduct", tuple(images[key] for key in sorted(images)))

    def _check_cap(self, k: int, count: int) -> None:
        if count > self.cap:
            raise StageTooLarge(f"Stage {k} would have {count} elements, above the cap {self.cap}")

    def _reducts(self, k: int) -> List[StageElement]:
        if self.shape is BranchingEffect.DETERMINISTIC:
            if k == 0:
                return [StageElement(0, "reduct", TRIVIAL_KEY)]
            return [StageElement(k, "reduct", y) for y in self.stage(k - 1)]
        if k == 0:
            return [StageElement(0, "reduct", ()), StageElement(0, "reduct", (TRIVIAL_KEY,))]
        below = sorted(self.stage(k - 1), key=lambda y: y.key)
        self._check_cap(k, 2 ** len(below))
        subsets: List[StageElement] = []
        for size in range(len(below) + 1):
            for combo in itertools.combinations(below, size):
                subsets.append(StageElement(k, "reduct", combo))
        return subsets

    def _functions(self, k: int) -> List[StageElement]:
        if k == 0:
            return [StageElement(0, "function", ())]
        xs = self.contravariant.stage(k - 1)
        ys = self.stage(k - 1)
        previous = [p for p in self.stage(k - 1) if p.tag == "function"]
        if k == 1 or not self.filter_restrictions:
            self._check_cap(k, len(previous) * len(ys) ** len(xs))
            tables = [tuple(zip(xs, choice)) for choice in itertools.product(ys, repeat=len(xs))]
            return [
                StageElement(k, "function", p.payload + (table,))
                for p in previous
                for table in tables
            ]
        fibers: Dict[str, List[StageElement]] = {}
        for y in ys:
            fibers.setdefault(self.restrict(y).key, []).append(y)
        restricted_xs = [self.contravariant.restrict(x).key for x in xs]
        plans: List[Tuple[StageElement, List[List[StageElement]]]] = []
        total = 0
        for p in previous:
            last = {x.key: y for x, y in p.payload[-1]}
            allowed = [fibers.get(last[rx].key, []) for rx in restricted_xs]
            count = 1
            for options in allowed:
                count *= len(options)
            total += count
            plans.append((p, allowed))
        self._check_cap(k, total + len(ys))
        found: List[StageElement] = []
        for p, allowed in plans:
            for choice in itertools.product(*allowed):
                found.append(StageElement(k, "function", p.payload + (tuple(zip(xs, choice)),)))
        return found


# --- Service ---

class StageService:
    """Caches the stage families of each guarded untyped language."""

    def __init__(self):
        logger.info("Initializing stage enumeration service")
        self._families: Dict[Tuple[str, BranchingEffect, bool], FinalFamily] = {}
        self._lock = threading.Lock()

    def _shape(self, lang) -> BranchingEffect:
        shape = getattr(lang, "stage_shape", None)
        if shape is None:
            raise WorkbenchError(f"Language {lang.name} has no finite stages")
        return shape

    def family(self, lang, filter_restrictions: bool = True) -> FinalFamily:
        shape = self._shape(lang)
        key = (lang.name, shape, filter_restrictions)
        with self._lock:
            found = self._families.get(key)
            if found is None:
                found = FinalFamily(shape, filter_restrictions=filter_restrictions)
                self._families[key] = found
        return found

    def enumerate_stage(self, lang, n: int, filter_restrictions: bool = True) -> List[StageElement]:
        """All elements of stage n, reducts first, duplicate-free."""
        elements = self.family(lang, filter_restrictions).stage(n)
        logger.info(f"Stage {n} of {lang.name}: {len(elements)} elements")
        return elements

    def approximant(self, lang, n: int, filter_restrictions: bool = True):
        """
        The n-th iterate of X -> final coalgebra of B(X, -), starting at the terminal family.

        Raises:
            StageTooLarge: if n exceeds ITERATION_BOUND
        """
        shape = self._shape(lang)
        if n < 0:
            raise ValueError(f"iteration must be >= 0, got {n}")
        if n > ITERATION_BOUND:
            raise StageTooLarge(f"Iteration {n} exceeds the iteration bound {ITERATION_BOUND}")
        family: Any = TerminalFamily()
        for _ in range(n):
            family = FinalFamily(shape, contravariant=family, filter_restrictions=filter_restrictions)
        return family


# Singleton instance
stage_service = StageService()
