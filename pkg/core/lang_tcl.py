"""
The typed combinator languages xTCL and xPTCL.

Types are unit and arrows. Every combinator is a family indexed by the
types it is used at; a member is instantiated on demand from whatever sorts
are known (argument sorts, the expected result sort or explicit subscripts).
Surface terms may omit subscripts: they are inferred by unification and
unconstrained type variables default to unit.
"""

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from core.config import PROBE_LIMIT, PROBE_SIZE, TYPE_BOUND
from core.gitrees import UninhabitedAtSize
from core.kernel import (
    ArityMismatch,
    OperatorDecl,
    OperatorFamily,
    Signature,
    SortMismatch,
    Term,
    WorkbenchError,
    enumerate_terms,
    make_term,
)
from core.languages import Language
from core.logger import get_logger
from core.rules import HoGsosLaw
from core.syntax import CombinatorGrammar, RawTerm, RawType, show_combinator

logger = get_logger(__name__)


class IllTyped(WorkbenchError):
    """Custom exception for surface terms without a type."""
    pass


# --- Types ---

@dataclass(frozen=True)
class Ty:
    """unit when source and target are None; `var` marks an inference variable."""

    source: Optional["Ty"] = None
    target: Optional["Ty"] = None
    var: Optional[int] = None

    @property
    def is_arrow(self) -> bool:
        return self.source is not None

    @property
    def complexity(self) -> int:
        if self.is_arrow:
            return self.source.complexity + self.target.complexity
        return 1

    def __str__(self) -> str:
        if self.var is not None:
            return f"t{self.var}"
        if not self.is_arrow:
            return "unit"
        left = f"({self.source})" if self.source.is_arrow else str(self.source)
        return f"{left} -> {self.target}"


UNIT = Ty()


def arrow(*types: Ty) -> Ty:
    """arrow(a, b, c) is a -> (b -> c)."""
    result = types[-1]
    for source in reversed(types[:-1]):
        result = Ty(source, result)
    return result


@lru_cache(maxsize=None)
def types_of_complexity(n: int) -> Tuple[Ty, ...]:
    if n <= 0:
        return ()
    if n == 1:
        return (UNIT,)
    found: List[Ty] = []
    for left in range(1, n):
        for source in types_of_complexity(left):
            for target in types_of_complexity(n - left):
                found.append(Ty(source, target))
    return tuple(sorted(found, key=str))


def types_up_to(bound: int) -> List[Ty]:
    """All types of complexity at most `bound`, by complexity then text."""
    return [t for n in range(1, bound + 1) for t in types_of_complexity(n)]


def from_raw_type(raw: RawType) -> Ty:
    if raw.source is None:
        return UNIT
    return Ty(from_raw_type(raw.source), from_raw_type(raw.target))


# --- Unification ---

class _Unifier:
    def __init__(self):
        self.bindings: Dict[int, Ty] = {}
        self.counter = 0

    def fresh(self) -> Ty:
        self.counter += 1
        return Ty(var=self.counter)

    def resolve(self, t: Ty) -> Ty:
        while t.var is not None and t.var in self.bindings:
            t = self.bindings[t.var]
        return t

    def zonk(self, t: Ty, default: Optional[Ty] = None) -> Ty:
        t = self.resolve(t)
        if t.var is not None:
            return default if default is not None else t
        if t.is_arrow:
            return Ty(self.zonk(t.source, default), self.zonk(t.target, default))
        return t

    def occurs(self, var: int, t: Ty) -> bool:
        t = self.resolve(t)
        if t.var is not None:
            return t.var == var
        return t.is_arrow and (self.occurs(var, t.source) or self.occurs(var, t.target))

    def unify(self, a: Ty, b: Ty) -> None:
        a, b = self.resolve(a), self.resolve(b)
        if a.var is not None and b.var is not None and a.var == b.var:
            return
        if a.var is not None:
            if self.occurs(a.var, b):
                raise IllTyped(f"Cannot build the infinite type {a} = {self.zonk(b)}")
            self.bindings[a.var] = b
            return
        if b.var is not None:
            self.unify(b, a)
            return
        if a.is_arrow != b.is_arrow:
            raise IllTyped(f"Type mismatch: {self.zonk(a)} vs {self.zonk(b)}")
        if a.is_arrow:
            self.unify(a.source, b.source)
            self.unify(a.target, b.target)


# --- Signature ---

Schema = Callable[..., Tuple[Tuple[Ty, ...], Ty]]

SCHEMAS: Dict[str, Tuple[int, Schema]] = {
    "e": (0, lambda: ((), UNIT)),
    "I": (1, lambda a: ((), arrow(a, a))),
    "K": (2, lambda a, b: ((), arrow(a, b, a))),
    "K'": (2, lambda a, b: ((a,), arrow(b, a))),
    "S": (3, lambda a, b, c: ((), arrow(arrow(a, b, c), arrow(a, b), a, c))),
    "S'": (3, lambda a, b, c: ((arrow(a, b, c),), arrow(arrow(a, b), a, c))),
    "S''": (3, lambda a, b, c: ((arrow(a, b, c), arrow(a, b)), arrow(a, c))),
    "app": (2, lambda a, b: ((arrow(a, b), a), b)),
    "plus": (1, lambda a: ((a, a), a)),
}


class TypedFamily(OperatorFamily):
    """A combinator at every instance of its type schema, params bounded by TYPE_BOUND when enumerated."""

    def __init__(self, name: str, rank: int = 0, type_bound: int = TYPE_BOUND):
        self.variables, self.schema = SCHEMAS[name]
        arity = len(self.schema(*([UNIT] * self.variables))[0])
        super().__init__(name, arity, rank)
        self.type_bound = type_bound
        self._instances: Dict[Ty, List[OperatorDecl]] = {}

    def decl(self, params: Tuple[Ty, ...]) -> OperatorDecl:
        arg_sorts, result = self.schema(*params)
        return OperatorDecl(self.name, arg_sorts, result, self.rank, params)

    def instances(self, sort: Ty) -> List[OperatorDecl]:
        if sort in self._instances:
            return self._instances[sort]
        unifier = _Unifier()
        params = [unifier.fresh() for _ in range(self.variables)]
        _, result = self.schema(*params)
        found: List[OperatorDecl] = []
        try:
            unifier.unify(result, sort)
        except IllTyped:
            self._instances[sort] = found
            return found
        partial = [unifier.zonk(p) for p in params]
        free = sorted({p.var for p in partial if p.var is not None})
        pool = types_up_to(self.type_bound)
        for choice in itertools.product(pool, repeat=len(free)):
            assignment = dict(zip(free, choice))
            concrete = tuple(_substitute(p, assignment) for p in partial)
            if all(p.complexity <= self.type_bound for p in concrete):
                found.append(self.decl(concrete))
        self._instances[sort] = found
        return found

    def instantiate(self, arg_sorts, result_sort=None, params=None) -> OperatorDecl:
        if len(arg_sorts) != self.arity:
            raise ArityMismatch(f"{self.name} expects {self.arity} argument(s), got {len(arg_sorts)}")
        if params is not None:
            op = self.decl(tuple(params))
            if tuple(arg_sorts) != op.arg_sorts or (result_sort is not None and result_sort != op.result_sort):
                raise SortMismatch(f"{op} does not fit argument sorts {', '.join(map(str, arg_sorts))}")
            return op
        unifier = _Unifier()
        fresh = [unifier.fresh() for _ in range(self.variables)]
        expected_args, result = self.schema(*fresh)
        try:
            for expected, actual in zip(expected_args, arg_sorts):
                unifier.unify(expected, actual)
            if result_sort is not None:
                unifier.unify(result, result_sort)
        except IllTyped as e:
            raise SortMismatch(f"{self.name} cannot be used here: {e}") from None
        solved = tuple(unifier.zonk(p) for p in fresh)
        if any(_has_vars(p) for p in solved):
            raise SortMismatch(f"Cannot infer the type subscripts of {self.name}")
        return self.decl(solved)


def _has_vars(t: Ty) -> bool:
    if t.var is not None:
        return True
    return t.is_arrow and (_has_vars(t.source) or _has_vars(t.target))


def _substitute(t: Ty, assignment: Dict[int, Ty]) -> Ty:
    if t.var is not None:
        return assignment[t.var]
    if t.is_arrow:
        return Ty(_substitute(t.source, assignment), _substitute(t.target, assignment))
    return t


class TypedSignature(Signature):
    """Function observations at τ1 -> τ2 take τ1 arguments and produce τ2 results."""

    def domain(self, sort: Ty) -> Ty:
        if not sort.is_arrow:
            raise SortMismatch(f"No function observations at {sort}")
        return sort.source

    def codomain(self, sort: Ty) -> Ty:
        if not sort.is_arrow:
            raise SortMismatch(f"No function observations at {sort}")
        return sort.target


# --- Languages ---

class TypedCombinatorLanguage(Language):
    typed = True
    constants: Dict[str, int] = {"e": 0, "S": 0, "K": 0, "I": 0, "S'": 1, "K'": 1, "S''": 2}
    infix: Tuple[str, ...] = ()

    def build_signature(self, law: HoGsosLaw) -> Signature:
        names = list(self.constants) + ["app"] + list(self.infix)
        return TypedSignature(self.name, [TypedFamily(n, law.rank_of(n) or 0) for n in names])

    @property
    def grammar(self) -> CombinatorGrammar:
        return CombinatorGrammar(self.constants, self.infix, typed=True)

    @property
    def default_sort(self) -> Ty:
        return UNIT

    def sample_sorts(self) -> List[Ty]:
        return types_up_to(2)

    def parse(self, text: str) -> Term:
        return self.elaborate(self.grammar.parse(text))

    def typecheck(self, raw: RawTerm) -> Ty:
        """The type of a surface term; agrees with the sort of its elaboration."""
        return self.elaborate(raw).sort

    def elaborate(self, raw: RawTerm) -> Term:
        unifier = _Unifier()
        nodes: List[Tuple[RawTerm, Tuple[Ty, ...]]] = []

        def infer(node: RawTerm) -> Tuple[int, Ty]:
            variables, schema = SCHEMAS[node.name]
            if node.types is not None:
                if len(node.types) != variables:
                    raise IllTyped(f"{node.name} takes {variables} type subscript(s), got {len(node.types)}")
                params = tuple(from_raw_type(t) for t in node.types)
            else:
                params = tuple(unifier.fresh() for _ in range(variables))
            expected_args, result = schema(*params)
            position = len(nodes)
            nodes.append((node, params))
            for child, expected in zip(node.args, expected_args):
                _, actual = infer(child)
                unifier.unify(expected, actual)
            return position, result

        infer(raw)
        iterator = iter(nodes)

        def build(node: RawTerm) -> Term:
            _, params = next(iterator)
            concrete = tuple(unifier.zonk(p, UNIT) for p in params)
            children = [build(child) for child in node.args]
            op = self.signature.family(node.name).decl(concrete)
            return make_term(op, children)

        return build(raw)

    def show(self, t: Term) -> str:
        plain = show_combinator(t)
        try:
            if self.parse(plain) == t:
                return plain
        except WorkbenchError:
            pass
        return show_combinator(t, self._subscripts)

    @staticmethod
    def _subscripts(node: Term) -> Optional[str]:
        if not node.op.params:
            return None
        return "[" + ", ".join(str(p) for p in node.op.params) + "]"

    def probes_for_type(self, sort: Ty, size: int = PROBE_SIZE, limit: int = PROBE_LIMIT) -> List[Term]:
        """The first `limit` closed terms of `sort` up to `size` nodes."""
        terms = enumerate_terms(self.signature, sort, size)
        if not terms:
            raise UninhabitedAtSize(f"No closed terms of type {sort} with at most {size} nodes")
        return terms[:limit]


class Xtcl(TypedCombinatorLanguage):
    name = "xtcl"
    rules_file = "xtcl.rules"


class Xptcl(TypedCombinatorLanguage):
    name = "xptcl"
    rules_file = "xptcl.rules"
    infix = ("plus",)
