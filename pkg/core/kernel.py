"""
Sorted signatures and well-sorted terms.

A signature is a table of operator families. A family is instantiated per sort
on demand (typed combinators exist at every type, lambda operators at every
context size), so a signature never materializes an infinite operator set.
Terms are immutable trees over instantiated operators; metavariable leaves are
only meaningful inside rule patterns and are rejected by the closed-term
operations (fold, primitive recursion, the operational model).
"""

import itertools
import random
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import (
    Any,
    Callable,
    Dict,
    Hashable,
    Iterator,
    List,
    Mapping,
    MutableMapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from core.logger import get_logger

logger = get_logger(__name__)

Sort = Hashable

UNTYPED = "u"


# --- Errors ---

class WorkbenchError(Exception):
    """Base exception for all workbench errors."""
    pass


class ArityMismatch(WorkbenchError):
    """Custom exception for operator applications with the wrong number of arguments."""
    pass


class SortMismatch(WorkbenchError):
    """Custom exception for ill-sorted operator applications or comparisons."""
    pass


class UnboundMetavariable(WorkbenchError):
    """Custom exception for closed-term operations that meet a metavariable."""
    pass


class UnknownOperator(WorkbenchError):
    """Custom exception for operator names missing from a signature."""
    pass


class UninhabitedSort(WorkbenchError):
    """Custom exception for sorts without closed terms in the requested size range."""
    pass


# --- Syntax ---

@dataclass(frozen=True)
class OperatorDecl:
    """One instantiated operator. `params` distinguishes family members (type subscripts, variable indices)."""

    name: str
    arg_sorts: Tuple[Sort, ...]
    result_sort: Sort
    rank: int = 0
    params: Tuple[Any, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)

    def __str__(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}[{', '.join(str(p) for p in self.params)}]"


@dataclass(frozen=True)
class Metavariable:
    name: str
    sort: Sort

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class Term:
    head: Union[OperatorDecl, Metavariable]
    children: Tuple["Term", ...] = ()

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        if self._hash != other._hash:
            return False
        return self.head == other.head and self.children == other.children

    def __hash__(self) -> int:
        return self._hash

    @cached_property
    def _hash(self) -> int:
        return hash((self.head, self.children))

    @property
    def sort(self) -> Sort:
        if isinstance(self.head, Metavariable):
            return self.head.sort
        return self.head.result_sort

    @property
    def op(self) -> OperatorDecl:
        if isinstance(self.head, Metavariable):
            raise UnboundMetavariable(f"Metavariable {self.head} has no operator")
        return self.head

    @cached_property
    def is_closed(self) -> bool:
        if isinstance(self.head, Metavariable):
            return False
        return all(child.is_closed for child in self.children)

    @cached_property
    def size(self) -> int:
        return 1 + sum(child.size for child in self.children)

    @cached_property
    def depth(self) -> int:
        return 1 + max((child.depth for child in self.children), default=0)

    def subterms(self) -> List["Term"]:
        """Distinct subterms in post-order, the term itself last."""
        seen: Dict["Term", None] = {}

        def visit(t: "Term") -> None:
            if t in seen:
                return
            for child in t.children:
                visit(child)
            seen[t] = None

        visit(self)
        return list(seen)

    def __str__(self) -> str:
        if not self.children:
            return str(self.head)
        return f"{self.head}({', '.join(str(c) for c in self.children)})"


def make_term(op: OperatorDecl, args: Sequence[Term] = ()) -> Term:
    """
    Build the node op(args) after checking arity and argument sorts.

    Raises:
        ArityMismatch: if the argument count differs from the operator's arity
        SortMismatch: if an argument has the wrong sort
    """
    args = tuple(args)
    if len(args) != op.arity:
        raise ArityMismatch(f"{op} expects {op.arity} argument(s), got {len(args)}")
    for position, (arg, expected) in enumerate(zip(args, op.arg_sorts)):
        if arg.sort != expected:
            raise SortMismatch(
                f"Argument {position} of {op} must have sort {expected}, got {arg.sort}"
            )
    return Term(op, args)


def meta(name: str, sort: Sort) -> Term:
    return Term(Metavariable(name, sort))


# --- Folds ---

Algebra = Union[Callable[[OperatorDecl, Sequence[Any]], Any], Mapping[str, Callable[..., Any]]]


def _as_algebra(alg: Algebra) -> Callable[[OperatorDecl, Sequence[Any]], Any]:
    if isinstance(alg, Mapping):
        def by_name(op: OperatorDecl, values: Sequence[Any]) -> Any:
            if op.name not in alg:
                raise UnknownOperator(f"Algebra has no interpretation for {op.name}")
            return alg[op.name](*values)
        return by_name
    return alg


def fold(alg: Algebra, t: Term, cache: Optional[MutableMapping[Term, Any]] = None) -> Any:
    """
    Evaluate t in an algebra, bottom-up.

    Args:
        alg: either a callable (op, child values) -> value, or a mapping from
             operator names to callables taking the child values positionally
        t: a closed term
        cache: optional memo shared across calls, keyed by subterm

    Returns:
        The value of t in the algebra
    """
    interpret = _as_algebra(alg)
    memo = cache if cache is not None else {}

    def go(node: Term) -> Any:
        if node in memo:
            return memo[node]
        if isinstance(node.head, Metavariable):
            raise UnboundMetavariable(f"Cannot fold over metavariable {node.head}")
        value = interpret(node.head, [go(child) for child in node.children])
        memo[node] = value
        return value

    return go(t)


def primitive_recursion(
    step: Callable[[OperatorDecl, Sequence[Tuple[Term, Any]]], Any],
    t: Term,
    cache: Optional[MutableMapping[Term, Any]] = None,
) -> Any:
    """Like fold, but each step also sees the original child terms next to their results."""
    memo = cache if cache is not None else {}

    def go(node: Term) -> Any:
        if node in memo:
            return memo[node]
        if isinstance(node.head, Metavariable):
            raise UnboundMetavariable(f"Cannot recurse over metavariable {node.head}")
        value = step(node.head, [(child, go(child)) for child in node.children])
        memo[node] = value
        return value

    return go(t)


# --- Signatures ---

class OperatorFamily(ABC):
    """A family of operators sharing a name; members differ by params."""

    def __init__(self, name: str, arity: int, rank: int = 0):
        self.name = name
        self.arity = arity
        self.rank = rank

    @abstractmethod
    def instances(self, sort: Sort) -> List[OperatorDecl]:
        """All members with result sort `sort`."""

    @abstractmethod
    def instantiate(
        self,
        arg_sorts: Sequence[Sort],
        result_sort: Optional[Sort] = None,
        params: Optional[Tuple[Any, ...]] = None,
    ) -> OperatorDecl:
        """The member fitting the given argument sorts (and result sort or params when needed)."""


class PlainFamily(OperatorFamily):
    """A single-sorted operator."""

    def __init__(self, name: str, arity: int, rank: int = 0, sort: Sort = UNTYPED):
        super().__init__(name, arity, rank)
        self.sort = sort

    @cached_property
    def decl(self) -> OperatorDecl:
        return OperatorDecl(self.name, (self.sort,) * self.arity, self.sort, self.rank)

    def instances(self, sort: Sort) -> List[OperatorDecl]:
        return [self.decl] if sort == self.sort else []

    def instantiate(self, arg_sorts, result_sort=None, params=None) -> OperatorDecl:
        if len(arg_sorts) != self.arity:
            raise ArityMismatch(f"{self.name} expects {self.arity} argument(s), got {len(arg_sorts)}")
        if any(s != self.sort for s in arg_sorts) or (result_sort is not None and result_sort != self.sort):
            raise SortMismatch(f"{self.name} is only defined at sort {self.sort}")
        return self.decl


class Signature:
    """
    Operator table of one language.

    Subclasses override `domain`/`codomain` for languages whose function
    observations change sort, and `rename` for languages with binders.
    """

    def __init__(self, name: str, families: Sequence[OperatorFamily]):
        self.name = name
        self._families: Dict[str, OperatorFamily] = {f.name: f for f in families}
        self._operators: Dict[Sort, List[OperatorDecl]] = {}
        self._lock = threading.Lock()

    @property
    def family_names(self) -> List[str]:
        return sorted(self._families)

    def family(self, name: str) -> OperatorFamily:
        try:
            return self._families[name]
        except KeyError:
            raise UnknownOperator(f"Signature {self.name} has no operator {name}") from None

    def rank(self, name: str) -> int:
        return self.family(name).rank

    def operators(self, sort: Sort) -> List[OperatorDecl]:
        """All operators with result sort `sort`, ordered by name then params."""
        with self._lock:
            cached = self._operators.get(sort)
        if cached is not None:
            return cached
        found: List[OperatorDecl] = []
        for name in sorted(self._families):
            found.extend(self._families[name].instances(sort))
        found.sort(key=operator_key)
        with self._lock:
            self._operators[sort] = found
        return found

    def instantiate(
        self,
        name: str,
        arg_sorts: Sequence[Sort],
        result_sort: Optional[Sort] = None,
        params: Optional[Tuple[Any, ...]] = None,
    ) -> OperatorDecl:
        return self.family(name).instantiate(tuple(arg_sorts), result_sort, params)

    def domain(self, sort: Sort) -> Sort:
        """Sort of the arguments a function observation at `sort` accepts."""
        return sort

    def codomain(self, sort: Sort) -> Sort:
        """Sort of the results a function observation at `sort` produces."""
        return sort

    def rename(
        self, op: OperatorDecl, mapping: Tuple[int, ...], target: Sort
    ) -> Tuple[OperatorDecl, List[Tuple[Tuple[int, ...], Sort]]]:
        raise NotImplementedError(f"Signature {self.name} has no binders to rename")

    @cached_property
    def term_space(self) -> "TermSpace":
        return TermSpace(self)


def operator_key(op: OperatorDecl) -> Tuple[str, str]:
    return (op.name, ", ".join(str(p) for p in op.params))


def rename_term(sig: Signature, t: Term, mapping: Tuple[int, ...], target: Sort) -> Term:
    """Structural renaming driven by the signature's binder discipline."""
    op, child_specs = sig.rename(t.op, mapping, target)
    children = [
        rename_term(sig, child, child_mapping, child_target)
        for child, (child_mapping, child_target) in zip(t.children, child_specs)
    ]
    return make_term(op, children)


# --- Enumeration and sampling ---

def compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Ordered ways to write `total` as `parts` positive summands, lexicographically."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


class TermSpace:
    """Counts, lists and uniformly samples the closed terms of a signature by sort and size."""

    def __init__(self, sig: Signature):
        self.sig = sig
        self._counts: Dict[Tuple[Sort, int], int] = {}
        self._terms: Dict[Tuple[Sort, int], List[Term]] = {}

    def count(self, sort: Sort, size: int) -> int:
        if size <= 0:
            return 0
        key = (sort, size)
        if key not in self._counts:
            self._counts[key] = sum(self._op_count(op, size) for op in self.sig.operators(sort))
        return self._counts[key]

    def _op_count(self, op: OperatorDecl, size: int) -> int:
        if op.arity == 0:
            return 1 if size == 1 else 0
        total = 0
        for comp in compositions(size - 1, op.arity):
            product = 1
            for arg_sort, part in zip(op.arg_sorts, comp):
                product *= self.count(arg_sort, part)
                if product == 0:
                    break
            total += product
        return total

    def terms(self, sort: Sort, size: int) -> List[Term]:
        """All closed terms of exactly `size` nodes."""
        if size <= 0:
            return []
        key = (sort, size)
        if key in self._terms:
            return self._terms[key]
        found: List[Term] = []
        for op in self.sig.operators(sort):
            if op.arity == 0:
                if size == 1:
                    found.append(Term(op))
                continue
            for comp in compositions(size - 1, op.arity):
                pools = [self.terms(arg_sort, part) for arg_sort, part in zip(op.arg_sorts, comp)]
                for children in itertools.product(*pools):
                    found.append(Term(op, tuple(children)))
        self._terms[key] = found
        return found

    def enumerate(self, sort: Sort, max_size: int) -> List[Term]:
        result: List[Term] = []
        for size in range(1, max_size + 1):
            result.extend(self.terms(sort, size))
        return result

    def sample(self, sort: Sort, size: int, rng: random.Random) -> Term:
        """A uniformly random closed term of exactly `size` nodes."""
        total = self.count(sort, size)
        if total == 0:
            raise UninhabitedSort(f"No closed terms of sort {sort} with size {size}")
        choice = rng.randrange(total)
        for op in self.sig.operators(sort):
            weight = self._op_count(op, size)
            if choice < weight:
                return self._sample_op(op, size, choice, rng)
            choice -= weight
        raise AssertionError("sampling index out of range")

    def _sample_op(self, op: OperatorDecl, size: int, choice: int, rng: random.Random) -> Term:
        if op.arity == 0:
            return Term(op)
        for comp in compositions(size - 1, op.arity):
            weight = 1
            for arg_sort, part in zip(op.arg_sorts, comp):
                weight *= self.count(arg_sort, part)
            if choice < weight:
                children = tuple(
                    self.sample(arg_sort, part, rng) for arg_sort, part in zip(op.arg_sorts, comp)
                )
                return Term(op, children)
            choice -= weight
        raise AssertionError("sampling index out of range")


def enumerate_terms(sig: Signature, sort: Sort, max_size: int) -> List[Term]:
    """
    All closed terms of `sort` with at most `max_size` nodes.

    Ordered by size, then operator name and params, then children; duplicate-free.
    """
    if max_size < 1:
        return []
    return sig.term_space.enumerate(sort, max_size)
