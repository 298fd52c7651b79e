"""
The guarded untyped lambda calculus over finite contexts.

Sorts are context sizes m. Variables are de Bruijn levels: var[j] at m
refers to the j-th enclosing binder from the outside, and lam at m binds
level m of its body. Renaming, weakening, simultaneous substitution and
weak-head beta reduction are implemented here directly on terms; they are
the independent oracles the engine's substitution and computation
observables are checked against.
"""

from typing import List, Optional, Sequence, Tuple

from core.kernel import (
    ArityMismatch,
    OperatorDecl,
    OperatorFamily,
    Signature,
    SortMismatch,
    Term,
    WorkbenchError,
    make_term,
    rename_term,
)
from core.languages import Language
from core.logger import get_logger
from core.rules import HoGsosLaw
from core.syntax import LambdaGrammar, RawTerm, show_lambda

logger = get_logger(__name__)


class EnvLengthMismatch(WorkbenchError):
    """Custom exception for substitutions whose length differs from the term's context."""
    pass


def _context(sort) -> int:
    if not isinstance(sort, int) or isinstance(sort, bool) or sort < 0:
        raise SortMismatch(f"Lambda sorts are context sizes, got {sort!r}")
    return sort


class VarFamily(OperatorFamily):
    def __init__(self, rank: int = 0):
        super().__init__("var", 0, rank)

    def instances(self, sort) -> List[OperatorDecl]:
        m = _context(sort)
        return [OperatorDecl("var", (), m, self.rank, (j,)) for j in range(m)]

    def instantiate(self, arg_sorts, result_sort=None, params=None) -> OperatorDecl:
        if arg_sorts:
            raise ArityMismatch("var takes no arguments")
        if result_sort is None or params is None:
            raise SortMismatch("var needs its context and index")
        m, (j,) = _context(result_sort), params
        if not 0 <= j < m:
            raise SortMismatch(f"Variable {j} is not bound in a context of size {m}")
        return OperatorDecl("var", (), m, self.rank, (j,))


class LamFamily(OperatorFamily):
    def __init__(self, rank: int = 0):
        super().__init__("lam", 1, rank)

    def instances(self, sort) -> List[OperatorDecl]:
        m = _context(sort)
        return [OperatorDecl("lam", (m + 1,), m, self.rank)]

    def instantiate(self, arg_sorts, result_sort=None, params=None) -> OperatorDecl:
        if len(arg_sorts) != 1:
            raise ArityMismatch(f"lam expects 1 argument, got {len(arg_sorts)}")
        m = _context(arg_sorts[0]) - 1
        if m < 0 or (result_sort is not None and result_sort != m):
            raise SortMismatch(f"lam cannot bind a body of context {arg_sorts[0]} at {result_sort}")
        return OperatorDecl("lam", (m + 1,), m, self.rank)


class AppFamily(OperatorFamily):
    def __init__(self, rank: int = 0):
        super().__init__("app", 2, rank)

    def instances(self, sort) -> List[OperatorDecl]:
        m = _context(sort)
        return [OperatorDecl("app", (m, m), m, self.rank)]

    def instantiate(self, arg_sorts, result_sort=None, params=None) -> OperatorDecl:
        if len(arg_sorts) != 2:
            raise ArityMismatch(f"app expects 2 arguments, got {len(arg_sorts)}")
        m = _context(arg_sorts[0])
        if arg_sorts[1] != m or (result_sort is not None and result_sort != m):
            raise SortMismatch(f"app needs both sides in one context, got {arg_sorts[0]} and {arg_sorts[1]}")
        return OperatorDecl("app", (m, m), m, self.rank)


class LambdaSignature(Signature):
    def rename(
        self, op: OperatorDecl, mapping: Tuple[int, ...], target: int
    ) -> Tuple[OperatorDecl, List[Tuple[Tuple[int, ...], int]]]:
        """Rename along `mapping` (old level -> new level) into context `target`."""
        if len(mapping) != op.result_sort:
            raise SortMismatch(f"Renaming of context {op.result_sort} needs {op.result_sort} entries, got {len(mapping)}")
        if op.name == "var":
            return self.instantiate("var", [], target, (mapping[op.params[0]],)), []
        if op.name == "lam":
            return self.instantiate("lam", [target + 1], target), [(mapping + (target,), target + 1)]
        return self.instantiate("app", [target, target], target), [(mapping, target), (mapping, target)]


# --- Term helpers ---

_SIGNATURE = LambdaSignature("lambda-syntax", [VarFamily(), LamFamily(), AppFamily()])


def var(m: int, j: int, sig: Signature = _SIGNATURE) -> Term:
    return make_term(sig.instantiate("var", [], m, (j,)))


def lam(body: Term, sig: Signature = _SIGNATURE) -> Term:
    return make_term(sig.instantiate("lam", [body.sort]), [body])


def app(fun: Term, arg: Term, sig: Signature = _SIGNATURE) -> Term:
    return make_term(sig.instantiate("app", [fun.sort, arg.sort]), [fun, arg])


def rename(t: Term, mapping: Sequence[int], target: int) -> Term:
    """Rename the free variables of t along mapping: level j becomes mapping[j] in context `target`."""
    return rename_term(_SIGNATURE, t, tuple(mapping), target)


def weaken(t: Term) -> Term:
    """t in one larger context, along the inclusion m -> m + 1."""
    return rename(t, range(t.sort), t.sort + 1)


def subst(t: Term, env: Sequence[Term], context: Optional[int] = None) -> Term:
    """
    Simultaneous capture-avoiding substitution of env[j] for variable j.

    Args:
        t: a term in context m
        env: m terms, all in context l
        context: l, required when env is empty

    Raises:
        EnvLengthMismatch: if len(env) differs from m
    """
    if len(env) != t.sort:
        raise EnvLengthMismatch(f"Term in context {t.sort} needs {t.sort} substitutes, got {len(env)}")
    if context is None:
        context = env[0].sort if env else 0
    for entry in env:
        if entry.sort != context:
            raise SortMismatch(f"Substitutes must live in context {context}, got {entry.sort}")
    name = t.op.name
    if name == "var":
        return env[t.op.params[0]]
    if name == "lam":
        extended = [weaken(e) for e in env] + [var(context + 1, context)]
        return lam(subst(t.children[0], extended, context + 1))
    return app(subst(t.children[0], env, context), subst(t.children[1], env, context))


def beta_step(t: Term) -> Optional[Term]:
    """The weak-head reduct of t, or None when t is an abstraction or head-stuck."""
    if t.op.name != "app":
        return None
    fun, arg = t.children
    if fun.op.name == "lam":
        m = t.sort
        return subst(fun.children[0], [var(m, j) for j in range(m)] + [arg], m)
    reduct = beta_step(fun)
    if reduct is None:
        return None
    return app(reduct, arg)


def _elaborate(raw: RawTerm, m: int) -> Term:
    if raw.name == "var":
        return var(m, raw.index)
    if raw.name == "lam":
        return lam(_elaborate(raw.args[0], m + 1))
    return app(_elaborate(raw.args[0], m), _elaborate(raw.args[1], m))


class Lambda(Language):
    name = "lambda"
    rules_file = "lambda.rules"
    pair_size = 8

    def build_signature(self, law: HoGsosLaw) -> Signature:
        return _SIGNATURE

    @property
    def default_sort(self) -> int:
        return 0

    def parse(self, text: str, free: Sequence[str] = ()) -> Term:
        """Parse a term whose free names, if any, form the context (level 0 first)."""
        return _elaborate(LambdaGrammar().parse(text, free), len(free))

    def show(self, t: Term) -> str:
        return show_lambda(t)
