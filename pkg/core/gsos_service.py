"""
The GSOS engine.

One rule interpreter (`apply_rule`) instantiates a law's conclusions over any
carrier: closed terms give the operational model, lazily unfolded
denotations give the denotational model. Everything else here (traces,
flatness, the bialgebra check) is built on that interpreter.
"""

import random
import threading
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import lcm
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

from core.behavior import (
    TERMINAL,
    TRIVIAL,
    BehaviorNode,
    Det,
    Dist,
    Environment,
    FunctionNode,
    PowerSet,
    Reduct,
    SubstComponent,
    Terminal,
    iter_weighted,
    mixture,
    product_bag,
)
from core.config import DENOTE_FUEL
from core.gitrees import Denotation, FiniteTree, Observer, ProbeSet, ProbeSetEmpty, RestrictedDenotation, first_difference
from core.kernel import (
    OperatorDecl,
    Signature,
    Sort,
    SortMismatch,
    Term,
    UnboundMetavariable,
    WorkbenchError,
    fold,
    make_term,
    primitive_recursion,
    rename_term,
)
from core.logger import get_logger
from core.rules import (
    ApplyFun,
    Arg,
    BoundProbe,
    EnvBase,
    EnvLookup,
    Expr,
    FreshVar,
    FunctionConclusion,
    HoGsosLaw,
    Op,
    ReductConclusion,
    ReductOf,
    SubstOf,
    TerminalConclusion,
    TrivialPayload,
    reduct_indices,
)

logger = get_logger(__name__)


class FlatnessViolation(WorkbenchError):
    """Custom exception for laws that are not relatively flat."""
    pass


class CorecursionFuelExhausted(WorkbenchError):
    """Custom exception for denotational unfoldings nested deeper than DENOTE_FUEL."""
    pass


class Carrier(Protocol):
    """What the rule interpreter needs from a model's state space."""

    signature: Signature

    def build(self, op: OperatorDecl, args: Sequence[Any]) -> Any: ...

    def behavior(self, x: Any, stage: Optional[int]) -> BehaviorNode: ...

    def restrict(self, x: Any, stage: Optional[int]) -> Any: ...

    def rename(self, x: Any, mapping: Tuple[int, ...], target: Sort) -> Any: ...

    def sort_of(self, x: Any) -> Sort: ...

    def embed(self, t: Term) -> Any: ...


# --- Rule interpretation ---

@dataclass(frozen=True)
class _Scope:
    op: OperatorDecl
    args: Tuple[Any, ...]
    nodes: Tuple[BehaviorNode, ...]
    reducts: Dict[int, Any] = field(default_factory=dict)
    probe: Any = None
    env: Optional[Environment] = None


class _Interpreter:
    def __init__(self, law: HoGsosLaw, carrier: Carrier, stage: Optional[int]):
        self.law = law
        self.carrier = carrier
        self.sig = carrier.signature
        self.stage = stage if law.guarded else None
        self.below = None if self.stage is None else self.stage - 1

    def restrict(self, x: Any) -> Any:
        if self.below is None or not getattr(self.carrier, "restrict_arguments", True):
            return x
        return self.carrier.restrict(x, self.below)

    def eval(self, expr: Expr, scope: _Scope, expected: Optional[Sort] = None) -> Any:
        if isinstance(expr, Arg):
            return self.restrict(scope.args[expr.index])
        if isinstance(expr, ReductOf):
            return scope.reducts[expr.index]
        if isinstance(expr, ApplyFun):
            step = scope.nodes[expr.index].step
            return step.apply(self.restrict(self.eval(expr.argument, scope)))
        if isinstance(expr, Op):
            values = [self.eval(a, scope) for a in expr.args]
            decl = self.sig.instantiate(expr.name, [self.carrier.sort_of(v) for v in values], expected)
            return self.carrier.build(decl, values)
        if isinstance(expr, BoundProbe):
            return scope.probe
        if isinstance(expr, TrivialPayload):
            return TRIVIAL
        if isinstance(expr, SubstOf):
            subst = scope.nodes[expr.index].subst
            if subst is None:
                raise WorkbenchError(f"Premise {expr.index} of {scope.op} has no substitution component")
            return subst.apply(self.environment(expr, scope))
        if isinstance(expr, EnvLookup):
            return scope.env.entries[scope.op.params[0]]
        if isinstance(expr, FreshVar):
            context = scope.env.context
            var = self.sig.instantiate("var", [], context + 1, (context,))
            return self.carrier.build(var, [])
        raise WorkbenchError(f"Cannot interpret conclusion expression {expr!r}")

    def environment(self, expr: SubstOf, scope: _Scope) -> Environment:
        base = expr.env.base
        if base is EnvBase.CURRENT:
            entries, context = list(scope.env.entries), scope.env.context
        elif base is EnvBase.WEAKENED:
            context = scope.env.context + 1
            inclusion = tuple(range(scope.env.context))
            entries = [self.carrier.rename(e, inclusion, context) for e in scope.env.entries]
        else:
            context = scope.op.result_sort
            entries = [
                self.carrier.build(self.sig.instantiate("var", [], context, (j,)), [])
                for j in range(context)
            ]
        entries.extend(self.eval(item, scope) for item in expr.env.extra)
        return Environment(tuple(entries), context)


def apply_rule(
    law: HoGsosLaw,
    op: OperatorDecl,
    premises: Sequence[Tuple[Any, BehaviorNode]],
    stage: Optional[int],
    carrier: Carrier,
) -> BehaviorNode:
    """
    Instantiate the law at one operator application.

    Args:
        law: the rule table
        op: the operator at the root
        premises: (argument, argument behavior) pairs
        stage: the stage for guarded laws, ignored otherwise
        carrier: where conclusion terms are built

    Returns:
        The behavior of op(arguments) prescribed by the law
    """
    interpreter = _Interpreter(law, carrier, stage)
    args = tuple(x for x, _ in premises)
    nodes = tuple(b for _, b in premises)
    rule = law.select(op.name, [b.tag for b in nodes], interpreter.stage)
    scope = _Scope(op, args, nodes)
    collapsed = law.guarded and interpreter.stage == 0
    conclusion = rule.conclusion

    if isinstance(conclusion.step, TerminalConclusion):
        step: Any = TERMINAL
    elif isinstance(conclusion.step, ReductConclusion):
        bags = []
        for alternative in conclusion.step.alternatives:
            refs = reduct_indices(alternative)
            choices = product_bag(law.effect, [nodes[i].step.bag for i in refs])

            def instantiate(choice, alternative=alternative, refs=refs):
                if collapsed:
                    return TRIVIAL
                return interpreter.eval(
                    alternative, replace(scope, reducts=dict(zip(refs, choice))), op.result_sort
                )

            bags.append(choices.map(instantiate))
        step = Reduct(mixture(law.effect, bags))
    else:
        body = conclusion.step.body
        if collapsed:
            step = FunctionNode(lambda x: TRIVIAL, 0)
        else:
            codomain = carrier.signature.codomain(op.result_sort)
            step = FunctionNode(
                lambda x: interpreter.eval(body, replace(scope, probe=interpreter.restrict(x)), codomain),
                interpreter.stage,
            )

    subst = None
    if conclusion.subst is not None:
        subst_expr = conclusion.subst
        if collapsed:
            subst = SubstComponent(lambda env: TRIVIAL, 0)
        else:
            def substitute(env: Environment) -> Any:
                restricted = Environment(tuple(interpreter.restrict(e) for e in env.entries), env.context)
                return interpreter.eval(subst_expr, replace(scope, env=restricted), env.context)

            subst = SubstComponent(substitute, interpreter.stage)
    return BehaviorNode(step, subst)


# --- Operational model ---

class TermCarrier:
    """Closed terms; restriction is the identity (the term presheaf is constant)."""

    def __init__(self, signature: Signature, model: "OperationalModel"):
        self.signature = signature
        self._model = model

    def build(self, op: OperatorDecl, args: Sequence[Term]) -> Term:
        return make_term(op, args)

    def behavior(self, x: Term, stage: Optional[int]) -> BehaviorNode:
        return self._model.behavior(x, stage)

    def restrict(self, x: Term, stage: Optional[int]) -> Term:
        return x

    def rename(self, x: Term, mapping: Tuple[int, ...], target: Sort) -> Term:
        return rename_term(self.signature, x, mapping, target)

    def sort_of(self, x: Term) -> Sort:
        return x.sort

    def embed(self, t: Term) -> Term:
        return t


class OperationalModel:
    """The transition structure on closed terms, computed by primitive recursion and memoized."""

    def __init__(self, law: HoGsosLaw, signature: Signature):
        self.law = law
        self.signature = signature
        self.carrier = TermCarrier(signature, self)
        self._memo: Dict[Optional[int], Dict[Term, BehaviorNode]] = {}
        self._lock = threading.RLock()

    def stage_key(self, stage: Optional[int]) -> Optional[int]:
        if not self.law.guarded:
            return None
        if stage is None:
            return 1
        if stage < 0:
            raise ValueError(f"stage must be >= 0, got {stage}")
        return min(stage, 1)

    def behavior(self, t: Term, stage: Optional[int] = None) -> BehaviorNode:
        if not t.is_closed:
            raise UnboundMetavariable(f"Operational model needs a closed term, got {t}")
        key = self.stage_key(stage)
        with self._lock:
            memo = self._memo.setdefault(key, {})
            return primitive_recursion(
                lambda op, pairs: apply_rule(self.law, op, pairs, key, self.carrier), t, cache=memo
            )


# --- Traces ---

@dataclass(frozen=True)
class TraceEntry:
    """One configuration. kind: reduct, function, terminal, fuel (out of fuel) or later (out of stages)."""

    term: Term
    kind: str
    branches: Tuple[Tuple[Term, Optional[Fraction]], ...] = ()
    chosen: Optional[int] = None


@dataclass(frozen=True)
class Trace:
    entries: Tuple[TraceEntry, ...]
    diverged: bool


def _choose(branches: Sequence[Tuple[Term, Optional[Fraction]]], strategy: str, rng: random.Random) -> int:
    if strategy == "first" or len(branches) == 1:
        return 0
    weights = [w for _, w in branches]
    if any(w is None for w in weights):
        return rng.randrange(len(branches))
    scale = lcm(*(w.denominator for w in weights))
    ticket = rng.randrange(scale)
    for index, w in enumerate(weights):
        ticket -= int(w * scale)
        if ticket < 0:
            return index
    return len(branches) - 1


def run_trace(
    model: OperationalModel,
    t: Term,
    fuel: int,
    stage: Optional[int] = None,
    branch: str = "first",
    seed: Optional[int] = None,
) -> Trace:
    """
    Follow reduct steps from t until a terminal or function node, or until
    `fuel` steps are spent. Guarded languages given an explicit stage spend
    one stage per step.
    """
    if fuel < 0:
        raise ValueError("fuel must be >= 0")
    if branch not in ("first", "sample"):
        raise ValueError(f"unknown branch strategy {branch!r}")
    rng = random.Random(seed)
    stages_left = stage if model.law.guarded else None
    entries: List[TraceEntry] = []
    current = t
    steps = 0
    while True:
        node = model.behavior(current, stages_left)
        step = node.step
        if isinstance(step, Terminal):
            entries.append(TraceEntry(current, "terminal"))
            return Trace(tuple(entries), False)
        if isinstance(step, FunctionNode):
            entries.append(TraceEntry(current, "function"))
            return Trace(tuple(entries), False)
        if stages_left == 0:
            entries.append(TraceEntry(current, "later"))
            return Trace(tuple(entries), False)
        if steps >= fuel:
            entries.append(TraceEntry(current, "fuel"))
            return Trace(tuple(entries), True)
        branches = tuple(iter_weighted(step.bag))
        if not branches:
            entries.append(TraceEntry(current, "reduct", branches))
            return Trace(tuple(entries), False)
        chosen = _choose(branches, branch, rng)
        entries.append(TraceEntry(current, "reduct", branches, chosen))
        current = branches[chosen][0]
        steps += 1
        if stages_left is not None:
            stages_left -= 1


# --- Flatness ---

@dataclass(frozen=True)
class FlatnessReport:
    flat: bool
    violations: Tuple[str, ...] = ()


def check_flatness(law: HoGsosLaw) -> FlatnessReport:
    """
    A rule for a rank-j operator may use rank <= j operators at the head of a
    conclusion term and only rank < j operators below it.
    """
    violations: List[str] = []

    def visit(expr: Expr, j: int, head: bool, rule: str) -> None:
        if isinstance(expr, Op):
            rank = law.rank_of(expr.name)
            if rank is None:
                violations.append(f"{rule}: {expr.name} has no rank")
            elif head and rank > j:
                violations.append(f"{rule}: head {expr.name} has rank {rank} > {j}")
            elif not head and rank >= j:
                violations.append(f"{rule}: nested {expr.name} has rank {rank} >= {j}")
            for arg in expr.args:
                visit(arg, j, False, rule)
        elif isinstance(expr, ApplyFun):
            visit(expr.argument, j, False, rule)
        elif isinstance(expr, SubstOf):
            for item in expr.env.extra:
                visit(item, j, False, rule)

    for rule in law.rules:
        j = law.rank_of(rule.pattern.operator)
        if j is None:
            violations.append(f"{rule}: {rule.pattern.operator} has no rank")
            continue
        for expr in rule.conclusion.expressions():
            visit(expr, j, True, str(rule))
    return FlatnessReport(not violations, tuple(violations))


# --- Bialgebra (pentagon) check ---

@dataclass(frozen=True)
class BialgebraViolation:
    sample: str
    subterm: str
    stage: Optional[int]
    detail: str


@dataclass(frozen=True)
class BialgebraReport:
    checked: int
    violations: Tuple[BialgebraViolation, ...]
    skipped: int = 0

    @property
    def holds(self) -> bool:
        return not self.violations


def check_bialgebra_law(
    law: HoGsosLaw,
    carrier: Carrier,
    samples: Sequence[Term],
    depth: int,
    probes: ProbeSet,
    exact: bool = False,
    show=str,
) -> BialgebraReport:
    """
    Compare, at every operator application inside the samples, the carrier's
    own behavior of a(σ) with the law applied to the arguments' behaviors.

    With exact=True children are compared as values (term carriers); otherwise
    both legs are observed to `depth` with `probes`.
    """
    observer = Observer(carrier.behavior, carrier.sort_of, probes, law.guarded, exact=exact, show=show)
    if law.guarded:
        stages: List[Optional[int]] = [0, 1] if exact else list(range(depth + 1))
    else:
        stages = [None]
    violations: List[BialgebraViolation] = []
    seen: Dict[Term, str] = {}
    for sample in samples:
        for sub in sample.subterms():
            if sub not in seen:
                seen[sub] = show(sample)
    checked = skipped = 0
    for sub, origin in seen.items():
        xs = [carrier.embed(c) for c in sub.children]
        whole = carrier.build(sub.op, xs)
        for stage in stages:
            cut = depth if stage is None else stage
            if exact and stage is None:
                cut = 1
            try:
                left = observer.node_tree(carrier.behavior(whole, stage), sub.sort, cut)
            except ProbeSetEmpty:
                skipped += 1
                break
            try:
                right_node = apply_rule(law, sub.op, [(x, carrier.behavior(x, stage)) for x in xs], stage, carrier)
                right = observer.node_tree(right_node, sub.sort, cut)
            except ProbeSetEmpty:
                skipped += 1
                break
            except WorkbenchError as e:
                violations.append(BialgebraViolation(origin, show(sub), stage, f"law failed: {e}"))
                break
            checked += 1
            diff = first_difference(left, right)
            if diff is not None:
                violations.append(BialgebraViolation(origin, show(sub), stage, diff.describe()))
                break
    logger.debug(f"Bialgebra check of {law.name}: {checked} comparisons, {len(violations)} violation(s), {skipped} skipped")
    return BialgebraReport(checked, tuple(violations), skipped)


# --- Denotational model ---

class DenotationalModel:
    """
    The denotational algebra of a relatively flat law, as a carrier.

    Each operator application is a Denotation whose node is obtained by
    running the law on the arguments' nodes; conclusion terms are built by
    re-entering the algebra. Applications are hash-consed on (operator, arguments).
    """

    def __init__(self, law: HoGsosLaw, signature: Signature, restrict_arguments: bool = True):
        report = check_flatness(law)
        if not report.flat:
            raise FlatnessViolation(f"Law {law.name} is not relatively flat: " + "; ".join(report.violations))
        self.law = law
        self.signature = signature
        self.restrict_arguments = restrict_arguments
        self._applications: Dict[Tuple[OperatorDecl, Tuple[Denotation, ...]], Denotation] = {}
        self._denotations: Dict[Term, Denotation] = {}
        self._lock = threading.Lock()
        self._local = threading.local()

    def algebra(self, op: OperatorDecl, args: Sequence[Denotation]) -> Denotation:
        args = tuple(args)
        if len(args) != op.arity:
            raise SortMismatch(f"{op} expects {op.arity} argument(s), got {len(args)}")
        for position, (arg, expected) in enumerate(zip(args, op.arg_sorts)):
            if arg.sort != expected:
                raise SortMismatch(f"Argument {position} of {op} must have sort {expected}, got {arg.sort}")
        key = (op, args)
        with self._lock:
            found = self._applications.get(key)
        if found is not None:
            return found
        created = Denotation(
            op.result_sort,
            lambda stage: self._unfold(op, args, stage),
            guarded=self.law.guarded,
            origin=key,
        )
        with self._lock:
            return self._applications.setdefault(key, created)

    def _unfold(self, op: OperatorDecl, args: Tuple[Denotation, ...], stage: Optional[int]) -> BehaviorNode:
        nesting = getattr(self._local, "nesting", 0)
        if nesting >= DENOTE_FUEL:
            raise CorecursionFuelExhausted(f"Unfolding {op} nested deeper than {DENOTE_FUEL}")
        self._local.nesting = nesting + 1
        try:
            premises = [(a, a.node(stage)) for a in args]
            return apply_rule(self.law, op, premises, stage, self)
        finally:
            self._local.nesting = nesting

    def denote(self, t: Term) -> Denotation:
        if not t.is_closed:
            raise UnboundMetavariable(f"Cannot denote open pattern {t}")
        return fold(self.algebra, t, cache=self._denotations)

    # Carrier protocol

    def build(self, op: OperatorDecl, args: Sequence[Denotation]) -> Denotation:
        return self.algebra(op, args)

    def behavior(self, x: Denotation, stage: Optional[int]) -> BehaviorNode:
        return x.node(stage)

    def restrict(self, x: Denotation, stage: Optional[int]) -> Denotation:
        return x.restrict(stage)

    def rename(self, x: Denotation, mapping: Tuple[int, ...], target: Sort) -> Denotation:
        if isinstance(x, RestrictedDenotation):
            return self.rename(x.base, mapping, target).restrict(x.bound)
        if x.origin is None:
            rebuilt = x.map_parts(lambda part: self.rename(part, mapping, target))
            if rebuilt is None:
                raise WorkbenchError(f"Cannot rename {x!r}: it was not built by the algebra")
            return rebuilt
        op, args = x.origin
        renamed, child_specs = self.signature.rename(op, mapping, target)
        return self.algebra(
            renamed,
            [self.rename(a, m, k) for a, (m, k) in zip(args, child_specs)],
        )

    def sort_of(self, x: Denotation) -> Sort:
        return x.sort

    def embed(self, t: Term) -> Denotation:
        return self.denote(t)


# --- Service ---

class GsosService:
    """Caches one operational and one denotational model per (law, signature)."""

    def __init__(self):
        logger.info("Initializing GSOS engine service")
        self._operational: Dict[Tuple[HoGsosLaw, int], OperationalModel] = {}
        self._denotational: Dict[Tuple[HoGsosLaw, int, bool], DenotationalModel] = {}
        self._lock = threading.Lock()

    def operational(self, lang) -> OperationalModel:
        key = (lang.law, id(lang.signature))
        with self._lock:
            model = self._operational.get(key)
            if model is None:
                model = OperationalModel(lang.law, lang.signature)
                self._operational[key] = model
                logger.debug(f"Built operational model for {lang.law.name}")
        return model

    def denotational(self, lang, restrict_arguments: bool = True) -> DenotationalModel:
        """
        The denotational model of the language's law. restrict_arguments=False
        builds the unguarded variant the guardedness suite must reject.
        """
        key = (lang.law, id(lang.signature), restrict_arguments)
        with self._lock:
            model = self._denotational.get(key)
        if model is None:
            try:
                model = DenotationalModel(lang.law, lang.signature, restrict_arguments)
            except FlatnessViolation as e:
                logger.error(f"Cannot build denotational model: {e}")
                raise
            with self._lock:
                model = self._denotational.setdefault(key, model)
        return model

    def operational_model(self, lang, t: Term, stage: Optional[int] = None) -> BehaviorNode:
        return self.operational(lang).behavior(t, stage)

    def run_trace(self, lang, t: Term, fuel: int, stage: Optional[int] = None, branch: str = "first", seed=None) -> Trace:
        return run_trace(self.operational(lang), t, fuel, stage, branch, seed)

    def denote(self, lang, t: Term) -> Denotation:
        return self.denotational(lang).denote(t)

    def denotational_algebra(self, lang, op: OperatorDecl, args: Sequence[Denotation]) -> Denotation:
        return self.denotational(lang).algebra(op, args)


# Singleton instance
gsos_service = GsosService()
