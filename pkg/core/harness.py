"""
Property suites over the five languages.

Each check returns one CheckRecord (serialized as a JSON line by the CLI and
the suites router). Checks are deterministic under a fixed seed. A Mutation
swaps rules of a language's law, or switches off an engine safeguard, so the
suites can be shown to fail when the semantics is broken.
"""

import inspect
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from core.behavior import BranchingEffect, Det, Environment, FunctionNode, Reduct, Terminal, iter_weighted
from core.bisim_service import UniverseExplosion, bisim_service
from core.config import (
    ADEQUACY_MIN_DISTINGUISHED,
    ADEQUACY_PAIRS,
    COMPOSITION_SAMPLES,
    DEFAULT_DEPTH,
    DENOTATIONAL_SAMPLES,
    PENTAGON_SAMPLES,
    PROBE_SIZE,
    SEED,
    TERM_SIZE,
)
from core.data_models import CheckRecord
from core.gitrees import (
    Denotation,
    GuardednessViolation,
    InstrumentedDenotation,
    Observer,
    ProbeSetEmpty,
    RecordingDenotation,
    distance,
    first_difference,
    graft,
    tower_tree,
    underlying,
)
from core.gsos_service import DenotationalModel, check_bialgebra_law, gsos_service
from core.kernel import Sort, Term, UninhabitedSort, WorkbenchError, make_term
from core.languages import LANGUAGE_NAMES, get_language
from core.logger import get_logger
from core.rules import HoGsosLaw, parse_rule
from core.stage_service import StageTooLarge, stage_service

logger = get_logger(__name__)

# Stage sizes of the guarded untyped languages, by exhaustive enumeration
GOLDEN_STAGE_SIZES: Dict[str, Dict[int, int]] = {
    "xcl": {0: 2, 1: 6, 2: 5446},
    "xnccl": {0: 3, 1: 35},
}


class UnknownSuite(WorkbenchError):
    """Custom exception for suite or mutation names missing from the registries."""
    pass


# --- Mutations ---

@dataclass(frozen=True)
class Mutation:
    """
    A named corruption of the semantics.

    rules: (language, replacement rule text) pairs; a replacement takes the
    place of the rule with the same pattern.
    """

    name: str
    description: str
    rules: Tuple[Tuple[str, str], ...] = ()
    unfiltered_tuples: bool = False
    unguarded_arguments: bool = False

    @property
    def languages(self) -> Tuple[str, ...]:
        if self.unfiltered_tuples:
            return ("xcl", "xnccl")
        if self.unguarded_arguments:
            return ("xcl", "xnccl", "lambda")
        return tuple(dict.fromkeys(language for language, _ in self.rules))

    def law_for(self, lang) -> HoGsosLaw:
        law = lang.law
        for language, text in self.rules:
            if language == lang.name:
                law = law.with_rule(parse_rule(text))
        if law is lang.law:
            return law
        return replace(law, name=f"{law.name}~{self.name}")

    def apply(self, lang):
        """The language running the mutated law, or the language itself for engine-level mutations."""
        law = self.law_for(lang)
        return lang if law is lang.law else lang.with_law(law)


def _for(languages: Sequence[str], text: str) -> Tuple[Tuple[str, str], ...]:
    return tuple((language, text) for language in languages)


_COMBINATORY = ("xtcl", "xptcl", "xcl", "xnccl")

MUTATIONS: Dict[str, Mutation] = {
    m.name: m
    for m in (
        Mutation("I-returns-I", "I ignores its argument and returns itself", _for(_COMBINATORY, "I => fun I")),
        Mutation("K'-drops-argument", "K'(p) behaves as I", _for(_COMBINATORY, "K'(_) => fun ?")),
        Mutation(
            "S''-swaps-arguments",
            "S''(p, q) r reduces to (q r)(p r)",
            _for(_COMBINATORY, "S''(_, _) => fun app(app(x1, ?), app(x0, ?))"),
        ),
        Mutation(
            "app-function-ignores-argument",
            "applying a function steps to the function itself",
            _for(("xtcl", "xptcl"), "app(F, _) => reduct x0") + _for(("xcl", "xnccl"), "app(F, _) @+ => reduct x0"),
        ),
        Mutation("plus-biased", "p (+) q picks p twice as often", _for(("xptcl",), "plus(_, _) => reduct x0 | x0 | x1")),
        Mutation("par-forgets-right", "p || q drops the right reduct", (("xnccl", "par(R, R) => reduct par(y0, x1)"),)),
        Mutation(
            "lambda-app-drops-argument",
            "(M N) steps to M' instead of (M' N)",
            (("lambda", "app(R, _) => reduct y0 with subst app(g0[u], g1[u])"),),
        ),
        Mutation("unfiltered-tuples", "function stages keep restriction-incompatible tuples", unfiltered_tuples=True),
        Mutation("unguarded-arguments", "function nodes read their arguments at their own stage", unguarded_arguments=True),
    )
}


def get_mutation(name: Optional[str]) -> Optional[Mutation]:
    if name is None:
        return None
    try:
        return MUTATIONS[name]
    except KeyError:
        raise UnknownSuite(f"Unknown mutation {name!r}; expected one of {', '.join(MUTATIONS)}") from None


# --- Term generation ---

def gen_terms(lang, sort: Sort, max_size: int, count: int, seed: int) -> List[Term]:
    """
    Up to `count` distinct closed terms of `sort` with at most `max_size` nodes.

    A size is drawn uniformly among the inhabited ones, then a term uniformly
    among those of that size; duplicates are redrawn. Fewer than `count`
    terms come back only when the sort has fewer terms in range.

    Raises:
        UninhabitedSort: if no closed term of `sort` has at most `max_size` nodes
    """
    if count <= 0:
        return []
    space = lang.signature.term_space
    sizes = [size for size in range(1, max_size + 1) if space.count(sort, size) > 0]
    if not sizes:
        raise UninhabitedSort(f"No closed terms of sort {sort} with at most {max_size} nodes")
    target = min(count, sum(space.count(sort, size) for size in sizes))
    rng = random.Random(seed)
    found: Dict[Term, None] = {}
    attempts = 0
    while len(found) < target and attempts < 50 * count:
        found.setdefault(space.sample(sort, rng.choice(sizes), rng), None)
        attempts += 1
    return list(found)


def _sample_pairs(lang, count: int, max_size: int, seed: int) -> List[Tuple[Term, Term]]:
    sorts = lang.sample_sorts()
    pairs: List[Tuple[Term, Term]] = []
    for index, sort in enumerate(sorts):
        share = count // len(sorts) + (1 if index < count % len(sorts) else 0)
        try:
            terms = gen_terms(lang, sort, max_size, 2 * share, seed + index)
        except UninhabitedSort:
            continue
        pairs.extend(zip(terms[0::2], terms[1::2]))
    return pairs


def _samples(lang, count: int, max_size: int, seed: int) -> List[Term]:
    sorts = lang.sample_sorts()
    found: List[Term] = []
    for index, sort in enumerate(sorts):
        share = count // len(sorts) + (1 if index < count % len(sorts) else 0)
        try:
            found.extend(gen_terms(lang, sort, max_size, share, seed + index))
        except UninhabitedSort:
            continue
    return found


def _record(
    suite: str,
    lang,
    seed: int,
    params: Dict[str, Any],
    mutation: Optional[Mutation],
    checked: int,
    violations: List[str],
    details: Optional[Dict[str, Any]] = None,
    skipped: bool = False,
) -> CheckRecord:
    verdict = "skipped" if skipped else ("fail" if violations else "pass")
    return CheckRecord(
        suite=suite,
        language=lang.name,
        seed=seed,
        params=params,
        mutation=None if mutation is None else mutation.name,
        verdict=verdict,
        checked=checked,
        violations=len(violations),
        witness=violations[0] if violations else None,
        details=details or {},
    )


# --- Suites ---

def check_adequacy(
    lang,
    pairs: Optional[Sequence[Tuple[Term, Term]]] = None,
    count: int = ADEQUACY_PAIRS,
    depth: int = DEFAULT_DEPTH,
    probe_size: int = PROBE_SIZE,
    max_size: Optional[int] = None,
    min_distinguished: int = ADEQUACY_MIN_DISTINGUISHED,
    seed: int = SEED,
    mutation: Optional[Mutation] = None,
) -> CheckRecord:
    """
    Whenever two denotations agree to `depth`, the terms must be related by
    bisimilarity to `depth`. Every distinguished pair also gets a denotational
    witness (the first difference of the two truncations).

    Sampled runs must also find at least `min_distinguished` distinguished
    pairs; explicit `pairs` are taken as given. `max_size` defaults to
    TERM_SIZE, raised to the language's `pair_size`.
    """
    if max_size is None:
        max_size = max(TERM_SIZE, lang.pair_size)
    params = {
        "count": count,
        "depth": depth,
        "probe_size": probe_size,
        "max_size": max_size,
        "min_distinguished": min_distinguished,
    }
    sampled = pairs is None
    pairs = list(pairs) if pairs is not None else _sample_pairs(lang, count, max_size, seed)
    denoting = mutation.apply(lang) if mutation is not None else lang
    model = gsos_service.denotational(denoting)
    operational = bisim_service.observer(lang, lang.probes(probe_size))
    denotational = Observer.for_denotations(denoting.denotational_probes(probe_size), lang.guarded)
    violations: List[str] = []
    distinguished = witnessed = related = skipped = 0
    example: Optional[str] = None
    for p, q in pairs:
        try:
            report = bisim_service.compare(operational, p, q, depth)
            witness = first_difference(denotational.tree(model.denote(p), depth), denotational.tree(model.denote(q), depth))
        except ProbeSetEmpty:
            skipped += 1
            continue
        except WorkbenchError as e:
            violations.append(f"{lang.show(p)} / {lang.show(q)}: {e}")
            continue
        if report.related:
            related += 1
            continue
        distinguished += 1
        if witness is None:
            violations.append(
                f"{lang.show(p)} / {lang.show(q)}: equal denotations but distinguished at {report.witness.describe()}"
            )
            continue
        witnessed += 1
        if example is None:
            example = f"{lang.show(p)} / {lang.show(q)}: {witness.describe()}"
    if sampled and distinguished < min_distinguished:
        violations.append(f"only {distinguished} distinguished pair(s), expected at least {min_distinguished}")
    details = {
        "pairs": len(pairs),
        "related": related,
        "distinguished": distinguished,
        "witnessed": witnessed,
        "skipped": skipped,
    }
    if example is not None:
        details["example_witness"] = example
    logger.info(f"Adequacy on {lang.name}: {len(pairs)} pairs, {distinguished} distinguished, {len(violations)} violation(s)")
    return _record("adequacy", lang, seed, params, mutation, len(pairs), violations, details)


def check_compositionality(
    lang,
    samples: Optional[Sequence[Term]] = None,
    count: int = COMPOSITION_SAMPLES,
    depth: int = DEFAULT_DEPTH,
    probe_size: int = PROBE_SIZE,
    max_size: int = TERM_SIZE,
    seed: int = SEED,
    mutation: Optional[Mutation] = None,
) -> CheckRecord:
    """
    Two obligations, both counted in the verdict:

    - at every subterm f(t1..tn) of the samples, the denotation of the whole
      agrees to `depth` with the algebra under test applied to the ti's
      denotations, taken from a separately cached model so that no shared
      node is compared with itself;
    - substitution of equals (see _congruence).
    """
    params = {"count": count, "depth": depth, "probe_size": probe_size, "max_size": max_size}
    samples = list(samples) if samples is not None else _samples(lang, count, max_size, seed)
    reference = gsos_service.denotational(lang)
    independent = DenotationalModel(lang.law, lang.signature)
    tested = DenotationalModel(mutation.law_for(lang), lang.signature) if mutation is not None else independent
    observer = Observer.for_denotations(lang.denotational_probes(probe_size), lang.guarded)
    violations: List[str] = []
    checked = skipped = 0
    seen: Dict[Term, None] = {}
    for sample in samples:
        for sub in sample.subterms():
            if sub in seen:
                continue
            seen[sub] = None
            try:
                whole = observer.tree(reference.denote(sub), depth)
                rebuilt = tested.algebra(sub.op, [independent.denote(c) for c in sub.children])
                diff = first_difference(whole, observer.tree(rebuilt, depth))
            except ProbeSetEmpty:
                skipped += 1
                continue
            except WorkbenchError as e:
                violations.append(f"{lang.show(sub)}: algebra failed: {e}")
                continue
            checked += 1
            if diff is not None:
                violations.append(f"{lang.show(sub)}: {diff.describe()}")
    congruence_violations, details = _congruence(lang, samples, reference, observer, depth, max_size, seed)
    violations += congruence_violations
    details["skipped"] = skipped + details.pop("congruence_skipped")
    logger.info(
        f"Compositionality on {lang.name}: {checked} subterms, {details['congruence_checked']} substitutions, "
        f"{len(violations)} violation(s)"
    )
    return _record("compositionality", lang, seed, params, mutation, checked, violations, details)


def _positions(t: Term, path: Tuple[int, ...] = ()) -> Iterator[Tuple[Tuple[int, ...], Term]]:
    """Every proper subterm with its path of child indices."""
    for index, child in enumerate(t.children):
        yield path + (index,), child
        yield from _positions(child, path + (index,))


def _replace_at(t: Term, path: Tuple[int, ...], replacement: Term) -> Term:
    if not path:
        return replacement
    children = list(t.children)
    children[path[0]] = _replace_at(children[path[0]], path[1:], replacement)
    return make_term(t.op, children)


def _denote_around(model, t: Term, path: Tuple[int, ...], hole: Denotation) -> Denotation:
    """The denotation of t with the subterm at `path` replaced by the state `hole`."""
    if not path:
        return hole
    args = [model.denote(c) for c in t.children]
    args[path[0]] = _denote_around(model, t.children[path[0]], path[1:], hole)
    return model.algebra(t.op, args)


def _congruence(lang, samples, model, observer, depth, max_size, seed) -> Tuple[List[str], Dict[str, Any]]:
    """
    Substitution of equals. At every position of every sample, the subterm
    is replaced by a different term whose truncation agrees to `depth`; the
    wholes must then agree to `depth` minus the position's depth (guarded
    languages) or to `depth`.

    Agreement of the subterms is only relative to the probe set, while the
    context may feed them other inputs. A mismatch of the wholes is therefore
    re-examined: the two subterms are compared again with every input the
    context actually passed them added to the probes. If that separates them
    the substitution was not one of equals and is counted as inconclusive;
    otherwise it is a violation.
    """
    pools: Dict[Sort, Dict[str, List[Term]]] = {}

    def pool(sort: Sort) -> Dict[str, List[Term]]:
        if sort not in pools:
            index: Dict[str, List[Term]] = {}
            try:
                for t in gen_terms(lang, sort, max(1, max_size - 2), 60, seed):
                    index.setdefault(observer.tree(model.denote(t), depth).key, []).append(t)
            except (UninhabitedSort, ProbeSetEmpty):
                pass
            pools[sort] = index
        return pools[sort]

    violations: List[str] = []
    checked = inconclusive = skipped = 0
    for sample in samples:
        for path, hole in _positions(sample):
            budget = depth - len(path) if lang.guarded else depth
            if budget < 0:
                continue
            try:
                key = observer.tree(model.denote(hole), depth).key
                candidates = [t for t in pool(hole.sort).get(key, []) if t != hole]
                if not candidates:
                    continue
                replacement = candidates[0]
                swapped = _replace_at(sample, path, replacement)
                checked += 1
                if observer.tree(model.denote(sample), budget) == observer.tree(model.denote(swapped), budget):
                    continue
                if _separated_in_context(lang, model, observer.probes, sample, path, hole, replacement, depth, budget):
                    inconclusive += 1
                    continue
            except ProbeSetEmpty:
                skipped += 1
                continue
            except WorkbenchError as e:
                violations.append(f"congruence: {lang.show(sample)}: {e}")
                continue
            violations.append(
                f"congruence: {lang.show(hole)} and {lang.show(replacement)} agree to depth {depth}, "
                f"but {lang.show(sample)} and {lang.show(swapped)} differ at depth {budget}"
            )
    details = {
        "congruence_checked": checked,
        "congruence_violations": len(violations),
        "congruence_inconclusive": inconclusive,
        "congruence_skipped": skipped,
    }
    return violations, details


def _separated_in_context(lang, model, probes, sample, path, hole, replacement, depth, budget) -> bool:
    inputs: List[Denotation] = []
    recorder = Observer.for_denotations(probes, lang.guarded)
    for t in (hole, replacement):
        recorder.tree(_denote_around(model, sample, path, RecordingDenotation(model.denote(t), inputs)), budget)
    extended = Observer.for_denotations(probes.extended(underlying(x) for x in inputs), lang.guarded)
    return extended.tree(model.denote(hole), depth) != extended.tree(model.denote(replacement), depth)


def check_pentagon(
    lang,
    samples: Optional[Sequence[Term]] = None,
    count: int = PENTAGON_SAMPLES,
    denotational_count: int = DENOTATIONAL_SAMPLES,
    depth: int = 5,
    probe_size: int = PROBE_SIZE,
    max_size: int = TERM_SIZE,
    seed: int = SEED,
    mutation: Optional[Mutation] = None,
) -> CheckRecord:
    """
    The law under test against the operational model (exact, every sample)
    and against the denotational model (observational, the first
    `denotational_count` samples).
    """
    params = {
        "count": count,
        "denotational_count": denotational_count,
        "depth": depth,
        "probe_size": probe_size,
        "max_size": max_size,
    }
    samples = list(samples) if samples is not None else _samples(lang, count, max_size, seed)
    law = mutation.law_for(lang) if mutation is not None else lang.law
    operational = gsos_service.operational(lang)
    exact = check_bialgebra_law(
        law, operational.carrier, samples, depth, lang.probes(probe_size), exact=True, show=lang.show
    )
    observed = check_bialgebra_law(
        law,
        gsos_service.denotational(lang),
        samples[:denotational_count],
        depth,
        lang.denotational_probes(probe_size),
        show=lang.show,
    )
    violations = [f"operational: {v.subterm} in {v.sample} at stage {v.stage}: {v.detail}" for v in exact.violations]
    violations += [f"denotational: {v.subterm} in {v.sample} at stage {v.stage}: {v.detail}" for v in observed.violations]
    details = {
        "operational_checked": exact.checked,
        "denotational_checked": observed.checked,
        "skipped": exact.skipped + observed.skipped,
    }
    logger.info(f"Pentagon on {lang.name}: {exact.checked + observed.checked} comparisons, {len(violations)} violation(s)")
    return _record("pentagon", lang, seed, params, mutation, exact.checked + observed.checked, violations, details)


def check_tower(
    lang,
    bound: int = 3,
    depth: int = 3,
    probe_size: int = PROBE_SIZE,
    count: int = 10,
    max_size: int = TERM_SIZE,
    seed: int = SEED,
    mutation: Optional[Mutation] = None,
) -> CheckRecord:
    """
    Guarded untyped languages: approximant(n) at stage k equals the exact
    stage k for k < n <= bound, stage sizes match the golden values, and
    restriction is onto the previous stage. Typed languages: observations
    with function tables frozen at iteration n agree with iteration n + 1 on
    types of complexity <= n.
    """
    params = {"bound": bound, "depth": depth, "probe_size": probe_size, "count": count, "max_size": max_size}
    if getattr(lang, "stage_shape", None) is not None:
        return _stage_tower(lang, bound, seed, params, mutation)
    if lang.typed:
        return _typed_tower(lang, bound, depth, probe_size, count, max_size, seed, params, mutation)
    return _record("tower", lang, seed, params, mutation, 0, [], {"reason": "no finite stages"}, skipped=True)


def _stage_tower(lang, bound, seed, params, mutation) -> CheckRecord:
    filtered = not (mutation is not None and mutation.unfiltered_tuples)
    golden = GOLDEN_STAGE_SIZES.get(lang.name, {})
    family = stage_service.family(lang, filtered)
    violations: List[str] = []
    sizes: Dict[str, int] = {}
    checked = skipped = 0
    for k in range(bound):
        try:
            exact = stage_service.enumerate_stage(lang, k, filtered)
        except StageTooLarge:
            skipped += 1
            continue
        keys = {e.key for e in exact}
        sizes[str(k)] = len(exact)
        checked += 1
        if k in golden and golden[k] != len(exact):
            violations.append(f"stage {k} has {len(exact)} elements, expected {golden[k]}")
        if k > 0:
            checked += 1
            image = {family.restrict(e).key for e in exact}
            previous = {e.key for e in family.stage(k - 1)}
            if image != previous:
                violations.append(f"restriction from stage {k} misses {len(previous - image)} element(s) of stage {k - 1}")
        for n in range(k + 1, bound + 1):
            try:
                approximated = {e.key for e in stage_service.approximant(lang, n, filtered).stage(k)}
            except StageTooLarge:
                skipped += 1
                continue
            checked += 1
            if approximated != keys:
                violations.append(f"approximant {n} at stage {k} has {len(approximated)} elements, stage {k} has {len(keys)}")
    return _record("tower", lang, seed, params, mutation, checked, violations, {"sizes": sizes, "skipped": skipped})


def _typed_tower(lang, bound, depth, probe_size, count, max_size, seed, params, mutation) -> CheckRecord:
    from core.lang_tcl import types_up_to

    target = mutation.apply(lang) if mutation is not None else lang
    model = gsos_service.operational(target)
    observer = Observer(model.behavior, lambda t: t.sort, lang.probes(probe_size), guarded=False)
    memo: Dict[Tuple[Term, int, int], Any] = {}
    violations: List[str] = []
    checked = skipped = 0
    for n in range(1, bound + 1):
        for index, sort in enumerate(types_up_to(n)):
            try:
                terms = gen_terms(lang, sort, max_size, count, seed + index)
            except UninhabitedSort:
                continue
            for t in terms:
                try:
                    frozen = tower_tree(observer, t, depth, n, memo)
                    diff = first_difference(frozen, tower_tree(observer, t, depth, n + 1, memo))
                except ProbeSetEmpty:
                    skipped += 1
                    continue
                except WorkbenchError as e:
                    violations.append(f"{lang.show(t)} : {sort}: {e}")
                    continue
                checked += 1
                if diff is not None:
                    violations.append(f"{lang.show(t)} : {sort} differs between iterations {n} and {n + 1}: {diff.describe()}")
    return _record("tower", lang, seed, params, mutation, checked, violations, {"skipped": skipped})


def check_guardedness(
    lang,
    count: int = 200,
    depth: int = 4,
    probe_size: int = PROBE_SIZE,
    max_size: int = TERM_SIZE,
    seed: int = SEED,
    mutation: Optional[Mutation] = None,
) -> CheckRecord:
    """
    A stage-(n+1) function node, fed an argument and a graft that agrees with
    it up to stage n only, must give results that agree up to stage n and
    must never force the graft above stage n.
    """
    params = {"count": count, "depth": depth, "probe_size": probe_size, "max_size": max_size}
    if not lang.guarded:
        return _record("guardedness", lang, seed, params, mutation, 0, [], {"reason": "unguarded law"}, skipped=True)
    restrict = not (mutation is not None and mutation.unguarded_arguments)
    target = mutation.apply(lang) if mutation is not None else lang
    model = gsos_service.denotational(target, restrict_arguments=restrict)
    observer = Observer.for_denotations(lang.denotational_probes(probe_size), guarded=True)
    terms = gen_terms(lang, lang.default_sort, max_size, 4 * count, seed)
    functions = [t for t in terms if isinstance(model.denote(t).node(1).step, FunctionNode)]
    if not functions or len(terms) < 2:
        return _record("guardedness", lang, seed, params, mutation, 0, [], {"reason": "no function terms"}, skipped=True)
    rng = random.Random(seed)
    violations: List[str] = []
    checked = 0
    for _ in range(count):
        f = rng.choice(functions)
        a, b = rng.sample(terms, 2)
        n = rng.randrange(max(depth, 1))
        node = model.denote(f).node(n + 1)
        if not isinstance(node.step, FunctionNode):
            continue
        forced: List[int] = []
        argument = model.denote(a)
        grafted = InstrumentedDenotation(graft(argument, model.denote(b), n), n, forced)
        case = f"{lang.show(f)} at stage {n + 1} on {lang.show(a)} / graft onto {lang.show(b)}"
        try:
            diff = first_difference(
                observer.tree(node.step.apply(argument), n), observer.tree(node.step.apply(grafted), n)
            )
            if diff is not None:
                violations.append(f"{case}: {diff.describe()}")
            try:
                observer.tree(node.step.apply(grafted), n + 1)
            except GuardednessViolation:
                pass
        except WorkbenchError as e:
            violations.append(f"{case}: {e}")
            continue
        checked += 1
        if forced:
            violations.append(f"{case}: argument forced at stage {max(forced)}")
    logger.info(f"Guardedness on {lang.name}: {checked} pairs, {len(violations)} violation(s)")
    return _record("guardedness", lang, seed, params, mutation, checked, violations)


def check_oracles(
    lang,
    count: int = 500,
    max_size: int = 12,
    seed: int = SEED,
    mutation: Optional[Mutation] = None,
) -> CheckRecord:
    """
    Lambda only: the engine's computation step against weak-head beta
    reduction, its substitution component against simultaneous substitution,
    and the substitution lemma on the oracle itself.
    """
    params = {"count": count, "max_size": max_size}
    if lang.name != "lambda":
        return _record("oracles", lang, seed, params, mutation, 0, [], {"reason": "no oracle"}, skipped=True)
    from core.lang_lambda import beta_step, subst

    target = mutation.apply(lang) if mutation is not None else lang
    model = gsos_service.operational(target)
    violations: List[str] = []
    closed = gen_terms(lang, 0, max_size, count, seed)
    steps = substitutions = lemmas = 0
    for t in closed:
        expected = beta_step(t)
        try:
            step = model.behavior(t, 1).step
        except WorkbenchError as e:
            violations.append(f"step {lang.show(t)}: {e}")
            continue
        steps += 1
        if isinstance(step, Reduct):
            actual = step.bag.value if isinstance(step.bag, Det) else None
            if actual != expected:
                shown = "none" if expected is None else lang.show(expected)
                engine = "none" if actual is None else lang.show(actual)
                violations.append(f"step {lang.show(t)}: engine {engine}, oracle {shown}")
        elif isinstance(step, FunctionNode):
            if expected is not None or t.op.name != "lam":
                violations.append(f"step {lang.show(t)}: engine reports a function")
        elif isinstance(step, Terminal) and (expected is not None or t.op.name == "lam"):
            violations.append(f"step {lang.show(t)}: engine reports a stuck term")

    rng = random.Random(seed)
    small = gen_terms(lang, 0, max(1, max_size // 2), max(count // 5, 2), seed + 1)
    for context in (1, 2):
        share = count // 2
        for t in gen_terms(lang, context, max(1, max_size - 4), share, seed + context):
            env = [rng.choice(small) for _ in range(context)]
            try:
                actual = _substitute(model, t, env)
            except WorkbenchError as e:
                violations.append(f"subst {lang.show(t)}: {e}")
                continue
            substitutions += 1
            if actual != subst(t, env, 0):
                shown = ", ".join(lang.show(e) for e in env)
                violations.append(f"subst {lang.show(t)} with [{shown}]: engine {lang.show(actual)}")

    opens = gen_terms(lang, 1, max(1, max_size // 2), max(count // 5, 2), seed + 3)
    for t in gen_terms(lang, 2, max(1, max_size - 4), max(count // 5, 1), seed + 4):
        inner = [rng.choice(opens) for _ in range(2)]
        outer = [rng.choice(small)]
        lemmas += 1
        left = subst(subst(t, inner, 1), outer, 0)
        right = subst(t, [subst(u, outer, 0) for u in inner], 0)
        if left != right:
            violations.append(f"substitution lemma fails on {lang.show(t)}")
    details = {"steps": steps, "substitutions": substitutions, "lemmas": lemmas}
    logger.info(f"Oracles on lambda: {steps + substitutions + lemmas} checks, {len(violations)} violation(s)")
    return _record("oracles", lang, seed, params, mutation, steps + substitutions + lemmas, violations, details)


def _substitute(model, t: Term, env: List[Term]) -> Term:
    node = model.behavior(t, 1)
    if node.subst is None:
        raise WorkbenchError(f"{t} has no substitution component")
    return node.subst.apply(Environment(tuple(env), 0))


def check_ultrametric(
    lang,
    count: int = 200,
    depth: int = DEFAULT_DEPTH,
    probe_size: int = PROBE_SIZE,
    max_size: int = TERM_SIZE,
    seed: int = SEED,
    mutation: Optional[Mutation] = None,
) -> CheckRecord:
    """d(x, x) = 0, symmetry and the strong triangle inequality, exactly, on denotation triples."""
    params = {"count": count, "depth": depth, "probe_size": probe_size, "max_size": max_size}
    target = mutation.apply(lang) if mutation is not None else lang
    model = gsos_service.denotational(target)
    probes = target.denotational_probes(probe_size)
    observer = Observer.for_denotations(probes, lang.guarded)
    terms = gen_terms(lang, lang.default_sort, max_size, 3 * count, seed)
    violations: List[str] = []
    checked = 0
    for x, y, z in zip(terms[0::3], terms[1::3], terms[2::3]):
        try:
            dx, dy, dz = model.denote(x), model.denote(y), model.denote(z)

            def d(u, v) -> Fraction:
                return distance(u, v, depth, probes, observer)

            xy, yz, xz = d(dx, dy), d(dy, dz), d(dx, dz)
            problems = []
            if d(dx, dx) != 0:
                problems.append("d(x, x) > 0")
            if xy != d(dy, dx):
                problems.append("asymmetric")
            if xz > max(xy, yz):
                problems.append(f"d(x, z) = {xz} > max({xy}, {yz})")
        except ProbeSetEmpty:
            continue
        except WorkbenchError as e:
            violations.append(f"{lang.show(x)}, {lang.show(y)}, {lang.show(z)}: {e}")
            continue
        checked += 1
        if problems:
            violations.append(f"{lang.show(x)}, {lang.show(y)}, {lang.show(z)}: {'; '.join(problems)}")
    return _record("ultrametric", lang, seed, params, mutation, checked, violations)


def check_choice(
    lang,
    count: int = 100,
    depth: int = 5,
    probe_size: int = 3,
    probe_limit: int = 3,
    max_size: int = 5,
    seed: int = SEED,
    mutation: Optional[Mutation] = None,
) -> CheckRecord:
    """
    Branching languages: p (+) q and q (+) p are bisimilar (and p || q with
    q || p when the language has parallel composition); in xPTCL, e and
    e (+) e are told apart. Reduct distributions must carry total mass 1.
    """
    params = {"count": count, "depth": depth, "probe_size": probe_size, "probe_limit": probe_limit, "max_size": max_size}
    if lang.effect is BranchingEffect.DETERMINISTIC:
        return _record("choice", lang, seed, params, mutation, 0, [], {"reason": "deterministic law"}, skipped=True)
    target = mutation.apply(lang) if mutation is not None else lang
    probes = lang.probes(probe_size, probe_limit)
    model = gsos_service.operational(target)
    relate = bisim_service.prob_bisim if lang.effect is BranchingEffect.DISTRIBUTION else bisim_service.pow_bisim
    sig = lang.signature
    operators = [name for name in ("plus", "par") if name in sig.family_names]
    violations: List[str] = []
    checked = skipped = 0

    def combine(name: str, p: Term, q: Term) -> Term:
        return make_term(sig.instantiate(name, [p.sort, q.sort]), [p, q])

    def related(left: Term, right: Term) -> Optional[bool]:
        try:
            return relate(target, [left, right], depth, probes).related(left, right)
        except UniverseExplosion:
            return None

    terms = gen_terms(lang, lang.default_sort, max_size, 2 * count, seed)
    for p, q in zip(terms[0::2], terms[1::2]):
        for name in operators:
            try:
                left, right = combine(name, p, q), combine(name, q, p)
                verdict = related(left, right)
                node = model.behavior(left, None)
            except WorkbenchError as e:
                violations.append(f"{name}({lang.show(p)}, {lang.show(q)}): {e}")
                continue
            if verdict is None:
                skipped += 1
                continue
            checked += 1
            if not verdict:
                violations.append(f"{lang.show(left)} and {lang.show(right)} are distinguished")
            if isinstance(node.step, Reduct) and lang.effect is BranchingEffect.DISTRIBUTION:
                mass = sum(w for _, w in iter_weighted(node.step.bag))
                if mass != 1:
                    violations.append(f"{lang.show(left)} has reduct mass {mass}")
    if lang.name == "xptcl":
        e = lang.parse("e")
        doubled = combine("plus", e, e)
        checked += 1
        if related(e, doubled):
            violations.append("e and e (+) e are related")
    return _record("choice", lang, seed, params, mutation, checked, violations, {"skipped": skipped})


SUITES: Dict[str, Callable[..., CheckRecord]] = {
    "adequacy": check_adequacy,
    "compositionality": check_compositionality,
    "pentagon": check_pentagon,
    "tower": check_tower,
    "guardedness": check_guardedness,
    "oracles": check_oracles,
    "ultrametric": check_ultrametric,
    "choice": check_choice,
}


def suite_parameters(name: str) -> List[str]:
    """Integer parameters a suite accepts besides the language, seed and mutation."""
    check = _suite(name)
    return [
        p.name
        for p in inspect.signature(check).parameters.values()
        if p.name != "seed"
        and (p.annotation == Optional[int] or (isinstance(p.default, int) and not isinstance(p.default, bool)))
    ]


def _suite(name: str) -> Callable[..., CheckRecord]:
    try:
        return SUITES[name]
    except KeyError:
        raise UnknownSuite(f"Unknown suite {name!r}; expected one of {', '.join(SUITES)}") from None


def run_suite(
    name: str,
    languages: Optional[Sequence[str]] = None,
    seed: int = SEED,
    mutation: Optional[str] = None,
    params: Optional[Dict[str, int]] = None,
) -> List[CheckRecord]:
    """
    Run one suite on each language (all of them by default, or those the
    mutation touches). A mutation that does not touch a language yields a
    skipped record for it.

    Raises:
        UnknownSuite: for unknown suite or mutation names or parameters
    """
    check = _suite(name)
    mutated = get_mutation(mutation)
    params = dict(params or {})
    unknown = sorted(set(params) - set(suite_parameters(name)))
    if unknown:
        raise UnknownSuite(f"Suite {name} has no parameter(s) {', '.join(unknown)}")
    if languages is None:
        languages = mutated.languages if mutated is not None else LANGUAGE_NAMES
    records: List[CheckRecord] = []
    logger.info(f"Running suite {name} on {', '.join(languages)} (seed {seed}, mutation {mutation})")
    for language in languages:
        lang = get_language(language)
        if mutated is not None and lang.name not in mutated.languages:
            records.append(
                _record(name, lang, seed, params, mutated, 0, [], {"reason": "mutation does not apply"}, skipped=True)
            )
            continue
        records.append(check(lang, seed=seed, mutation=mutated, **params))
    failed = sum(1 for r in records if r.verdict == "fail")
    logger.info(f"Suite {name} finished: {len(records)} record(s), {failed} failed")
    return records
