"""
The rule language for higher-order GSOS laws.

A law is data: patterns over the step variants of the arguments, and
conclusions built from premise atoms. The same law is interpreted over terms
(operational model) and over denotations (denotational model) by the engine in
`core.gsos_service`.

Text format, one declaration per line:

    law xtcl
    effect deterministic            # or: distribution, powerset
    guarded no                      # yes: rules may dispatch on @0 / @+
    rank app 0

    app(R, _) => reduct app(y0, x1)
    app(F, _) => reduct f0(x1)
    lam(_) => fun g0[id, ?] with subst lam(g0[wk(u), fresh])

Expression atoms: xN (argument N), yN (the reduct of argument N), fN(E)
(argument N's function applied to E), gN[ENV] (argument N's substitution
applied to ENV), ? (the function node's own argument), * (the stage-0 payload),
u[j] (the environment entry of a variable), fresh (the fresh variable).
ENV is u, wk(u) or id, optionally extended by `, E` items.
"""

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from core.behavior import BranchingEffect, StepTag
from core.kernel import WorkbenchError
from core.logger import get_logger

logger = get_logger(__name__)


class RuleSyntaxError(WorkbenchError):
    """Custom exception for malformed rule tables."""
    pass


class NoRuleApplies(WorkbenchError):
    """Custom exception for laws that do not cover a reachable premise combination."""
    pass


class AmbiguousRules(WorkbenchError):
    """Custom exception for laws where two rules match the same premises."""
    pass


class PremiseTag(str, Enum):
    REDUCT = "R"
    FUNCTION = "F"
    TERMINAL = "T"
    ANY = "_"

    def admits(self, tag: StepTag) -> bool:
        return self is PremiseTag.ANY or _TAG_OF_STEP[tag] is self


_TAG_OF_STEP = {
    StepTag.REDUCT: PremiseTag.REDUCT,
    StepTag.FUNCTION: PremiseTag.FUNCTION,
    StepTag.TERMINAL: PremiseTag.TERMINAL,
}


class StageGuard(str, Enum):
    ZERO = "@0"
    SUCC = "@+"

    def admits(self, stage: Optional[int]) -> bool:
        if stage is None:
            return False
        return stage == 0 if self is StageGuard.ZERO else stage > 0


# --- Conclusion expressions ---

@dataclass(frozen=True)
class Arg:
    index: int

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class ReductOf:
    index: int

    def __str__(self):
        return f"y{self.index}"


@dataclass(frozen=True)
class ApplyFun:
    index: int
    argument: "Expr"

    def __str__(self):
        return f"f{self.index}({self.argument})"


@dataclass(frozen=True)
class Op:
    name: str
    args: Tuple["Expr", ...] = ()

    def __str__(self):
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class BoundProbe:
    def __str__(self):
        return "?"


@dataclass(frozen=True)
class TrivialPayload:
    def __str__(self):
        return "*"


class EnvBase(str, Enum):
    CURRENT = "u"
    WEAKENED = "wk(u)"
    IDENTITY = "id"


@dataclass(frozen=True)
class EnvSpec:
    base: EnvBase
    extra: Tuple["Expr", ...] = ()

    def __str__(self):
        return "".join([self.base.value] + [f", {e}" for e in self.extra])


@dataclass(frozen=True)
class SubstOf:
    index: int
    env: EnvSpec

    def __str__(self):
        return f"g{self.index}[{self.env}]"


@dataclass(frozen=True)
class EnvLookup:
    def __str__(self):
        return "u[j]"


@dataclass(frozen=True)
class FreshVar:
    def __str__(self):
        return "fresh"


Expr = Union[Arg, ReductOf, ApplyFun, Op, BoundProbe, TrivialPayload, SubstOf, EnvLookup, FreshVar]


def subexpressions(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, ApplyFun):
        yield from subexpressions(expr.argument)
    elif isinstance(expr, Op):
        for arg in expr.args:
            yield from subexpressions(arg)
    elif isinstance(expr, SubstOf):
        for item in expr.env.extra:
            yield from subexpressions(item)


def reduct_indices(expr: Expr) -> List[int]:
    return sorted({e.index for e in subexpressions(expr) if isinstance(e, ReductOf)})


# --- Rules ---

@dataclass(frozen=True)
class TerminalConclusion:
    def __str__(self):
        return "terminal"


@dataclass(frozen=True)
class ReductConclusion:
    alternatives: Tuple[Expr, ...]

    def __str__(self):
        return "reduct " + " | ".join(str(a) for a in self.alternatives)


@dataclass(frozen=True)
class FunctionConclusion:
    body: Expr

    def __str__(self):
        return f"fun {self.body}"


StepConclusion = Union[TerminalConclusion, ReductConclusion, FunctionConclusion]


@dataclass(frozen=True)
class RuleConclusion:
    step: StepConclusion
    subst: Optional[Expr] = None

    def expressions(self) -> List[Expr]:
        found: List[Expr] = []
        if isinstance(self.step, ReductConclusion):
            found.extend(self.step.alternatives)
        elif isinstance(self.step, FunctionConclusion):
            found.append(self.step.body)
        if self.subst is not None:
            found.append(self.subst)
        return found

    def __str__(self):
        text = str(self.step)
        if self.subst is not None:
            text += f" with subst {self.subst}"
        return text


@dataclass(frozen=True)
class RulePattern:
    operator: str
    premises: Tuple[PremiseTag, ...] = ()
    stage_guard: Optional[StageGuard] = None

    def matches(self, operator: str, tags: Sequence[StepTag], stage: Optional[int]) -> bool:
        if operator != self.operator or len(tags) != len(self.premises):
            return False
        if self.stage_guard is not None and not self.stage_guard.admits(stage):
            return False
        return all(p.admits(t) for p, t in zip(self.premises, tags))

    def overlaps(self, other: "RulePattern") -> bool:
        if self.operator != other.operator or len(self.premises) != len(other.premises):
            return False
        if self.stage_guard and other.stage_guard and self.stage_guard != other.stage_guard:
            return False
        return all(
            a is PremiseTag.ANY or b is PremiseTag.ANY or a is b
            for a, b in zip(self.premises, other.premises)
        )

    def __str__(self):
        text = self.operator
        if self.premises:
            text += "(" + ", ".join(p.value for p in self.premises) + ")"
        if self.stage_guard is not None:
            text += f" {self.stage_guard.value}"
        return text


@dataclass(frozen=True)
class Rule:
    pattern: RulePattern
    conclusion: RuleConclusion

    def __str__(self):
        return f"{self.pattern} => {self.conclusion}"


@dataclass(frozen=True)
class HoGsosLaw:
    name: str
    effect: BranchingEffect
    guarded: bool
    ranking: Tuple[Tuple[str, int], ...]
    rules: Tuple[Rule, ...] = field(default=())

    @cached_property
    def _ranks(self) -> Dict[str, int]:
        return dict(self.ranking)

    @cached_property
    def _index(self) -> Dict[str, List[Rule]]:
        index: Dict[str, List[Rule]] = {}
        for rule in self.rules:
            index.setdefault(rule.pattern.operator, []).append(rule)
        return index

    @property
    def operators(self) -> List[str]:
        return [name for name, _ in self.ranking]

    def rank_of(self, name: str) -> Optional[int]:
        return self._ranks.get(name)

    def select(self, operator: str, tags: Sequence[StepTag], stage: Optional[int] = None) -> Rule:
        """The unique rule for these premises; a law must be total and unambiguous."""
        matching = [r for r in self._index.get(operator, ()) if r.pattern.matches(operator, tags, stage)]
        if not matching:
            shown = ", ".join(t.value for t in tags)
            raise NoRuleApplies(f"Law {self.name} has no rule for {operator}({shown}) at stage {stage}")
        if len(matching) > 1:
            raise AmbiguousRules(
                f"Law {self.name} has {len(matching)} rules for {operator}: "
                + "; ".join(str(r.pattern) for r in matching)
            )
        return matching[0]

    def with_rule(self, rule: Rule) -> "HoGsosLaw":
        """A copy where `rule` replaces the rule with the same pattern (or is appended)."""
        rules = list(self.rules)
        for position, existing in enumerate(rules):
            if existing.pattern == rule.pattern:
                rules[position] = rule
                break
        else:
            rules.append(rule)
        return replace(self, rules=tuple(rules))

    def with_ranking(self, ranking: Sequence[Tuple[str, int]]) -> "HoGsosLaw":
        return replace(self, ranking=tuple(ranking))


# --- Text format ---

_TOKEN = re.compile(r"\s*(=>|@0|@\+|[A-Za-z_][A-Za-z0-9_]*'*|\d+|[()\[\],|?*])")
_NUMBERED = re.compile(r"([xyfg])(\d+)$")


def _tokenize(text: str, line_no: int) -> List[str]:
    tokens: List[str] = []
    position = 0
    stripped = text.rstrip()
    while position < len(stripped):
        match = _TOKEN.match(stripped, position)
        if not match:
            raise RuleSyntaxError(f"line {line_no}: unexpected input {stripped[position:]!r}")
        tokens.append(match.group(1))
        position = match.end()
    return tokens


class _RuleParser:
    def __init__(self, tokens: List[str], line_no: int):
        self.tokens = tokens
        self.position = 0
        self.line_no = line_no

    def peek(self, offset: int = 0) -> Optional[str]:
        index = self.position + offset
        return self.tokens[index] if index < len(self.tokens) else None

    def take(self, expected: Optional[str] = None) -> str:
        token = self.peek()
        if token is None or (expected is not None and token != expected):
            raise RuleSyntaxError(f"line {self.line_no}: expected {expected or 'more input'}, got {token!r}")
        self.position += 1
        return token

    def at_end(self) -> bool:
        return self.position >= len(self.tokens)

    def rule(self) -> Rule:
        pattern = self.pattern()
        self.take("=>")
        conclusion = self.conclusion()
        if not self.at_end():
            raise RuleSyntaxError(f"line {self.line_no}: trailing input {self.peek()!r}")
        return Rule(pattern, conclusion)

    def pattern(self) -> RulePattern:
        name = self.take()
        premises: List[PremiseTag] = []
        if self.peek() == "(":
            self.take("(")
            while True:
                token = self.take()
                try:
                    premises.append(PremiseTag(token))
                except ValueError:
                    raise RuleSyntaxError(f"line {self.line_no}: unknown premise tag {token!r}") from None
                if self.peek() == ",":
                    self.take(",")
                    continue
                self.take(")")
                break
        guard = None
        if self.peek() in ("@0", "@+"):
            guard = StageGuard(self.take())
        return RulePattern(name, tuple(premises), guard)

    def conclusion(self) -> RuleConclusion:
        kind = self.take()
        if kind == "terminal":
            step: StepConclusion = TerminalConclusion()
        elif kind == "reduct":
            alternatives = [self.expr()]
            while self.peek() == "|":
                self.take("|")
                alternatives.append(self.expr())
            step = ReductConclusion(tuple(alternatives))
        elif kind == "fun":
            step = FunctionConclusion(self.expr())
        else:
            raise RuleSyntaxError(f"line {self.line_no}: unknown conclusion kind {kind!r}")
        subst = None
        if self.peek() == "with":
            self.take("with")
            self.take("subst")
            subst = self.expr()
        return RuleConclusion(step, subst)

    def expr(self) -> Expr:
        token = self.take()
        if token == "?":
            return BoundProbe()
        if token == "*":
            return TrivialPayload()
        if token == "fresh":
            return FreshVar()
        if token == "u" and self.peek() == "[":
            self.take("[")
            self.take("j")
            self.take("]")
            return EnvLookup()
        numbered = _NUMBERED.match(token)
        if numbered:
            letter, index = numbered.group(1), int(numbered.group(2))
            if letter == "x":
                return Arg(index)
            if letter == "y":
                return ReductOf(index)
            if letter == "f":
                self.take("(")
                argument = self.expr()
                self.take(")")
                return ApplyFun(index, argument)
            self.take("[")
            env = self.env()
            self.take("]")
            return SubstOf(index, env)
        args: List[Expr] = []
        if self.peek() == "(":
            self.take("(")
            args.append(self.expr())
            while self.peek() == ",":
                self.take(",")
                args.append(self.expr())
            self.take(")")
        return Op(token, tuple(args))

    def env(self) -> EnvSpec:
        token = self.take()
        if token == "u":
            base = EnvBase.CURRENT
        elif token == "id":
            base = EnvBase.IDENTITY
        elif token == "wk":
            self.take("(")
            self.take("u")
            self.take(")")
            base = EnvBase.WEAKENED
        else:
            raise RuleSyntaxError(f"line {self.line_no}: unknown environment {token!r}")
        extra: List[Expr] = []
        while self.peek() == ",":
            self.take(",")
            extra.append(self.expr())
        return EnvSpec(base, tuple(extra))


def parse_rule(text: str, line_no: int = 1) -> Rule:
    return _RuleParser(_tokenize(text, line_no), line_no).rule()


def parse_law(text: str) -> HoGsosLaw:
    """Parse the text format; blank lines and `#` comments are ignored."""
    name: Optional[str] = None
    effect = BranchingEffect.DETERMINISTIC
    guarded = False
    ranking: List[Tuple[str, int]] = []
    rules: List[Rule] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if "=>" not in line and words[0] in ("law", "effect", "guarded", "rank"):
            if words[0] == "law" and len(words) == 2:
                name = words[1]
            elif words[0] == "effect" and len(words) == 2:
                try:
                    effect = BranchingEffect(words[1])
                except ValueError:
                    raise RuleSyntaxError(f"line {line_no}: unknown effect {words[1]!r}") from None
            elif words[0] == "guarded" and len(words) == 2 and words[1] in ("yes", "no"):
                guarded = words[1] == "yes"
            elif words[0] == "rank" and len(words) == 3 and words[2].isdigit():
                ranking.append((words[1], int(words[2])))
            else:
                raise RuleSyntaxError(f"line {line_no}: malformed declaration {line!r}")
            continue
        rules.append(parse_rule(line, line_no))
    if name is None:
        raise RuleSyntaxError("missing `law NAME` declaration")
    law = HoGsosLaw(name, effect, guarded, tuple(ranking), tuple(rules))
    check_law_shape(law)
    return law


def format_law(law: HoGsosLaw) -> str:
    lines = [
        f"law {law.name}",
        f"effect {law.effect.value}",
        f"guarded {'yes' if law.guarded else 'no'}",
    ]
    lines.extend(f"rank {name} {rank}" for name, rank in law.ranking)
    lines.append("")
    lines.extend(str(rule) for rule in law.rules)
    return "\n".join(lines) + "\n"


def load_law(path: Union[str, Path]) -> HoGsosLaw:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Could not read rule table {path}: {e}")
        raise
    law = parse_law(text)
    logger.debug(f"Loaded law {law.name} with {len(law.rules)} rules from {path}")
    return law


def check_law_shape(law: HoGsosLaw) -> None:
    """
    Static well-formedness: premise references point at premises with the
    right tag, deterministic laws never offer alternatives, guards only in
    guarded laws, no two rules overlap.
    """
    for rule in law.rules:
        pattern, conclusion = rule.pattern, rule.conclusion
        arity = len(pattern.premises)
        if pattern.stage_guard is not None and not law.guarded:
            raise RuleSyntaxError(f"{rule}: stage guards need a guarded law")
        if isinstance(conclusion.step, ReductConclusion):
            if law.effect is BranchingEffect.DETERMINISTIC and len(conclusion.step.alternatives) != 1:
                raise RuleSyntaxError(f"{rule}: deterministic laws take exactly one reduct")
        for expr in conclusion.expressions():
            for sub in subexpressions(expr):
                if isinstance(sub, (Arg, ReductOf, ApplyFun, SubstOf)) and sub.index >= arity:
                    raise RuleSyntaxError(f"{rule}: {sub} refers past the {arity} premise(s)")
                if isinstance(sub, ReductOf) and pattern.premises[sub.index] is not PremiseTag.REDUCT:
                    raise RuleSyntaxError(f"{rule}: {sub} needs premise {sub.index} tagged R")
                if isinstance(sub, ApplyFun) and pattern.premises[sub.index] is not PremiseTag.FUNCTION:
                    raise RuleSyntaxError(f"{rule}: {sub} needs premise {sub.index} tagged F")
                if isinstance(sub, BoundProbe) and not (
                    isinstance(conclusion.step, FunctionConclusion) and expr is conclusion.step.body
                ):
                    raise RuleSyntaxError(f"{rule}: ? is only bound inside a fun conclusion")
    for position, rule in enumerate(law.rules):
        for other in law.rules[position + 1:]:
            if rule.pattern.overlaps(other.pattern):
                raise AmbiguousRules(f"Law {law.name}: {rule.pattern} overlaps {other.pattern}")
