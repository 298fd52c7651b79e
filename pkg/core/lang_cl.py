"""
The guarded untyped combinator languages xCL and xNCCL.

Both run over a single sort; their laws dispatch application on stage 0
versus later stages, and every other rule collapses to the trivial payload
at stage 0.
"""

from typing import Dict, Tuple

from core.behavior import BranchingEffect
from core.kernel import UNTYPED, PlainFamily, Signature, Term, make_term
from core.languages import Language
from core.rules import HoGsosLaw
from core.syntax import CombinatorGrammar, RawTerm, show_combinator


class UntypedCombinatorLanguage(Language):
    constants: Dict[str, int] = {"S": 0, "K": 0, "I": 0, "S'": 1, "K'": 1, "S''": 2}
    infix: Tuple[str, ...] = ()

    def build_signature(self, law: HoGsosLaw) -> Signature:
        arities = dict(self.constants, app=2, **{name: 2 for name in self.infix})
        return Signature(
            self.name,
            [PlainFamily(name, arity, law.rank_of(name) or 0) for name, arity in arities.items()],
        )

    @property
    def default_sort(self) -> str:
        return UNTYPED

    def parse(self, text: str) -> Term:
        return self.elaborate(CombinatorGrammar(self.constants, self.infix).parse(text))

    def elaborate(self, raw: RawTerm) -> Term:
        children = [self.elaborate(child) for child in raw.args]
        op = self.signature.instantiate(raw.name, [UNTYPED] * len(children))
        return make_term(op, children)

    def show(self, t: Term) -> str:
        return show_combinator(t)


class Xcl(UntypedCombinatorLanguage):
    name = "xcl"
    rules_file = "xcl.rules"
    stage_shape = BranchingEffect.DETERMINISTIC


class Xnccl(UntypedCombinatorLanguage):
    name = "xnccl"
    rules_file = "xnccl.rules"
    infix = ("plus", "par")
    stage_shape = BranchingEffect.POWERSET
