"""
Language base class and registry.

A language bundles a law (loaded from RULES_DIR), the signature it runs
over, a surface grammar and the default probe pools. Languages are looked up
by name with `get_language`; `with_law` gives a copy running a mutated law
over the same signature.
"""

import copy
import threading
from abc import ABC, abstractmethod
from typing import Dict, List, Optional

from core.behavior import BranchingEffect
from core.config import PROBE_LIMIT, PROBE_SIZE, RULES_DIR
from core.gitrees import ProbeSet
from core.kernel import Signature, Sort, Term, WorkbenchError
from core.logger import get_logger
from core.rules import HoGsosLaw, load_law

logger = get_logger(__name__)


class UnknownLanguage(WorkbenchError):
    """Custom exception for language names missing from the registry."""
    pass


class Language(ABC):
    name: str
    rules_file: str
    typed: bool = False
    # Reduct shape of the finite stages, for the guarded untyped languages only
    stage_shape: Optional[BranchingEffect] = None
    # Smallest term size whose closed population supports sampled adequacy runs
    pair_size: int = 0

    def __init__(self, law: Optional[HoGsosLaw] = None):
        self.law = law if law is not None else load_law(RULES_DIR / self.rules_file)
        self.signature = self.build_signature(self.law)

    @abstractmethod
    def build_signature(self, law: HoGsosLaw) -> Signature:
        pass

    @abstractmethod
    def parse(self, text: str) -> Term:
        """Parse and sort a closed surface term."""

    @abstractmethod
    def show(self, t: Term) -> str:
        pass

    @property
    @abstractmethod
    def default_sort(self) -> Sort:
        pass

    def sample_sorts(self) -> List[Sort]:
        """Sorts the property suites draw random terms from."""
        return [self.default_sort]

    @property
    def guarded(self) -> bool:
        return self.law.guarded

    @property
    def effect(self) -> BranchingEffect:
        return self.law.effect

    def with_law(self, law: HoGsosLaw) -> "Language":
        """A copy running `law` over the same signature and grammar."""
        clone = copy.copy(self)
        clone.law = law
        return clone

    def probes(self, size: Optional[int] = None, limit: Optional[int] = None) -> ProbeSet:
        """Closed terms up to `size` nodes, at most `limit` per sort, labelled by their surface text."""
        return ProbeSet.from_terms(
            self.signature,
            PROBE_SIZE if size is None else size,
            show=self.show,
            limit=PROBE_LIMIT if limit is None else limit,
        )

    def denotational_probes(self, size: Optional[int] = None, limit: Optional[int] = None) -> ProbeSet:
        """As `probes`, embedded through the denotation map."""
        from core.gsos_service import gsos_service

        model = gsos_service.denotational(self)
        return ProbeSet.from_terms(
            self.signature,
            PROBE_SIZE if size is None else size,
            embed=model.denote,
            show=self.show,
            limit=PROBE_LIMIT if limit is None else limit,
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}(law={self.law.name})"


LANGUAGE_NAMES = ("xtcl", "xptcl", "xcl", "xnccl", "lambda")

_registry: Dict[str, Language] = {}
_registry_lock = threading.Lock()


def _construct(name: str) -> Language:
    if name == "xtcl":
        from core.lang_tcl import Xtcl
        return Xtcl()
    if name == "xptcl":
        from core.lang_tcl import Xptcl
        return Xptcl()
    if name == "xcl":
        from core.lang_cl import Xcl
        return Xcl()
    if name == "xnccl":
        from core.lang_cl import Xnccl
        return Xnccl()
    from core.lang_lambda import Lambda
    return Lambda()


def get_language(name: str) -> Language:
    """
    The shared instance of a language.

    Raises:
        UnknownLanguage: if the name is not one of LANGUAGE_NAMES
    """
    key = name.strip().lower()
    if key not in LANGUAGE_NAMES:
        raise UnknownLanguage(f"Unknown language {name!r}; expected one of {', '.join(LANGUAGE_NAMES)}")
    with _registry_lock:
        found = _registry.get(key)
        if found is None:
            found = _construct(key)
            _registry[key] = found
            logger.info(f"Loaded language {key} ({len(found.law.rules)} rules)")
    return found
