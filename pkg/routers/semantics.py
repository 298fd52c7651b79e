from fastapi import APIRouter, Request

from core.behavior import BranchingEffect
from core.bisim_service import bisim_service
from core.config import FUEL
from core.data_models import (
    BisimModel,
    BisimRequest,
    DenotationModel,
    DenoteRequest,
    RulesModel,
    TraceModel,
    TraceRequest,
    convert_bisim_to_model,
    convert_trace_to_model,
    convert_tree_to_model,
)
from core.gitrees import truncate, unravel
from core.gsos_service import check_flatness, gsos_service
from core.kernel import WorkbenchError
from core.languages import get_language
from core.limiter import limiter
from core.logger import get_logger
from core.rules import format_law
from routers.errors import to_http_exception

logger = get_logger(__name__)

router = APIRouter()


@router.post("/trace", response_model=TraceModel)
@limiter.limit("60/minute")
def trace(request: Request, body: TraceRequest):
    """
    Runs a term on the operational model until it terminates, becomes a function,
    or the fuel runs out.
    """
    try:
        lang = get_language(body.language)
        term = lang.parse(body.term)
        result = gsos_service.run_trace(lang, term, body.fuel, body.stage, body.branch, body.seed)
    except WorkbenchError as e:
        raise to_http_exception(e)
    return convert_trace_to_model(result, lang.name, lang.show)


@router.post("/denote", response_model=DenotationModel)
@limiter.limit("30/minute")
def denote(request: Request, body: DenoteRequest):
    """
    Returns the depth-truncated denotation of a term; deterministic languages also
    get the (steps, outcome) reading of the unfolded path.
    """
    try:
        lang = get_language(body.language)
        term = lang.parse(body.term)
        d = gsos_service.denote(lang, term)
        tree = truncate(d, body.depth, lang.denotational_probes(body.probe_size))
        unravelling = None
        if lang.effect is BranchingEffect.DETERMINISTIC:
            unravelling = str(unravel(d, FUEL))
    except WorkbenchError as e:
        raise to_http_exception(e)
    return DenotationModel(
        language=lang.name,
        term=lang.show(term),
        sort=str(term.sort),
        depth=body.depth,
        tree=convert_tree_to_model(tree),
        unravelling=unravelling,
    )


@router.post("/bisim", response_model=BisimModel)
@limiter.limit("30/minute")
def bisim(request: Request, body: BisimRequest):
    """Compares two terms by step-indexed applicative bisimilarity."""
    try:
        lang = get_language(body.language)
        p, q = lang.parse(body.left), lang.parse(body.right)
        report = bisim_service.bisim(lang, p, q, body.depth, lang.probes(body.probe_size))
    except WorkbenchError as e:
        raise to_http_exception(e)
    return convert_bisim_to_model(report, lang.name, lang.show(p), lang.show(q))


@router.get("/rules/{language}", response_model=RulesModel)
@limiter.limit("100/minute")
async def rules(request: Request, language: str):
    try:
        lang = get_language(language)
    except WorkbenchError as e:
        raise to_http_exception(e)
    report = check_flatness(lang.law)
    return RulesModel(language=lang.name, law=format_law(lang.law), flat=report.flat, violations=list(report.violations))
