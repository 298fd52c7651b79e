from fastapi import APIRouter, Query, Request

from core.data_models import StageModel, convert_stage_to_model
from core.kernel import WorkbenchError
from core.languages import get_language
from core.limiter import limiter
from core.stage_service import stage_service
from routers.errors import to_http_exception

router = APIRouter()


@router.get("/stages/{language}/{n}", response_model=StageModel)
@limiter.limit("10/minute")
def get_stage(
    request: Request,
    language: str,
    n: int,
    unfiltered: bool = Query(False, description="Keep restriction-incompatible function tuples."),
):
    """
    Enumerates stage n of the locally final coalgebra of a guarded untyped language.
    """
    if n < 0:
        raise to_http_exception(WorkbenchError(f"stage must be >= 0, got {n}"))
    try:
        lang = get_language(language)
        elements = stage_service.enumerate_stage(lang, n, filter_restrictions=not unfiltered)
    except WorkbenchError as e:
        raise to_http_exception(e)
    return convert_stage_to_model(elements, lang.name, n)
