from fastapi import APIRouter, BackgroundTasks, HTTPException, Request, status

from core.background_tasks import create_suite_run, get_suite_run, process_suite_run
from core.data_models import SuiteRequest, SuiteRun
from core.harness import MUTATIONS, SUITES, get_mutation, suite_parameters
from core.kernel import WorkbenchError
from core.languages import LANGUAGE_NAMES, get_language
from core.limiter import limiter
from core.logger import get_logger
from routers.errors import to_http_exception

logger = get_logger(__name__)

router = APIRouter()


@router.get("/suites")
async def list_suites():
    """Suites with their integer parameters, and the documented mutations."""
    return {
        "suites": {name: suite_parameters(name) for name in SUITES},
        "mutations": {name: m.description for name, m in MUTATIONS.items()},
    }


@router.post("/suites/{name}", status_code=status.HTTP_202_ACCEPTED)
@limiter.limit("10/minute")
async def start_suite(request: Request, name: str, body: SuiteRequest, background_tasks: BackgroundTasks):
    """
    Validates the request and runs the suite in the background; poll
    /suites/runs/{run_id} for the records.
    """
    if name not in SUITES:
        raise HTTPException(status_code=404, detail=f"Unknown suite {name!r}")
    try:
        mutation = get_mutation(body.mutation)
        for language in body.languages or ():
            get_language(language)
        unknown = sorted(set(body.params) - set(suite_parameters(name)))
        if unknown:
            raise WorkbenchError(f"Suite {name} has no parameter(s) {', '.join(unknown)}")
    except WorkbenchError as e:
        raise to_http_exception(e)
    languages = body.languages or list(mutation.languages if mutation else LANGUAGE_NAMES)
    run = create_suite_run(name, languages)
    background_tasks.add_task(process_suite_run, run.run_id, name, languages, body.seed, body.mutation, body.params)
    logger.info(f"Queued suite run {run.run_id} ({name}) on {', '.join(languages)}")
    return {"run_id": run.run_id, "status": run.status}


@router.get("/suites/runs/{run_id}", response_model=SuiteRun)
async def get_run(run_id: str):
    run = get_suite_run(run_id)
    if run is None:
        raise HTTPException(status_code=404, detail=f"Suite run {run_id} not found.")
    return run
