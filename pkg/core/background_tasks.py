import threading
import uuid
from datetime import datetime, timezone
from typing import Dict, List, Optional

from core.data_models import SuiteRun
from core.harness import run_suite
from core.logger import get_logger

logger = get_logger(__name__)

_runs: Dict[str, SuiteRun] = {}
_runs_lock = threading.Lock()


def create_suite_run(suite: str, languages: List[str]) -> SuiteRun:
    """Registers a queued run and returns it; the caller schedules process_suite_run."""
    run = SuiteRun(
        run_id=str(uuid.uuid4()),
        suite=suite,
        languages=languages,
        created_at=datetime.now(timezone.utc),
    )
    with _runs_lock:
        _runs[run.run_id] = run
    return run


def get_suite_run(run_id: str) -> Optional[SuiteRun]:
    with _runs_lock:
        run = _runs.get(run_id)
        return None if run is None else run.model_copy(deep=True)


def _update(run_id: str, **fields) -> None:
    with _runs_lock:
        _runs[run_id] = _runs[run_id].model_copy(update=fields)


def process_suite_run(
    run_id: str,
    suite: str,
    languages: Optional[List[str]],
    seed: int,
    mutation: Optional[str],
    params: Dict[str, int],
):
    """Runs one property suite in the background and stores its records on the run."""
    logger.info(f"Starting suite run {run_id} ({suite}) in background.")
    _update(run_id, status="running")
    try:
        records = run_suite(suite, languages, seed=seed, mutation=mutation, params=params)
        _update(run_id, status="done", records=records, finished_at=datetime.now(timezone.utc))
        failed = sum(1 for r in records if r.verdict == "fail")
        logger.info(f"Suite run {run_id} completed: {len(records)} record(s), {failed} failed.")
    except Exception as e:
        logger.error(f"Error in suite run {run_id}: {e}", exc_info=True)
        _update(run_id, status="failed", error=str(e), finished_at=datetime.now(timezone.utc))
