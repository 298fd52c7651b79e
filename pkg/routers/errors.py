from fastapi import HTTPException, status

from core.bisim_service import UniverseExplosion
from core.kernel import WorkbenchError
from core.logger import get_logger
from core.stage_service import StageTooLarge

logger = get_logger(__name__)


def to_http_exception(e: WorkbenchError) -> HTTPException:
    """400 for bad input, 413 when the requested object is beyond the configured bounds."""
    if isinstance(e, (StageTooLarge, UniverseExplosion)):
        return HTTPException(status_code=status.HTTP_413_REQUEST_ENTITY_TOO_LARGE, detail=str(e))
    logger.info(f"Rejected request: {type(e).__name__}: {e}")
    return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=f"{type(e).__name__}: {e}")
