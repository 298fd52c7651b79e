from fastapi import FastAPI, Request, Response, status
from fastapi.middleware.cors import CORSMiddleware
from slowapi.errors import RateLimitExceeded

from core.config import CORS_ORIGINS
from core.gsos_service import check_flatness
from core.kernel import WorkbenchError
from core.languages import LANGUAGE_NAMES, get_language
from core.limiter import limiter
from core.logger import get_logger
from routers import semantics as semantics_router, stages as stages_router, suites as suites_router

logger = get_logger(__name__)

app = FastAPI(
    title="GSOS Workbench API",
    description="Operational and denotational semantics, bisimilarity and property suites for higher-order GSOS languages",
    version="1.0.0",
)


@app.on_event("startup")
async def startup_event():
    """
    On startup, load every shipped rule table so malformed or non-flat laws show up in the logs
    before the first request.
    """
    for name in LANGUAGE_NAMES:
        try:
            report = check_flatness(get_language(name).law)
        except WorkbenchError as e:
            logger.error(f"Could not load language {name}: {e}")
            continue
        if not report.flat:
            logger.warning(f"Law {name} is not relatively flat: {'; '.join(report.violations)}")
    logger.info(f"Loaded languages: {', '.join(LANGUAGE_NAMES)}")


# Initialize rate limiter
app.state.limiter = limiter
app.add_exception_handler(
    RateLimitExceeded,
    lambda request, exc: Response(
        content=f"Rate limit exceeded: {exc.detail}",
        status_code=status.HTTP_429_TOO_MANY_REQUESTS,
    ),
)


@app.middleware("http")
async def log_requests(request: Request, call_next):
    logger.debug(f"Incoming request: {request.method} {request.url}")
    response = await call_next(request)
    return response


app.add_middleware(
    CORSMiddleware,
    allow_origins=CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# --- Include Routers ---
app.include_router(semantics_router.router, prefix="/api")
app.include_router(stages_router.router, prefix="/api")
app.include_router(suites_router.router, prefix="/api")


@app.get("/")
async def root():
    return {
        "message": "GSOS Workbench API",
        "version": "1.0.0",
        "languages": list(LANGUAGE_NAMES),
        "docs": "/docs",
        "redoc": "/redoc",
    }


@app.get("/health")
async def health():
    return {"status": "healthy"}


if __name__ == "__main__":
    import os
    import uvicorn

    port = int(os.environ.get("PORT", 8080))
    uvicorn.run("main:app", host="0.0.0.0", port=port, reload=True)
