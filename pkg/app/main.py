"""
NMF Posterior Explorer - Results API
FastAPI entry point serving run summaries and persistence data read-only
"""

import structlog
from fastapi import FastAPI

from app.config import settings
from app.routers.runs import router as runs_router
from app.services.monitoring.error_tracking import init_sentry
from app.services.monitoring.logging import setup_logging

setup_logging()
logger = structlog.get_logger(__name__)

app = FastAPI(
    title="NMF Posterior Explorer",
    description="Read-only browser over experiment results: summaries, repetitions and persistence curves",
    version="0.1.0",
    docs_url="/docs" if settings.environment == "development" else None,
    redoc_url="/redoc" if settings.environment == "development" else None,
)

app.include_router(runs_router)


@app.on_event("startup")
async def startup_event():
    logger.info("startup", environment=settings.environment, results_dir=str(settings.results_dir))
    sentry_enabled = init_sentry(with_fastapi=True)
    logger.info("monitoring_initialized", sentry_enabled=sentry_enabled)


@app.get("/health")
async def health():
    return {"status": "ok", "results_dir": str(settings.results_dir), "environment": settings.environment}
