"""
Sentry Error Tracking
Reports failed repetitions with their run context when a DSN is configured.
"""

from typing import Optional

import structlog

logger = structlog.get_logger(__name__)

_enabled = False


def init_sentry(with_fastapi: bool = False) -> bool:
    """
    Initialize the Sentry SDK.

    If no DSN is configured, logs a warning and returns False, so development
    runs work without Sentry.
    """
    global _enabled
    from app.config import settings

    if settings.sentry_dsn is None:
        logger.warning("sentry_disabled", reason="no_dsn")
        return False

    try:
        import sentry_sdk

        integrations = []
        if with_fastapi:
            from sentry_sdk.integrations.fastapi import FastApiIntegration

            integrations.append(FastApiIntegration())
        sentry_sdk.init(
            dsn=settings.sentry_dsn,
            environment=settings.sentry_environment or settings.environment,
            traces_sample_rate=0.0,
            integrations=integrations,
        )
        _enabled = True
        logger.info("sentry_initialized", environment=settings.sentry_environment or settings.environment)
    except Exception as e:
        logger.error("sentry_init_failed", error=str(e))
        _enabled = False
    return _enabled


def set_repetition_context(run_id: str, method: str, repetition: int, seed: Optional[int] = None) -> None:
    if not _enabled:
        return
    import sentry_sdk

    sentry_sdk.set_context("repetition", {
        "run_id": run_id,
        "method": method,
        "repetition": repetition,
        "seed": seed,
    })
    sentry_sdk.set_tag("method", method)
    sentry_sdk.set_tag("run_id", run_id)


def capture_repetition_failure(exc: BaseException, run_id: str, method: str, repetition: int,
                               seed: Optional[int] = None) -> Optional[str]:
    """Send exc to Sentry with the repetition context; returns the event id."""
    if not _enabled:
        return None
    import sentry_sdk

    set_repetition_context(run_id, method, repetition, seed)
    return sentry_sdk.capture_exception(exc)
