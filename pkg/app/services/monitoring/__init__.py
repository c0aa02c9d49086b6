"""
Monitoring Module
Exports for structured logging and error tracking
"""

from app.services.monitoring.logging import RunContextJsonFormatter, setup_logging
from app.services.monitoring.error_tracking import (
    capture_repetition_failure,
    init_sentry,
    set_repetition_context,
)

__all__ = [
    "setup_logging",
    "RunContextJsonFormatter",
    "init_sentry",
    "set_repetition_context",
    "capture_repetition_failure",
]
