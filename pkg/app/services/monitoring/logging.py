"""
Structured JSON Logging with Run Context
Stdlib records are rendered as JSON and carry the structlog context variables
(run_id, method, repetition) bound by the experiment runner.
"""

import logging
import sys
from typing import Optional

import structlog
from pythonjsonlogger import jsonlogger

from app.config import settings

SERVICE_NAME = "nmf-posterior-explorer"


class RunContextJsonFormatter(jsonlogger.JsonFormatter):
    """
    JSON formatter that adds the bound run context to every record.

    Adds:
    - run_id, method, repetition: from structlog contextvars, or 'none'
    - service: application name
    - environment: deployment environment from settings
    """

    def add_fields(self, log_record, record, message_dict):
        super().add_fields(log_record, record, message_dict)
        context = structlog.contextvars.get_contextvars()
        for key in ("run_id", "method", "repetition"):
            log_record.setdefault(key, context.get(key, "none"))
        log_record["service"] = SERVICE_NAME
        log_record["environment"] = settings.environment


def setup_logging(level: Optional[str] = None, json_output: Optional[bool] = None) -> logging.Handler:
    """
    Route stdlib logging and structlog to stderr.

    JSON output uses RunContextJsonFormatter; otherwise structlog's console
    renderer. Stdout stays free for CLI results.

    Returns:
        logging.Handler: the installed handler (for testing)
    """
    level_name = (level or settings.log_level).upper()
    use_json = settings.log_json if json_output is None else json_output

    handler = logging.StreamHandler(sys.stderr)
    if use_json:
        handler.setFormatter(RunContextJsonFormatter(
            "%(asctime)s %(levelname)s %(name)s %(message)s",
            rename_fields={"asctime": "timestamp", "levelname": "level"},
        ))
        processors = [structlog.contextvars.merge_contextvars, structlog.stdlib.render_to_log_kwargs]
    else:
        handler.setFormatter(logging.Formatter("%(message)s"))
        processors = [
            structlog.contextvars.merge_contextvars,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.add_log_level,
            structlog.dev.ConsoleRenderer(colors=False),
        ]

    root_logger = logging.getLogger()
    for existing in list(root_logger.handlers):
        if getattr(existing, "_nmf_explorer", False):
            root_logger.removeHandler(existing)
    handler._nmf_explorer = True
    root_logger.addHandler(handler)
    root_logger.setLevel(level_name)

    structlog.configure(
        processors=processors,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )
    return handler
