"""
Application Configuration
"""

from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables"""

    # Environment
    environment: str = "development"

    # Logging
    log_level: str = "INFO"
    log_json: bool = True  # False switches to the structlog console renderer

    # Experiment outputs
    results_dir: Path = Path("results")
    default_workers: int = 1  # Repetitions run in-process when 1

    # Report browser (bnmf serve)
    api_host: str = "127.0.0.1"
    api_port: int = 8000

    # Error Tracking (Sentry)
    sentry_dsn: Optional[str] = None
    sentry_environment: Optional[str] = None

    class Config:
        env_file = ".env"
        case_sensitive = False


settings = Settings()
