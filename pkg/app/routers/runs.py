"""
Run Results API Router
Read-only endpoints over the results directory written by the experiment runner
"""

from pathlib import Path
from typing import Optional

import pandas as pd
import structlog
from fastapi import APIRouter, Depends, HTTPException, Query
from fastapi.responses import PlainTextResponse
from pydantic import ValidationError

from app.config import settings
from app.models.run_report import RepetitionResult, RunSummary
from app.services.experiment.reporting import find_runs
from app.services.storage.local_files import read_json

logger = structlog.get_logger()

router = APIRouter(prefix="/api/v1/runs", tags=["runs"])


def get_results_dir() -> Path:
    """Results root; overridden in tests through dependency_overrides."""
    return Path(settings.results_dir)


def _run_dir(root: Path, name: str) -> Path:
    root = root.resolve()
    candidate = (root / name).resolve()
    if root != candidate and root not in candidate.parents:
        raise HTTPException(status_code=400, detail="Run name escapes the results directory")
    if not (candidate / "summary.json").is_file():
        raise HTTPException(status_code=404, detail="Run not found")
    return candidate


def _load_summary(run_dir: Path) -> RunSummary:
    try:
        return RunSummary.model_validate(read_json(run_dir / "summary.json"))
    except (OSError, ValueError, ValidationError) as exc:
        logger.warning("run_summary_unreadable", run_dir=str(run_dir), error=str(exc))
        raise HTTPException(status_code=500, detail="Run summary is unreadable")


@router.get("")
async def list_runs(
    method: Optional[str] = Query(None, description="Filter by method"),
    limit: int = Query(100, ge=1, le=1000, description="Maximum number of runs to return"),
    root: Path = Depends(get_results_dir),
):
    """
    List runs under the results directory, sorted by name.

    Unreadable summaries are skipped and counted.
    """
    if not root.is_dir():
        raise HTTPException(status_code=503, detail="Results directory not found")

    runs = []
    unreadable = 0
    for run_dir in find_runs(root):
        try:
            summary = RunSummary.model_validate(read_json(run_dir / "summary.json"))
        except (OSError, ValueError, ValidationError):
            unreadable += 1
            continue
        if method and summary.method != method:
            continue
        runs.append({
            "name": run_dir.relative_to(root).as_posix() or ".",
            "method": summary.method,
            "dataset": summary.dataset,
            "repetitions": summary.repetitions,
            "n_ok": summary.n_ok,
            "n_failed": summary.n_failed,
            "elbo_mean": summary.elbo.mean if summary.elbo else None,
        })

    logger.info("runs_listed", total=len(runs), unreadable=unreadable, filter=method)
    return {"total": len(runs), "unreadable": unreadable, "runs": runs[:limit]}


@router.get("/{name:path}/persistence", response_class=PlainTextResponse)
async def get_run_persistence(
    name: str,
    repetition: Optional[int] = Query(None, ge=0, description="Single repetition instead of all"),
    root: Path = Depends(get_results_dir),
):
    """
    Persistence curves as CSV: epsilon_degrees, covering_number, plus a
    repetition column when several repetitions are combined.

    Raises:
        404: run or persistence data not found
    """
    run_dir = _run_dir(root, name)
    if repetition is not None:
        path = run_dir / f"rep_{repetition:03d}" / "persistence.csv"
        if not path.is_file():
            raise HTTPException(status_code=404, detail="Persistence data not found")
        return PlainTextResponse(path.read_text(encoding="utf-8"), media_type="text/csv")

    frames = []
    for path in sorted(run_dir.glob("rep_*/persistence.csv")):
        frame = pd.read_csv(path)
        frame.insert(0, "repetition", int(path.parent.name.split("_")[1]))
        frames.append(frame)
    if not frames:
        raise HTTPException(status_code=404, detail="Persistence data not found")
    combined = pd.concat(frames, ignore_index=True)
    return PlainTextResponse(combined.to_csv(index=False, float_format="%.17g"), media_type="text/csv")


@router.get("/{name:path}")
async def get_run(name: str, root: Path = Depends(get_results_dir)):
    """
    Run summary with its per-repetition results.

    Raises:
        404: run not found
    """
    run_dir = _run_dir(root, name)
    summary = _load_summary(run_dir)
    repetitions = []
    for path in sorted(run_dir.glob("rep_*/result.json")):
        try:
            repetitions.append(RepetitionResult.model_validate(read_json(path)).model_dump(mode="json"))
        except (OSError, ValueError, ValidationError) as exc:
            repetitions.append({"file": path.relative_to(run_dir).as_posix(), "error": str(exc)})

    logger.info("run_detail_retrieved", name=name, repetitions=len(repetitions))
    return {"name": name, "summary": summary.model_dump(mode="json"), "repetitions": repetitions}
