"""
Cross-run reports.

Scans a directory tree for run summaries, aggregates the per-repetition
results by method, and writes report.txt, report.csv and persistence_all.csv
(the persistence curves of every repetition with method and run columns).
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import ValidationError

from app.models.run_report import RepetitionResult, RunSummary
from app.services.experiment.rendering import REPORT_TEMPLATE, TableRenderer
from app.services.experiment.runner import EXIT_OK, EXIT_PARTIAL_FAILURE, EXIT_TOTAL_FAILURE
from app.services.storage.local_files import atomic_write_text, read_json

logger = structlog.get_logger(__name__)

REPORT_COLUMNS = ["method", "runs", "elbo_mean", "elbo_q25", "elbo_q75", "components_mean", "cover_mean"]


@dataclass
class MethodRow:
    method: str
    runs: int
    elbo_mean: float
    elbo_q25: float
    elbo_q75: float
    components_mean: float
    cover_mean: float


@dataclass
class Report:
    rows: List[MethodRow] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)
    persistence: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def exit_code(self) -> int:
        if not self.rows:
            return EXIT_TOTAL_FAILURE
        return EXIT_PARTIAL_FAILURE if self.problems else EXIT_OK

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.__dict__ for row in self.rows], columns=REPORT_COLUMNS)


def find_runs(root: Path) -> List[Path]:
    return sorted(p.parent for p in root.rglob("summary.json"))


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


def _pct(values: List[float], q: float) -> float:
    return float(np.percentile(values, q)) if values else float("nan")


def _load_run(run_dir: Path, problems: List[str]) -> Tuple[RunSummary, List[RepetitionResult], List[pd.DataFrame]]:
    summary = RunSummary.model_validate(read_json(run_dir / "summary.json"))
    results: List[RepetitionResult] = []
    curves: List[pd.DataFrame] = []
    for rep_dir in sorted(run_dir.glob("rep_*")):
        result_path = rep_dir / "result.json"
        try:
            result = RepetitionResult.model_validate(read_json(result_path))
        except (OSError, ValueError, ValidationError) as exc:
            problems.append(f"{result_path}: {exc.__class__.__name__}: {exc}")
            continue
        results.append(result)
        curve_path = rep_dir / "persistence.csv"
        if result.status == "ok" and curve_path.exists():
            try:
                frame = pd.read_csv(curve_path)
            except (OSError, ValueError) as exc:
                problems.append(f"{curve_path}: {exc.__class__.__name__}: {exc}")
                continue
            frame.insert(0, "repetition", result.repetition)
            frame.insert(0, "run", str(run_dir))
            frame.insert(0, "method", summary.method)
            curves.append(frame)
    return summary, results, curves


def build_report(root: Path) -> Report:
    """Aggregate every run under root; unreadable files are listed, not fatal."""
    root = Path(root)
    report = Report()
    by_method: Dict[str, Dict[str, list]] = {}
    curves: List[pd.DataFrame] = []
    for run_dir in find_runs(root):
        try:
            summary, results, run_curves = _load_run(run_dir, report.problems)
        except (OSError, ValueError, ValidationError) as exc:
            report.problems.append(f"{run_dir / 'summary.json'}: {exc.__class__.__name__}: {exc}")
            continue
        bucket = by_method.setdefault(summary.method, {"runs": 0, "elbo": [], "components": [], "cover": []})
        bucket["runs"] += 1
        for r in results:
            if r.status != "ok":
                continue
            if r.elbo is not None:
                bucket["elbo"].append(r.elbo)
            if r.n_components is not None:
                bucket["components"].append(r.n_components)
            if r.cover_at_001 is not None:
                bucket["cover"].append(r.cover_at_001)
        curves.extend(run_curves)

    for method in sorted(by_method):
        b = by_method[method]
        report.rows.append(MethodRow(
            method=method,
            runs=b["runs"],
            elbo_mean=_mean(b["elbo"]),
            elbo_q25=_pct(b["elbo"], 25),
            elbo_q75=_pct(b["elbo"], 75),
            components_mean=_mean(b["components"]),
            cover_mean=_mean(b["cover"]),
        ))
    if curves:
        report.persistence = pd.concat(curves, ignore_index=True)
    for problem in report.problems:
        logger.warning("report_file_problem", problem=problem)
    return report


def render_report(report: Report) -> str:
    return TableRenderer().render(REPORT_TEMPLATE, {"rows": report.rows, "problems": report.problems}, "report")


def write_report(root: Path) -> Tuple[Report, str]:
    """Write report.txt, report.csv and persistence_all.csv into root; returns the report and its text."""
    root = Path(root)
    report = build_report(root)
    text = render_report(report)
    if root.is_dir():
        atomic_write_text(root / "report.txt", text)
        atomic_write_text(root / "report.csv", report.to_frame().to_csv(index=False, float_format="%.17g"))
        if not report.persistence.empty:
            atomic_write_text(root / "persistence_all.csv",
                              report.persistence.to_csv(index=False, float_format="%.17g"))
    logger.info("report_written", root=str(root), methods=len(report.rows), problems=len(report.problems))
    return report, text
