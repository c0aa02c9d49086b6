"""
Experiment Runner

Executes the repetitions of one RunConfig and writes, per repetition,
mixture.json, result.json, persistence.csv, proposals.jsonl and chain.json,
plus summary.json, summary.txt and config.resolved.txt for the run.

Design decisions:
- The problem (data, noise level, Lin fits) is resolved once and shared by
  all repetitions; repetition i uses seed + i for its own randomness.
- A failing repetition is logged, reported to Sentry and recorded; the
  others continue.
- Exit codes: 0 all ok, 1 config error, 2 some repetitions failed,
  3 all failed.
"""

import time
import uuid
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.models.run_config import RunConfig
from app.models.run_report import RepetitionResult, RunSummary, StatBlock
from app.services.coverage import greedy_cover, pairwise_wad, persistence_curve
from app.services.experiment.config_files import dump_flat
from app.services.experiment.pipelines import PIPELINES, PipelineOutcome, Problem, resolve_problem
from app.services.experiment.rendering import SUMMARY_TEMPLATE, TableRenderer
from app.config import settings
from app.services.monitoring.error_tracking import capture_repetition_failure, init_sentry
from app.services.monitoring.logging import setup_logging
from app.services.nmf_model import Factorization
from app.services.storage.local_files import atomic_write_text, write_json, write_jsonl
from app.services.variational import elbo
from app.services.variational.serialization import write_mixture

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARTIAL_FAILURE = 2
EXIT_TOTAL_FAILURE = 3

COVER_EPSILON_DEG = 0.01


def epsilon_grid(config: RunConfig) -> np.ndarray:
    m = config.metrics
    return np.logspace(np.log10(m.epsilon_min), np.log10(m.epsilon_max), m.n_epsilons)


def repetition_dir(out_dir: Path, repetition: int) -> Path:
    return out_dir / f"rep_{repetition:03d}"


def _decode(problem: Problem, vectors: Sequence[np.ndarray]) -> List[Factorization]:
    spec = problem.spec
    return [Factorization.from_vector(v, spec.D, spec.N, spec.R) for v in vectors]


def _write_outcome(problem: Problem, config: RunConfig, outcome: PipelineOutcome, rep_dir: Path,
                   result: RepetitionResult) -> RepetitionResult:
    if outcome.mixture is not None:
        value = elbo(outcome.mixture, problem.X, problem.spec)
        write_mixture(rep_dir / "mixture.json", outcome.mixture, problem.spec, value)
        result.elbo = value
        result.n_components = outcome.mixture.M
        vectors = list(outcome.mixture.means)
    else:
        vectors = outcome.samples

    if vectors:
        samples = _decode(problem, vectors)
        distances = pairwise_wad(samples, config.metrics.normalization)
        curve = persistence_curve(samples, epsilon_grid(config), distances=distances)
        curve.to_csv(rep_dir / "persistence.csv")
        result.cover_at_001 = greedy_cover(distances, COVER_EPSILON_DEG)
    if outcome.proposals:
        write_jsonl(rep_dir / "proposals.jsonl", outcome.proposals)
    if outcome.chain is not None:
        write_json(rep_dir / "chain.json", outcome.chain)
    result.details.update(outcome.details)
    return result


def run_repetition(problem: Problem, config: RunConfig, repetition: int, out_dir: Path,
                   run_id: str) -> RepetitionResult:
    seed = config.seed + repetition
    rep_dir = repetition_dir(out_dir, repetition)
    rep_dir.mkdir(parents=True, exist_ok=True)
    result = RepetitionResult(repetition=repetition, seed=seed, method=config.method,
                              dataset=problem.dataset.name, status="ok")
    start = time.perf_counter()
    with structlog.contextvars.bound_contextvars(run_id=run_id, method=config.method, repetition=repetition):
        logger.info("repetition_started", seed=seed)
        try:
            outcome = PIPELINES[config.method](problem, config, seed)
            result = _write_outcome(problem, config, outcome, rep_dir, result)
        except Exception as exc:
            logger.exception("repetition_failed", error=str(exc), error_type=type(exc).__name__)
            capture_repetition_failure(exc, run_id, config.method, repetition, seed)
            result.status = "failed"
            result.error = str(exc)
            result.error_type = type(exc).__name__
        result.runtime_seconds = time.perf_counter() - start
        write_json(rep_dir / "result.json", result.model_dump(mode="json"))
        logger.info("repetition_finished", status=result.status, elbo=result.elbo,
                    n_components=result.n_components, runtime_seconds=result.runtime_seconds)
    return result


def _init_worker() -> None:
    """Process-pool initializer; workers start without logging or Sentry."""
    setup_logging()
    init_sentry()


def resolved_config(config: RunConfig) -> RunConfig:
    """config with likelihood-dependent RRT defaults and the worker count filled in."""
    return config.model_copy(update={
        "rrt": config.rrt.resolved(config.likelihood.kind),
        "workers": config.workers or settings.default_workers,
    })


def _repetition_job(args: Tuple[Problem, RunConfig, int, Path, str]) -> RepetitionResult:
    return run_repetition(*args)


def _stat(values: Sequence[float]) -> Optional[StatBlock]:
    values = [v for v in values if v is not None]
    if not values:
        return None
    arr = np.asarray(values, dtype=float)
    return StatBlock(mean=float(np.mean(arr)), q25=float(np.percentile(arr, 25)), q75=float(np.percentile(arr, 75)))


def summarize(results: Sequence[RepetitionResult], method: str, dataset: str) -> RunSummary:
    ok = [r for r in results if r.status == "ok"]
    return RunSummary(
        method=method,
        dataset=dataset,
        repetitions=len(results),
        n_ok=len(ok),
        n_failed=len(results) - len(ok),
        elbo=_stat([r.elbo for r in ok]),
        n_components=_stat([r.n_components for r in ok]),
        cover_at_001=_stat([r.cover_at_001 for r in ok]),
        failed_repetitions=[r.repetition for r in results if r.status != "ok"],
    )


def render_summary(summary: RunSummary) -> str:
    blocks = [("elbo", summary.elbo), ("components", summary.n_components), ("cover@0.01", summary.cover_at_001)]
    return TableRenderer().render(SUMMARY_TEMPLATE, {"summary": summary, "blocks": blocks}, "run_summary")


def exit_code_for(summary: RunSummary) -> int:
    if summary.n_failed == 0:
        return EXIT_OK
    return EXIT_TOTAL_FAILURE if summary.n_ok == 0 else EXIT_PARTIAL_FAILURE


def run(config: RunConfig, out_dir: Path, workers: Optional[int] = None,
        problem: Optional[Problem] = None) -> Tuple[RunSummary, int]:
    """
    Run every repetition of config into out_dir.

    Returns:
        (summary, exit code)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = resolved_config(config)
    atomic_write_text(out_dir / "config.resolved.txt", dump_flat(config))
    run_id = uuid.uuid4().hex[:12]
    workers = workers or config.workers
    dataset_label = config.dataset.label

    with structlog.contextvars.bound_contextvars(run_id=run_id, method=config.method):
        logger.info("run_started", out_dir=str(out_dir), repetitions=config.repetitions, workers=workers)
        try:
            problem = problem or resolve_problem(config)
        except Exception as exc:
            logger.exception("problem_resolution_failed", error=str(exc))
            capture_repetition_failure(exc, run_id, config.method, -1, config.seed)
            results = [
                RepetitionResult(repetition=i, seed=config.seed + i, method=config.method, dataset=dataset_label,
                                 status="failed", error=str(exc), error_type=type(exc).__name__)
                for i in range(config.repetitions)
            ]
        else:
            dataset_label = problem.dataset.name
            write_json(out_dir / "problem.json", {"dataset": problem.dataset.provenance, "noise": problem.noise,
                                                  "clipped_count": problem.dataset.clipped_count})
            jobs = [(problem, config, i, out_dir, run_id) for i in range(config.repetitions)]
            if workers > 1 and config.repetitions > 1:
                with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker) as pool:
                    results = list(pool.map(_repetition_job, jobs))
            else:
                results = [_repetition_job(job) for job in jobs]

        summary = summarize(results, config.method, dataset_label)
        atomic_write_text(out_dir / "summary.json", summary.model_dump_json(indent=2) + "\n")
        atomic_write_text(out_dir / "summary.txt", render_summary(summary))
        code = exit_code_for(summary)
        logger.info("run_finished", n_ok=summary.n_ok, n_failed=summary.n_failed, exit_code=code)
    return summary, code
