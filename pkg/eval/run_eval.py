#!/usr/bin/env python3
"""
Posterior-exploration eval harness.

Runs the scaled-down behavioral checks on small problems and scores them
against fixed thresholds:

    synthetic_cover   RRT+ONVI covering number > 1 at 0.01 deg on the
                      60x60 two-NMF toy (Uniform noise); HMC+ONVI and
                      NVI(M=10) cover with a single ball. Must hold for
                      >= 4 of 5 seeds.
    elbo_dominance    On a 30x40 random matrix, R=3, Gaussian noise at the
                      empirical level: mean RRT+ONVI ELBO >= the best of
                      NVI(M=4), NVI(M=10), Gibbs+ONVI, HMC+ONVI minus
                      1e-3 * |mean|.
    gaussian_collapse RRT+ONVI under Gaussian noise keeps exactly one
                      component on both datasets, every seed.

Usage:
    python eval/run_eval.py
    python eval/run_eval.py --checks synthetic_cover --samples 2000
    python eval/run_eval.py --keep results/eval

Every run writes its normal output tree, so a failing check can be
inspected with ``python -m app report <dir>``.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

# Thresholds per check.
THRESHOLDS = {
    "synthetic_cover": 4,  # seeds out of SEEDS
    "elbo_dominance": 1e-3,  # relative slack
    "gaussian_collapse": 1,  # components
}

SEEDS = 5
COVER_EPSILON_DEG = 0.01


# --------------------------------------------------------------------------- #
# Run helpers
# --------------------------------------------------------------------------- #
@dataclass
class EvalContext:
    root: Path
    samples: int
    rrt_proposals: int
    workers: int
    _random_path: Optional[Path] = None

    def random_matrix(self) -> Path:
        """30 x 40 nonnegative matrix with entries uniform on [0, 1), fixed seed."""
        if self._random_path is None:
            from app.services.storage import save_matrix

            self._random_path = self.root / "data" / "random_30x40.csv"
            save_matrix(self._random_path, np.random.default_rng(2024).uniform(size=(30, 40)))
        return self._random_path


def _config(ctx: EvalContext, dataset: Dict, R: int, likelihood: str, method: str, **sections):
    from app.models.run_config import RunConfig

    payload = {
        "dataset": dataset,
        "R": R,
        "likelihood": {"kind": likelihood},
        "method": method,
        "repetitions": SEEDS,
        "seed": 0,
        "workers": ctx.workers,
        "sampler": {"n_samples": ctx.samples},
        "rrt": {"max_onvi_components": ctx.rrt_proposals, "max_failed_attempts": 2000},
    }
    for key, value in sections.items():
        payload.setdefault(key, {}).update(value)
    return RunConfig.model_validate(payload)


def _run(ctx: EvalContext, label: str, config) -> List:
    """Run config into root/label and return the per-repetition results."""
    from app.models.run_report import RepetitionResult
    from app.services.experiment import run
    from app.services.experiment.runner import repetition_dir
    from app.services.storage import read_json

    out_dir = ctx.root / label
    run(config, out_dir, workers=ctx.workers)
    return [
        RepetitionResult.model_validate(read_json(repetition_dir(out_dir, i) / "result.json"))
        for i in range(config.repetitions)
    ]


def _synthetic(D: int = 60, N: int = 60) -> Dict:
    return {"synthetic": {"D": D, "N": N}, "name": f"two_nmf_toy_{D}x{N}"}


# --------------------------------------------------------------------------- #
# Checks
# --------------------------------------------------------------------------- #
@dataclass
class CheckScore:
    name: str
    passed: bool = False
    lines: List[str] = field(default_factory=list)
    errors: int = 0


def check_synthetic_cover(ctx: EvalContext) -> CheckScore:
    score = CheckScore("synthetic_cover")
    data = _synthetic()
    rrt = _run(ctx, "synthetic_uniform_rrt", _config(ctx, data, 3, "uniform", "rrt_onvi"))
    hmc = _run(ctx, "synthetic_uniform_hmc", _config(ctx, data, 3, "uniform", "hmc_onvi"))
    nvi = _run(ctx, "synthetic_uniform_nvi10", _config(ctx, data, 3, "uniform", "nvi", nvi={"M": 10}))

    good = 0
    for r, h, n in zip(rrt, hmc, nvi):
        failed = [x for x in (r, h, n) if x.status != "ok"]
        if failed:
            score.errors += len(failed)
            score.lines.append(f"[seed {r.seed}] failed: " + ", ".join(f"{x.method}: {x.error}" for x in failed))
            continue
        ok = r.cover_at_001 > 1 and h.cover_at_001 == 1 and n.cover_at_001 == 1
        good += ok
        score.lines.append(f"[seed {r.seed}] cover@{COVER_EPSILON_DEG}: rrt={r.cover_at_001} "
                           f"(components {r.n_components}) hmc={h.cover_at_001} nvi10={n.cover_at_001}"
                           f"{'' if ok else '  <- miss'}")
    score.passed = good >= THRESHOLDS["synthetic_cover"]
    score.lines.insert(0, f"{good}/{SEEDS} seeds satisfy the cover split (need {THRESHOLDS['synthetic_cover']})")
    return score


def _mean_elbo(results: List) -> Optional[float]:
    values = [r.elbo for r in results if r.status == "ok" and r.elbo is not None]
    return float(np.mean(values)) if len(values) == len(results) else None


def check_elbo_dominance(ctx: EvalContext) -> CheckScore:
    score = CheckScore("elbo_dominance")
    data = {"path": str(ctx.random_matrix()), "name": "random_30x40"}
    runs = {
        "rrt_onvi": _config(ctx, data, 3, "gaussian", "rrt_onvi"),
        "nvi4": _config(ctx, data, 3, "gaussian", "nvi", nvi={"M": 4}),
        "nvi10": _config(ctx, data, 3, "gaussian", "nvi", nvi={"M": 10}),
        "gibbs_onvi": _config(ctx, data, 3, "gaussian", "gibbs_onvi"),
        "hmc_onvi": _config(ctx, data, 3, "gaussian", "hmc_onvi"),
    }
    means = {}
    for label, config in runs.items():
        means[label] = _mean_elbo(_run(ctx, f"random_gaussian_{label}", config))
        score.lines.append(f"{label:<12} mean ELBO {means[label] if means[label] is not None else 'FAILED'}")
    if any(v is None for v in means.values()):
        score.errors += 1
        return score
    best_other = max(v for k, v in means.items() if k != "rrt_onvi")
    slack = THRESHOLDS["elbo_dominance"] * abs(means["rrt_onvi"])
    score.passed = means["rrt_onvi"] >= best_other - slack
    score.lines.insert(0, f"rrt_onvi {means['rrt_onvi']:.6g} vs best other {best_other:.6g} (slack {slack:.3g})")
    return score


def check_gaussian_collapse(ctx: EvalContext) -> CheckScore:
    score = CheckScore("gaussian_collapse", passed=True)
    datasets = {
        "synthetic": _synthetic(),
        "random": {"path": str(ctx.random_matrix()), "name": "random_30x40"},
    }
    for label, data in datasets.items():
        R = 3
        for r in _run(ctx, f"{label}_gaussian_rrt", _config(ctx, data, R, "gaussian", "rrt_onvi")):
            ok = r.status == "ok" and r.n_components == THRESHOLDS["gaussian_collapse"]
            score.passed = score.passed and ok
            if r.status != "ok":
                score.errors += 1
            score.lines.append(f"[{label} seed {r.seed}] components={r.n_components}{'' if ok else '  <- miss'}")
    return score


CHECKS: Dict[str, Callable[[EvalContext], CheckScore]] = {
    "synthetic_cover": check_synthetic_cover,
    "elbo_dominance": check_elbo_dominance,
    "gaussian_collapse": check_gaussian_collapse,
}


# --------------------------------------------------------------------------- #
# Main
# --------------------------------------------------------------------------- #
def main() -> int:
    ap = argparse.ArgumentParser(description="Posterior-exploration eval harness")
    ap.add_argument("--checks", default=",".join(CHECKS), help=f"comma-separated subset of: {','.join(CHECKS)}")
    ap.add_argument("--samples", type=int, default=2000, help="chain length for Gibbs/HMC runs")
    ap.add_argument("--rrt-proposals", type=int, default=500, help="ONVI proposal cap for RRT runs")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--keep", type=Path, default=None, help="write run trees here instead of a temp dir")
    args = ap.parse_args()

    from app.services.monitoring import setup_logging

    setup_logging(level="WARNING")
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        print(f"ERROR: unknown checks: {', '.join(unknown)}", file=sys.stderr)
        return 2

    with tempfile.TemporaryDirectory(prefix="nmf-eval-") as tmp:
        root = args.keep or Path(tmp)
        ctx = EvalContext(root, args.samples, args.rrt_proposals, args.workers)
        scores = []
        for name in checks:
            try:
                scores.append(CHECKS[name](ctx))
            except Exception as exc:  # noqa: BLE001 - eval keeps going on per-check error
                scores.append(CheckScore(name, errors=1, lines=[f"ERROR: {type(exc).__name__}: {exc}"]))

    # ---- Report ----
    print("\n" + "=" * 72)
    print(f"POSTERIOR EVAL  ({SEEDS} seeds)  samples={args.samples} rrt_proposals={args.rrt_proposals}")
    print("=" * 72)
    for s in scores:
        print(f"\n[{'PASS' if s.passed else 'FAIL'}] {s.name}")
        if s.errors:
            print(f"        errors: {s.errors}")
        for line in s.lines:
            print(f"        - {line}")

    all_passed = all(s.passed for s in scores)
    print("\n" + "=" * 72)
    print("RESULT:", "ALL GREEN" if all_passed else "BELOW THRESHOLD")
    print("=" * 72)
    return 0 if all_passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
