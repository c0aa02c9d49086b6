"""
Command-line harness.

    python -m app explore --config runs/toy.cfg --out results/toy_rrt
    python -m app sample --sampler hmc --override dataset.path=data/X.csv --override R=3
    python -m app report results/

Pipeline subcommands (solve, nvi, sample, explore) share --config, --out,
--seed, --workers and repeatable --override key=value flags and run every
repetition through the experiment runner.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import structlog

from app.config import settings
from app.services.coverage import greedy_cover, pairwise_wad, persistence_curve
from app.services.datasets import MatrixFormatError, gen_two_nmf_toy, load_factorizations, save_dataset
from app.services.experiment import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_TOTAL_FAILURE,
    ConfigError,
    build_dataset,
    load_run_config,
    run,
    write_report,
)
from app.services.monitoring import init_sentry, setup_logging
from app.services.nmf_solve import truncated_svd
from app.services.storage import atomic_write_text, save_matrix

logger = structlog.get_logger(__name__)

PIPELINE_METHODS = {"solve": "lin_restarts", "nvi": "nvi", "explore": "rrt_onvi"}


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="Flat dotted key = value run config")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--seed", type=int, default=None, help="Base seed (repetition i uses seed + i)")
    parser.add_argument("--workers", type=int, default=None, help="Parallel repetitions")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="Config override, applied after --config (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m app", description="Bayesian NMF posterior exploration")
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("solve", "Lin projected-gradient restarts fed to online NVI"),
        ("nvi", "Batch NVI with M components"),
        ("explore", "RRT exploration fed to online NVI"),
    ]:
        _add_run_flags(sub.add_parser(name, help=help_text))

    sample = sub.add_parser("sample", help="Gibbs or HMC chain, optionally fed to online NVI")
    _add_run_flags(sample)
    sample.add_argument("--sampler", choices=["gibbs", "hmc"], default="hmc")
    sample.add_argument("--no-onvi", action="store_true", help="Keep a thinned trace instead of an ONVI mixture")

    svd = sub.add_parser("svd", help="Truncated SVD of the configured dataset")
    _add_run_flags(svd)

    metrics = sub.add_parser("metrics", help="WAD, covering number or persistence over saved factorizations")
    metrics.add_argument("kind", choices=["wad", "cover", "persistence"])
    metrics.add_argument("directory", type=Path, help="Directory of <name>.A.csv / <name>.W.csv pairs")
    metrics.add_argument("--epsilon", type=float, default=0.01, help="Angle in degrees for 'cover'")
    metrics.add_argument("--normalization", choices=["l1", "l2"], default="l1")
    metrics.add_argument("--out", type=Path, default=None, help="CSV output (default: stdout)")

    gen = sub.add_parser("gen", help="Generate the two-NMF synthetic dataset")
    gen.add_argument("--D", type=int, default=500)
    gen.add_argument("--N", type=int, default=500)
    gen.add_argument("--noise-eps", type=float, default=0.01)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)

    report = sub.add_parser("report", help="Summarize every run under a directory")
    report.add_argument("run_dir", type=Path)

    serve = sub.add_parser("serve", help="Read-only HTTP browser over a results directory")
    serve.add_argument("--results-dir", type=Path, default=None)
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    return parser


def _overrides(args: argparse.Namespace, method: Optional[str] = None) -> List[str]:
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if method is not None:
        overrides.append(f"method={method}")
    if getattr(args, "no_onvi", False):
        overrides.append("sampler.onvi=false")
    return overrides


def _run_pipeline(args: argparse.Namespace, method: str) -> int:
    config = load_run_config(args.config, _overrides(args, method))
    out_dir = args.out or Path(settings.results_dir) / method
    init_sentry()
    summary, code = run(config, out_dir)
    print(f"{summary.method}: {summary.n_ok}/{summary.repetitions} repetitions ok -> {out_dir}")
    return code


def _svd(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, _overrides(args))
    dataset = build_dataset(config)
    pair = truncated_svd(dataset.X, config.R)
    out_dir = args.out or Path(settings.results_dir) / "svd"
    save_matrix(out_dir / "A_svd.csv", pair.A_svd)
    save_matrix(out_dir / "W_svd.csv", pair.W_svd)
    save_matrix(out_dir / "singular_values.csv", pair.singular_values[None, :])
    print(f"rank {config.R} SVD of {dataset.name} -> {out_dir}")
    return EXIT_OK


def _metrics(args: argparse.Namespace) -> int:
    factorizations = load_factorizations(args.directory)
    if not factorizations:
        print(f"no <name>.A.csv / <name>.W.csv pairs in {args.directory}", file=sys.stderr)
        return EXIT_TOTAL_FAILURE
    names = list(factorizations)
    samples = [factorizations[n] for n in names]
    distances = pairwise_wad(samples, args.normalization)

    if args.kind == "wad":
        rows = ["name," + ",".join(names)]
        rows += [f"{n}," + ",".join("%.17g" % v for v in distances[i]) for i, n in enumerate(names)]
        text = "\n".join(rows) + "\n"
    elif args.kind == "cover":
        text = f"epsilon_degrees,covering_number\n{args.epsilon!r},{greedy_cover(distances, args.epsilon)}\n"
    else:
        curve = persistence_curve(samples, distances=distances)
        text = curve.to_frame().to_csv(index=False, float_format="%.17g")

    if args.out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(args.out, text)
    return EXIT_OK


def _gen(args: argparse.Namespace) -> int:
    dataset = gen_two_nmf_toy(args.D, args.N, args.noise_eps, args.seed)
    save_dataset(dataset, args.out)
    print(f"two-NMF toy {args.D}x{args.N} (embedded WAD "
          f"{dataset.provenance['embedded_wad_deg']:.3f} deg) -> {args.out}")
    return EXIT_OK


def _report(args: argparse.Namespace) -> int:
    report, text = write_report(args.run_dir)
    sys.stdout.write(text)
    return report.exit_code


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    if args.results_dir is not None:
        settings.results_dir = args.results_dir
    uvicorn.run("app.main:app", host=args.host or settings.api_host, port=args.port or settings.api_port)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)
    try:
        if args.command in PIPELINE_METHODS:
            return _run_pipeline(args, PIPELINE_METHODS[args.command])
        if args.command == "sample":
            return _run_pipeline(args, f"{args.sampler}_onvi")
        handlers = {"svd": _svd, "metrics": _metrics, "gen": _gen, "report": _report, "serve": _serve}
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (MatrixFormatError, FileNotFoundError) as exc:
        logger.error("input_error", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOTAL_FAILURE
