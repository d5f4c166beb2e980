import argparse
import os
import sys
import traceback
from pathlib import Path

from dotenv import load_dotenv

from ocleval.blind_calibration import DEFAULT_K_GRID, calibrate_shift
from ocleval.budget_harness import load_source, run_experiment, run_sweep, sampler_training_grid
from ocleval.config import StreamSource, config_to_dict, parse_axis, parse_config
from ocleval.errors import ConfigError, OclEvalError
from ocleval.reports import (
    collect_summaries,
    emit_calibration,
    emit_reports,
    emit_sweep,
    write_comparison,
)
from ocleval.run_logger import initialize_run_logger
from ocleval.stream_model import save_stream
from ocleval.synthetic_stream import generate, make_spec

EXIT_RUNTIME_ERROR = 4


def print_welcome():
    """Print welcome message with usage information."""
    print("📊 ocleval - Online Continual Learning Evaluation")
    print("=" * 50)
    print()
    print("Evaluate online learners on bursty streams with near-future")
    print("accuracy, calibrate the evaluation shift with a blind classifier,")
    print("and compare samplers and budgets in sweeps.")
    print()
    print("📋 USAGE:")
    print("  python main.py gen --classes 50 --dim 16 --length 50000 --out data/")
    print("  python main.py calibrate --features data/features.bin --labels data/labels.jsonl --out cal/")
    print("  python main.py run experiment.json --out runs/er")
    print("  python main.py sweep experiment.json --axis learner.learning_rate=0.0005,0.005,0.05")
    print("  python main.py report runs/ --out runs/comparison.csv")
    print()
    print("🔧 COMMAND LINE OPTIONS:")
    print("  -v, --verbose       Show full tracebacks on errors")
    print("  -d, --debug         Write effective configs and step traces to debug-logs/")
    print("  -h, --help          Show detailed help message")
    print("=" * 50)


def _int_list(text: str):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}")


def cmd_gen(args) -> None:
    spec = make_spec(args.classes, args.dim, args.length, args.burst_length, args.law,
                     args.sigma, args.drift, args.seed)
    print(f"🔧 Generating {spec.length} samples, C={spec.num_classes}, d={spec.feature_dim}...")
    stream = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_stream(stream, out / "features.bin", out / "labels.jsonl")
    print(f"✅ Stream written to: {out}")


def cmd_calibrate(args) -> None:
    if args.config:
        source = parse_config(args.config).stream
    else:
        if not (args.features and args.labels):
            raise ConfigError("calibrate needs --features and --labels, or --config")
        source = StreamSource(features=args.features, labels=args.labels)
    stream = load_source(source)

    k_grid = _int_list(args.k_grid) if args.k_grid else list(DEFAULT_K_GRID)
    shifts = _int_list(args.shifts) if args.shifts else None
    print(f"🔧 Calibrating shift on {stream.length} samples, K grid {k_grid}...")
    result = calibrate_shift(stream, k_grid, shifts, args.epsilon, max_workers=args.workers)
    for warning in result.warnings:
        print(f"⚠️  Warning: {warning}")
    emit_calibration(result, args.out)
    print(f"✅ s* = {result.s_star} (plateau {result.plateau_level:.4f}); results in {args.out}")


def cmd_run(args) -> None:
    cfg = parse_config(args.config)
    out = args.out or cfg.output_dir or "runs/latest"
    print(f"🔧 Running {cfg.learner.kind} with {cfg.sampler.value} replay, "
          f"B={cfg.protocol.batch_size}, S={cfg.protocol.shift}...")
    records, retention, summary = run_experiment(cfg)
    emit_reports(records, retention, summary, out, config_to_dict(cfg))
    print(f"✅ near-future accuracy {_fmt(summary.near_future_accuracy)}, "
          f"online {_fmt(summary.online_accuracy)}, bwt@T {_fmt(summary.bwt_at_T)}")
    print(f"📁 Results written to: {out}")


def cmd_sweep(args) -> None:
    cfg = parse_config(args.config)
    axes = {}
    if args.sampler_training_grid:
        axes.update(sampler_training_grid(cfg))
    for spec in args.axis or []:
        key, values = parse_axis(spec)
        axes[key] = values
    if not axes:
        raise ConfigError("sweep needs --axis or --sampler-training-grid")

    workers = args.workers or int(os.getenv("OCLEVAL_SWEEP_WORKERS", "1"))
    out = args.out or cfg.output_dir or "runs/sweep"
    print(f"🔧 Sweeping {', '.join(axes)} with {workers} worker(s)...")
    outcomes = run_sweep(cfg, axes, max_workers=workers)
    emit_sweep(outcomes, out)
    failed = [o for o in outcomes if o.error]
    print(f"✅ {len(outcomes) - len(failed)} of {len(outcomes)} points completed")
    print(f"📁 Results written to: {out}")


def cmd_report(args) -> None:
    summaries = collect_summaries(args.run_dir)
    if not summaries:
        print(f"⚠️  Warning: no summary.json found under {args.run_dir}")
    out = args.out or str(Path(args.run_dir) / "comparison.csv")
    write_comparison(summaries, out)
    print(f"✅ Compared {len(summaries)} run(s): {out}")


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="ocleval - online continual learning evaluation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py gen --classes 50 --dim 16 --length 50000 --out data/
  python main.py run experiment.json
  python main.py sweep experiment.json --sampler-training-grid
        """
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="Enable verbose error reporting with full tracebacks")
    parser.add_argument("-d", "--debug", action="store_true",
                        help="Enable debug mode with run logging to debug-logs/")
    sub = parser.add_subparsers(dest="command")

    gen = sub.add_parser("gen", help="Generate a synthetic bursty stream")
    gen.add_argument("--classes", type=int, required=True, help="Number of classes C")
    gen.add_argument("--dim", type=int, required=True, help="Feature dimension d")
    gen.add_argument("--length", type=int, required=True, help="Number of samples N")
    gen.add_argument("--burst-length", type=float, default=16, help="Burst length L (mean for geometric)")
    gen.add_argument("--law", choices=["fixed", "geometric"], default="fixed")
    gen.add_argument("--sigma", type=float, default=0.0, help="Feature noise level")
    gen.add_argument("--drift", type=float, default=0.0, help="Prototype drift per burst")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="Output directory")
    gen.set_defaults(handler=cmd_gen)

    cal = sub.add_parser("calibrate", help="Select the evaluation shift with the blind classifier")
    cal.add_argument("--features", help="Binary feature file")
    cal.add_argument("--labels", help="JSON Lines label file")
    cal.add_argument("--config", help="Take the stream from an experiment config instead")
    cal.add_argument("--k-grid", help="Comma-separated context windows (default 1,2,...,128)")
    cal.add_argument("--shifts", help="Comma-separated shifts (default 0 and powers of two up to N/4)")
    cal.add_argument("--epsilon", type=float, default=0.01)
    cal.add_argument("--workers", type=int, default=None)
    cal.add_argument("--out", default="calibration", help="Output directory")
    cal.set_defaults(handler=cmd_calibrate)

    run = sub.add_parser("run", help="Run one experiment from a config file")
    run.add_argument("config", help="Experiment config (JSON)")
    run.add_argument("--out", help="Output directory (default: config output_dir)")
    run.set_defaults(handler=cmd_run)

    sweep = sub.add_parser("sweep", help="Run a parameter sweep around a config")
    sweep.add_argument("config", help="Base experiment config (JSON)")
    sweep.add_argument("--axis", action="append", help="Axis as key=v1,v2 (dotted key, repeatable)")
    sweep.add_argument("--sampler-training-grid", action="store_true",
                       help="Sweep {fifo, uniform, mixed} x {head, full}")
    sweep.add_argument("--workers", type=int, default=None,
                       help="Concurrent grid points (default OCLEVAL_SWEEP_WORKERS or 1)")
    sweep.add_argument("--out", help="Output directory")
    sweep.set_defaults(handler=cmd_sweep)

    report = sub.add_parser("report", help="Aggregate run summaries into a comparison CSV")
    report.add_argument("run_dir", help="Run or sweep directory to scan")
    report.add_argument("--out", help="CSV path (default: <run_dir>/comparison.csv)")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv=None):
    """
    Main entry point for ocleval.
    Parses the command line, dispatches the subcommand and maps errors to exit codes.
    """
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        print_welcome()
        return 0

    initialize_run_logger(enabled=args.debug)
    try:
        args.handler(args)
    except Exception as e:
        print(f"❌ Error: {e}")

        if args.verbose or args.debug:
            print("\n📋 Full traceback:")
            traceback.print_exc()

        if args.debug:
            print(f"\n🔍 Debug info:")
            print(f"  Python version: {sys.version}")
            print(f"  Working directory: {os.getcwd()}")
            print(f"  Command line args: {sys.argv}")

        code = e.exit_code if isinstance(e, OclEvalError) else EXIT_RUNTIME_ERROR
        sys.exit(code)
    return 0


if __name__ == "__main__":
    main()
