"""Main entry point for power-ch."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .baselines import jump_hash, mod_hash
from .bench import MIN_KEYS, MIN_REPS, run_benchmark
from .config import ToolkitConfig, parse_int_list
from .mixers import MASK64, key_from_string, premix
from .power_hash import f_hash, power_hash
from .rehash import AvailabilityView, simulate_rehash
from .reporting import (
    Table,
    bench_table,
    bench_text,
    consistency_table,
    distribution_table,
    histogram_table,
    iteration_table,
    probe_histogram_table,
    rehash_table,
    remap_sample_table,
    remap_table,
    write_output,
)
from .verify import (
    check_g_monotonicity,
    check_monotonicity,
    check_uniformity,
    check_weighted_g,
    measure_g_iterations,
    measure_remap,
)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

LOOKUPS: Dict[str, Callable[[int, int], int]] = {
    "power": power_hash,
    "jump": jump_hash,
    "mod": mod_hash,
    "f": f_hash,
}

DEFAULT_UNIFORMITY_BUCKETS = "2,3,11,16,100,257,1000"
DEFAULT_ITERATION_BUCKETS = "11,1001,1048577"


def _u64(text: str) -> int:
    """argparse type for 64-bit unsigned integers (decimal or 0x-prefixed)."""
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= value <= MASK64:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 2^64 - 1]")
    return value


def _int_list(text: str) -> List[int]:
    try:
        return parse_int_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _name_list(text: str) -> List[str]:
    return [part for part in text.replace(" ", "").split(",") if part]


class CommandContext:
    """Resolved configuration plus output handling for one command run."""

    def __init__(self, config: ToolkitConfig, args: argparse.Namespace):
        self.config = config
        self.args = args
        self.fmt = getattr(args, "format", "table")

    def emit(self, tables: Sequence[Table], csv_name: str, text: Optional[str] = None):
        """
        Print tables to stdout in the chosen format and write CSV of the first
        table to --out (or out_dir/csv_name when configured).
        """
        if text is None:
            shown = tables[:1] if self.fmt == "csv" else tables
            text = "\n".join(t.render(self.fmt) for t in shown)
        sys.stdout.write(text)
        sys.stdout.flush()

        out = getattr(self.args, "out", None) or self.config.output_path(csv_name)
        if out is not None:
            write_output(tables[0].to_csv(), out)


def cmd_lookup(ctx: CommandContext) -> int:
    args = ctx.args
    premixed = ctx.config.premix if args.premix is None else args.premix
    if args.key_string is not None:
        key = key_from_string(args.key_string, premixed=premixed)
    else:
        key = premix(args.key, premixed)
    bucket = LOOKUPS[args.algorithm](key, args.buckets)
    logger.debug(f"{args.algorithm}: key={key:#018x} n={args.buckets} -> {bucket}")
    print(bucket)
    return EXIT_PASS


def _verify_uniformity(ctx: CommandContext) -> bool:
    args, config = ctx.args, ctx.config
    reports = [
        check_uniformity(
            name, n, args.samples, config.seed, config.alpha, config.premix, config.chunk_size, config.workers
        )
        for name in args.algorithms
        for n in args.buckets
    ]
    tables = [distribution_table(reports)]
    if args.histogram:
        tables.extend(histogram_table(r) for r in reports)
    ctx.emit(tables, "uniformity.csv")
    return all(r.passed for r in reports)


def _verify_weighted(ctx: CommandContext) -> bool:
    args, config = ctx.args, ctx.config
    report = check_weighted_g(
        args.buckets, args.start, args.samples, config.seed, config.alpha, config.premix,
        config.chunk_size, config.workers,
    )
    ctx.emit([distribution_table([report]), histogram_table(report)], "weighted.csv")
    return report.passed


def _verify_monotonicity(ctx: CommandContext) -> bool:
    args, config = ctx.args, ctx.config
    reports = []
    for name in args.algorithms:
        if name == "g":
            reports.append(
                check_g_monotonicity(args.max_buckets, args.keys, config.seed, triples=args.pairs, premixed=config.premix)
            )
        else:
            reports.append(
                check_monotonicity(
                    name, args.max_buckets, args.keys, config.seed, pairs=args.pairs,
                    pair_n_max=args.pair_max_buckets, premixed=config.premix, pow2=args.pow2 or name == "f",
                )
            )
    ctx.emit([consistency_table(reports)], "monotonicity.csv")
    for r in reports:
        if r.first_violation is not None:
            logger.error(f"{r.algorithm} {r.property_name}: first violation {r.first_violation}")
    return all(r.passed for r in reports)


def _verify_remap(ctx: CommandContext) -> bool:
    args, config = ctx.args, ctx.config
    reports = [
        measure_remap(
            name, args.n_from, args.n_to, args.keys, config.seed, config.premix,
            sample_size=args.sample, chunk_size=config.chunk_size, workers=config.workers,
        )
        for name in args.algorithms
    ]
    tables = [remap_table(reports)]
    if args.sample:
        tables.extend(remap_sample_table(r) for r in reports)
    ctx.emit(tables, "remap.csv")
    return all(r.passed for r in reports)


def _verify_iterations(ctx: CommandContext) -> bool:
    args, config = ctx.args, ctx.config
    report = measure_g_iterations(args.buckets, args.keys, config.seed, config.premix, config.chunk_size, config.workers)
    ctx.emit([iteration_table(report)], "iterations.csv")
    logger.info(f"Mean pass count spread across n: {report.mean_spread:.4f}")
    return report.passed


VERIFY_SUITES: Dict[str, Callable[[CommandContext], bool]] = {
    "uniformity": _verify_uniformity,
    "weighted": _verify_weighted,
    "monotonicity": _verify_monotonicity,
    "remap": _verify_remap,
    "iterations": _verify_iterations,
}


def cmd_verify(ctx: CommandContext) -> int:
    suite = ctx.args.suite
    logger.info(f"Running {suite} suite (seed={ctx.config.seed}, alpha={ctx.config.alpha})")
    passed = VERIFY_SUITES[suite](ctx)
    logger.info(f"{suite}: {'PASS' if passed else 'FAIL'}")
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_bench(ctx: CommandContext) -> int:
    config = ctx.config
    if config.bench_keys < MIN_KEYS:
        raise ValueError(f"--keys must be >= {MIN_KEYS} per point, got {config.bench_keys}")
    if config.bench_reps < MIN_REPS:
        raise ValueError(f"--reps must be >= {MIN_REPS}, got {config.bench_reps}")
    report = run_benchmark(
        algorithms=ctx.args.algorithms,
        buckets=config.bench_buckets,
        keys=config.bench_keys,
        reps=config.bench_reps,
        warmup=config.bench_warmup,
        seed=config.seed,
    )
    logger.debug(f"Benchmark checksum {report.checksum:#018x}")
    table = bench_table(report)
    ctx.emit([table], "bench.csv", text=None if ctx.fmt == "csv" else bench_text(report))
    return EXIT_PASS


def _build_view(args: argparse.Namespace, seed: int) -> AvailabilityView:
    if args.bitmap is not None:
        loaded = AvailabilityView.from_file(args.bitmap)
        if args.buckets is not None and args.buckets != loaded.n:
            raise ValueError(f"bitmap has {loaded.n} buckets but --buckets is {args.buckets}")
        # fallback set: the highest available ids
        available = np.flatnonzero(loaded.bitmap)
        if args.fallback_size > available.size:
            raise ValueError(f"fallback size {args.fallback_size} exceeds {available.size} available buckets")
        fallback = available[available.size - args.fallback_size:].tolist()
        return AvailabilityView.from_bitmap(loaded.bitmap, fallback)
    if args.buckets is None:
        raise ValueError("rehash-sim needs --buckets or --bitmap")
    return AvailabilityView.with_unavailable_fraction(args.buckets, args.unavailable_fraction, args.fallback_size, seed)


def cmd_rehash_sim(ctx: CommandContext) -> int:
    args, config = ctx.args, ctx.config
    if (args.shed_fraction is None) != (args.overloaded is None):
        raise ValueError("--shed-fraction and --overloaded must be given together")
    view = _build_view(args, config.seed)
    report = simulate_rehash(
        view,
        args.keys,
        seed=config.seed,
        max_probes=config.max_probes,
        premixed=config.premix,
        toggle=args.toggle,
        shed_fraction=args.shed_fraction,
        overloaded=args.overloaded,
    )
    ctx.emit([rehash_table(report), probe_histogram_table(report)], "rehash.csv")
    if not report.passed:
        logger.error(f"{report.invalid} keys landed on unavailable buckets")
    return EXIT_PASS if report.passed else EXIT_FAIL


COMMANDS: Dict[str, Callable[[CommandContext], int]] = {
    "lookup": cmd_lookup,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "rehash-sim": cmd_rehash_sim,
}


def _add_output_args(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=_u64, help="Key sample seed (default: 0)")
    parser.add_argument("--out", type=Path, help="Write CSV results to this path")
    parser.add_argument(
        "--format",
        choices=["csv", "table"],
        default="table",
        help="Stdout format (default: table)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="power-ch",
        description="power-ch - Power consistent hashing lookups, verification and benchmarks",
    )
    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Enable verbose logging",
    )
    parser.add_argument(
        "--env-file",
        type=Path,
        help="Load POWERCH_* settings from this .env file",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    # lookup
    lookup = commands.add_parser("lookup", help="Map one key to a bucket")
    key = lookup.add_mutually_exclusive_group(required=True)
    key.add_argument("--key", type=_u64, help="64-bit integer key")
    key.add_argument("--key-string", help="String key (FNV-1a 64 over UTF-8)")
    lookup.add_argument("--buckets", type=int, required=True, help="Bucket count n")
    lookup.add_argument("--algorithm", choices=sorted(LOOKUPS), default="power", help="Hash algorithm (default: power)")
    lookup.add_argument(
        "--premix",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="Pass the key through mix64 first (default: on)",
    )

    # verify
    verify = commands.add_parser("verify", help="Run a property-verification suite")
    suites = verify.add_subparsers(dest="suite", required=True)

    uniformity = suites.add_parser("uniformity", help="Chi-square uniformity over [0, n-1]")
    uniformity.add_argument("--algorithms", type=_name_list, default=["power"], help="Comma list (default: power)")
    uniformity.add_argument(
        "--buckets", type=_int_list, default=parse_int_list(DEFAULT_UNIFORMITY_BUCKETS),
        help=f"Bucket counts (default: {DEFAULT_UNIFORMITY_BUCKETS})",
    )
    uniformity.add_argument("--samples", type=int, default=1_000_000, help="Keys per bucket count (default: 1000000)")
    uniformity.add_argument("--histogram", action="store_true", help="Also print per-bucket frequencies")

    weighted = suites.add_parser("weighted", help="Chi-square of Algorithm-g against its weighted distribution")
    weighted.add_argument("--buckets", type=int, default=11, help="Bucket count n (default: 11)")
    weighted.add_argument("--start", type=int, default=7, help="Lowest result s (default: 7)")
    weighted.add_argument("--samples", type=int, default=1_000_000, help="Keys (default: 1000000)")

    mono = suites.add_parser("monotonicity", help="Exact minimal-remapping check")
    mono.add_argument("--algorithms", type=_name_list, default=["power"], help="Comma list, g included (default: power)")
    mono.add_argument("--max-buckets", type=int, default=256, help="Check every n -> n+1 below this (default: 256)")
    mono.add_argument("--keys", type=int, default=100_000, help="Keys per transition (default: 100000)")
    mono.add_argument("--pairs", type=int, default=10_000, help="Random (n1, n2) pairs (default: 10000)")
    mono.add_argument("--pair-max-buckets", type=int, default=1_000_000, help="Largest n1 for pairs (default: 1000000)")
    mono.add_argument("--pow2", action="store_true", help="Only power-of-two bucket counts (implied for f)")

    remap = suites.add_parser("remap", help="Moved-key fraction for a bucket-count change")
    remap.add_argument("--algorithms", type=_name_list, default=["power"], help="Comma list (default: power)")
    remap.add_argument("--from", dest="n_from", type=int, default=100, help="Old bucket count (default: 100)")
    remap.add_argument("--to", dest="n_to", type=int, default=101, help="New bucket count (default: 101)")
    remap.add_argument("--keys", type=int, default=1_000_000, help="Keys (default: 1000000)")
    remap.add_argument("--sample", type=int, default=6, help="Sample keys to list (default: 6)")

    iterations = suites.add_parser("iterations", help="Algorithm-g pass counts from the lookup")
    iterations.add_argument(
        "--buckets", type=_int_list, default=parse_int_list(DEFAULT_ITERATION_BUCKETS),
        help=f"Non-power-of-two bucket counts (default: {DEFAULT_ITERATION_BUCKETS})",
    )
    iterations.add_argument("--keys", type=int, default=1_000_000, help="Keys per bucket count (default: 1000000)")

    for suite in (uniformity, weighted, mono, remap, iterations):
        _add_output_args(suite)
        suite.add_argument("--alpha", type=float, help="Significance level (default: 0.001)")
        suite.add_argument("--workers", type=int, help="Sampling threads (default: 1)")

    # bench
    bench = commands.add_parser("bench", help="Lookup latency vs bucket count")
    bench.add_argument("--algorithms", type=_name_list, default=["power", "jump", "mod"], help="Comma list (default: power,jump,mod)")
    bench.add_argument("--buckets-list", type=_int_list, help="Bucket counts (default: 2^4,2^8,...,2^24)")
    bench.add_argument("--keys", type=int, help=f"Lookups per timed run, >= {MIN_KEYS}")
    bench.add_argument("--reps", type=int, help=f"Timed runs per point, >= {MIN_REPS}")
    bench.add_argument("--warmup", type=int, help="Untimed lookups before each point (default: 10000)")
    _add_output_args(bench)

    # rehash-sim
    sim = commands.add_parser("rehash-sim", help="Failure-injection rehash simulation")
    sim.add_argument("--buckets", type=int, help="Bucket count n")
    source = sim.add_mutually_exclusive_group()
    source.add_argument("--unavailable-fraction", type=float, default=0.0, help="Fraction of buckets marked down")
    source.add_argument("--bitmap", type=Path, help="File of 0/1 characters, one per bucket")
    sim.add_argument("--max-probes", type=int, help="Probe limit before fallback (default: 8)")
    sim.add_argument("--fallback-size", type=int, default=1, help="Reserved fallback buckets (default: 1)")
    sim.add_argument("--keys", type=int, default=1_000_000, help="Keys (default: 1000000)")
    sim.add_argument("--toggle", type=int, help="Count keys moved by also marking this bucket down")
    sim.add_argument("--shed-fraction", type=float, help="Fraction of the overloaded bucket's keys to shed")
    sim.add_argument("--overloaded", type=int, help="Overloaded bucket id")
    _add_output_args(sim)

    return parser


def apply_overrides(config: ToolkitConfig, args: argparse.Namespace) -> ToolkitConfig:
    """Override config with CLI arguments that were given."""
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "alpha", None) is not None:
        config.alpha = args.alpha
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    if getattr(args, "max_probes", None) is not None:
        config.max_probes = args.max_probes
    if args.command == "bench":
        if args.keys is not None:
            config.bench_keys = args.keys
        if args.reps is not None:
            config.bench_reps = args.reps
        if args.warmup is not None:
            config.bench_warmup = args.warmup
        if args.buckets_list is not None:
            config.bench_buckets = args.buckets_list
    config.verbose = args.verbose
    return config.validate()


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASS

    # Set up logging
    log_level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(
        level=log_level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    try:
        config = apply_overrides(ToolkitConfig.from_env(args.env_file), args)
        return COMMANDS[args.command](CommandContext(config, args))
    except (ValueError, OSError) as e:
        logger.error(str(e))
        return EXIT_USAGE


def main():
    """CLI entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
