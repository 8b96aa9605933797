"""Lookup-latency benchmark: power consistent hash vs. jump consistent hash.

Each (algorithm, n) point times a batch of single-key lookups with a
monotonic nanosecond clock and reports total / count, repeated several
times. Keys come from a counter passed through mix64 so no two lookups in
a batch share a key. Every result is folded into an accumulator that is
returned with the report, so the lookups cannot be skipped.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .baselines import jump_hash, mod_hash
from .mixers import sample_keys
from .power_hash import check_bucket_count, power_hash

logger = logging.getLogger(__name__)

BENCH_ALGORITHMS: Dict[str, Callable[[int, int], int]] = {
    "power": power_hash,
    "jump": jump_hash,
    "mod": mod_hash,
}

DEFAULT_BUCKETS = [1 << 4, 1 << 8, 1 << 12, 1 << 16, 1 << 20, 1 << 24]
MIN_KEYS = 100_000
MIN_REPS = 5


@dataclass
class BenchPoint:
    algorithm: str
    n: int
    mean_ns: float
    stddev_ns: float
    reps: int


@dataclass
class BenchReport:
    """Per-(algorithm, n) mean lookup latency in nanoseconds."""

    algorithms: List[str]
    buckets: List[int]
    keys_per_run: int
    warmup: int
    points: List[BenchPoint] = field(default_factory=list)
    checksum: int = 0

    def point(self, algorithm: str, n: int) -> BenchPoint:
        for p in self.points:
            if p.algorithm == algorithm and p.n == n:
                return p
        raise KeyError(f"no benchmark point for {algorithm} at n={n}")

    def ratio(self, algorithm: str, n_high: int, n_low: int) -> float:
        """Latency at n_high divided by latency at n_low."""
        return self.point(algorithm, n_high).mean_ns / self.point(algorithm, n_low).mean_ns


def time_batch(lookup: Callable[[int, int], int], keys: Sequence[int], n: int) -> tuple:
    """
    Time one pass over keys.

    Returns:
        (nanoseconds per lookup, xor of all results)
    """
    acc = 0
    start = time.perf_counter_ns()
    for key in keys:
        acc ^= lookup(key, n)
    elapsed = time.perf_counter_ns() - start
    # never report a zero latency on coarse clocks
    return max(elapsed, 1) / len(keys), acc


def run_benchmark(
    algorithms: Sequence[str] = ("power", "jump", "mod"),
    buckets: Optional[Sequence[int]] = None,
    keys: int = MIN_KEYS,
    reps: int = MIN_REPS,
    warmup: int = 10_000,
    seed: int = 0,
) -> BenchReport:
    """Measure mean lookup latency for every algorithm at every bucket count."""
    buckets = list(buckets or DEFAULT_BUCKETS)
    for name in algorithms:
        if name not in BENCH_ALGORITHMS:
            raise ValueError(f"unknown benchmark algorithm {name!r}; choose from {sorted(BENCH_ALGORITHMS)}")
    for n in buckets:
        check_bucket_count(n)
    if keys < 1 or reps < 1 or warmup < 0:
        raise ValueError("keys and reps must be >= 1 and warmup >= 0")
    if keys < MIN_KEYS or reps < MIN_REPS:
        logger.warning(
            f"Benchmark below recommended size (keys={keys} < {MIN_KEYS} or reps={reps} < {MIN_REPS}); "
            "timings will be noisy"
        )

    report = BenchReport(algorithms=list(algorithms), buckets=buckets, keys_per_run=keys, warmup=warmup)
    checksum = 0

    for name in algorithms:
        lookup = BENCH_ALGORITHMS[name]
        for n in buckets:
            if warmup:
                _, acc = time_batch(lookup, sample_keys(seed ^ 0xFFFF, 0, warmup).tolist(), n)
                checksum ^= acc
            samples = []
            for rep in range(reps):
                batch = sample_keys(seed, rep * keys, keys).tolist()
                per_call, acc = time_batch(lookup, batch, n)
                samples.append(per_call)
                checksum ^= acc
            mean_ns = float(np.mean(samples))
            stddev_ns = float(np.std(samples, ddof=1)) if reps > 1 else 0.0
            report.points.append(BenchPoint(algorithm=name, n=n, mean_ns=mean_ns, stddev_ns=stddev_ns, reps=reps))
            logger.info(f"{name} n={n}: {format_ns(mean_ns)} +/- {format_ns(stddev_ns)}")

    report.checksum = checksum
    return report


def format_ns(ns: float) -> str:
    """Human-readable duration from nanoseconds."""
    if abs(ns) >= 10e6:
        return "%.1f ms" % (ns / 1e6)
    elif abs(ns) >= 10e3:
        return "%.1f us" % (ns / 1e3)
    else:
        return "%.0f ns" % ns
