"""Statistical and exact verification of hashing algorithms.

Uniformity and weighted-distribution checks use Pearson's chi-square with
critical values from the Wilson-Hilferty approximation. Consistency checks
are exact: any single violation fails the report. Keys are always the
reproducible batch mix64(seed + i) (or seed + i without pre-mixing), so a
report is a pure function of its arguments.

Sampling is split into key-index chunks that may run on a thread pool;
chunk results are integer histograms merged by summation, so serial and
parallel runs produce identical reports.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import jump_hash_array, mod_hash_array
from .mixers import sample_keys
from .power_hash import (
    ITER_CAP,
    MAX_BUCKETS,
    check_bucket_count,
    expected_g_iterations,
    f_array,
    g_array,
    is_power_of_two,
    power_hash_array,
    power_hash_trace_array,
    smallest_pow2_geq,
)

logger = logging.getLogger(__name__)

# Vectorised hash: (uint64 keys, bucket count or per-key counts) -> buckets
HashFn = Callable[[np.ndarray, object], np.ndarray]

ALGORITHMS: Dict[str, HashFn] = {
    "power": power_hash_array,
    "jump": jump_hash_array,
    "mod": mod_hash_array,
    "f": f_array,
}

DEFAULT_ALPHA = 0.001
DEFAULT_CHUNK = 1_000_000
MIN_SAMPLES_PER_CELL = 100

# Algorithm-g bounds when called from the lookup (s = m/2 - 1)
ITERATION_MEAN_BOUND = 1.7  # 1 + ln 2 rounded up
ITERATION_VARIANCE_BOUND = 0.70  # ln 2 rounded up


def chi_square_statistic(observed: Sequence[int], expected: Sequence[float]) -> float:
    """Pearson chi-square: sum((O - E)^2 / E)."""
    observed = np.asarray(observed, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if observed.shape != expected.shape:
        raise ValueError("observed and expected must have the same length")
    if np.any(expected <= 0):
        raise ValueError("expected counts must be positive")
    return float(np.sum((observed - expected) ** 2 / expected))


def chi_square_critical(degrees_of_freedom: int, alpha: float = DEFAULT_ALPHA) -> float:
    """
    Upper-tail chi-square critical value via Wilson-Hilferty.

    (X/k)^(1/3) is approximately normal with mean 1 - 2/(9k) and variance
    2/(9k), so the critical value is k * (1 - 2/(9k) + z * sqrt(2/(9k)))^3.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if degrees_of_freedom < 0:
        raise ValueError(f"degrees of freedom must be >= 0, got {degrees_of_freedom}")
    if degrees_of_freedom == 0:
        return 0.0
    k = degrees_of_freedom
    z = NormalDist().inv_cdf(1.0 - alpha)
    c = 2.0 / (9.0 * k)
    return k * (1.0 - c + z * math.sqrt(c)) ** 3


def ks_uniform_statistic(values: Sequence[float]) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of values and U(0, 1]."""
    u = np.sort(np.asarray(values, dtype=np.float64))
    if not u.size:
        raise ValueError("need at least one value")
    n = u.size
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def ks_critical(n: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Asymptotic critical value sqrt(-ln(alpha/2) / 2) / sqrt(n)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) / math.sqrt(n)


def map_key_chunks(
    fn: Callable[[np.ndarray], np.ndarray],
    total: int,
    seed: int,
    premixed: bool = True,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> np.ndarray:
    """
    Apply fn to reproducible key chunks and sum the resulting integer arrays.

    fn must return an int64 array of fixed length for every chunk.
    """
    if chunk_size < 1 or workers < 1:
        raise ValueError("chunk_size and workers must be >= 1")
    starts = list(range(0, total, chunk_size))

    def run(start: int) -> np.ndarray:
        count = min(chunk_size, total - start)
        logger.debug(f"Sampling keys [{start}, {start + count})")
        return fn(sample_keys(seed, start, count, premixed))

    if workers == 1 or len(starts) <= 1:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    if not parts:
        raise ValueError("no keys to sample")
    return np.sum(parts, axis=0, dtype=np.int64)


@dataclass
class DistributionReport:
    """Histogram over [low, n-1] tested against an expected distribution."""

    algorithm: str
    n: int
    samples: int
    histogram: np.ndarray
    expected: np.ndarray  # probabilities aligned with histogram
    chi_square: float
    degrees_of_freedom: int
    critical_value: float
    alpha: float
    low: int = 0

    @property
    def passed(self) -> bool:
        return self.chi_square <= self.critical_value

    @property
    def frequencies(self) -> np.ndarray:
        return self.histogram / self.samples

    @property
    def max_abs_deviation(self) -> float:
        """Largest |observed frequency - expected probability| over all cells."""
        return float(np.max(np.abs(self.frequencies - self.expected)))

    def frequency(self, bucket: int) -> float:
        return float(self.histogram[bucket - self.low] / self.samples)


def _distribution_report(
    algorithm: str, n: int, low: int, histogram: np.ndarray, expected: np.ndarray, alpha: float
) -> DistributionReport:
    samples = int(histogram.sum())
    df = int(histogram.size - 1)
    stat = chi_square_statistic(histogram, expected * samples) if df > 0 else 0.0
    report = DistributionReport(
        algorithm=algorithm,
        n=n,
        samples=samples,
        histogram=histogram,
        expected=expected,
        chi_square=stat,
        degrees_of_freedom=df,
        critical_value=chi_square_critical(df, alpha),
        alpha=alpha,
        low=low,
    )
    logger.info(
        f"{algorithm} n={n} low={low}: chi2={stat:.2f} critical={report.critical_value:.2f} "
        f"df={df} {'PASS' if report.passed else 'FAIL'}"
    )
    return report


def _resolve(algorithm) -> Tuple[str, HashFn]:
    if isinstance(algorithm, str):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
        return algorithm, ALGORITHMS[algorithm]
    return getattr(algorithm, "__name__", "custom"), algorithm


def check_uniformity(
    algorithm,
    n: int,
    samples: int,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    premixed: bool = True,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> DistributionReport:
    """Chi-square test of an algorithm's bucket histogram against uniform 1/n."""
    name, fn = _resolve(algorithm)
    n = check_bucket_count(n)
    if samples < MIN_SAMPLES_PER_CELL * n:
        raise ValueError(f"uniformity needs at least {MIN_SAMPLES_PER_CELL * n} samples for n={n}, got {samples}")

    def histogram(keys: np.ndarray) -> np.ndarray:
        buckets = np.asarray(fn(keys, n)).astype(np.int64)
        if buckets.size and (buckets.min() < 0 or buckets.max() >= n):
            raise ValueError(f"{name} returned a bucket outside [0, {n - 1}]")
        return np.bincount(buckets, minlength=n).astype(np.int64)

    hist = map_key_chunks(histogram, samples, seed, premixed, chunk_size, workers)
    return _distribution_report(name, n, 0, hist, np.full(n, 1.0 / n), alpha)


def check_weighted_g(
    n: int,
    s: int,
    samples: int,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    premixed: bool = True,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> DistributionReport:
    """Chi-square test of g(key, n, s) against (s+1)/n at s and 1/n above it."""
    n = check_bucket_count(n)
    if not 0 <= s < n:
        raise ValueError(f"s must satisfy 0 <= s < n, got s={s}, n={n}")
    cells = n - s
    if samples < MIN_SAMPLES_PER_CELL * cells:
        raise ValueError(f"weighted check needs at least {MIN_SAMPLES_PER_CELL * cells} samples, got {samples}")

    def histogram(keys: np.ndarray) -> np.ndarray:
        results, _ = g_array(keys, n, s)
        return np.bincount((results - np.uint64(s)).astype(np.int64), minlength=cells).astype(np.int64)

    hist = map_key_chunks(histogram, samples, seed, premixed, chunk_size, workers)
    expected = np.full(cells, 1.0 / n)
    expected[0] = (s + 1) / n
    return _distribution_report("g", n, s, hist, expected, alpha)


@dataclass(frozen=True)
class Violation:
    key: int
    n1: int
    n2: int
    value1: int
    value2: int


@dataclass
class ConsistencyReport:
    """Exact monotonicity check: a single violation fails the report."""

    algorithm: str
    property_name: str
    keys_tested: int
    pairs_tested: int
    violations: int
    first_violation: Optional[Violation] = None

    @property
    def passed(self) -> bool:
        return self.violations == 0


class _ViolationCounter:
    def __init__(self):
        self.count = 0
        self.pairs = 0
        self.first: Optional[Violation] = None

    def add(self, bad: np.ndarray, keys, n1, n2, v1, v2):
        self.pairs += bad.size
        hits = np.flatnonzero(bad)
        if not hits.size:
            return
        self.count += int(hits.size)
        if self.first is None:
            i = int(hits[0])

            def pick(values) -> int:
                return int(np.broadcast_to(values, bad.shape)[i])

            self.first = Violation(pick(keys), pick(n1), pick(n2), pick(v1), pick(v2))


def _pair_stream(seed: int, count: int, salt: int) -> np.ndarray:
    return sample_keys(seed ^ salt, 0, count, premixed=True)


def check_monotonicity(
    algorithm,
    n_max: int,
    keys: int,
    seed: int = 0,
    pairs: int = 10_000,
    pair_n_max: int = 1_000_000,
    premixed: bool = True,
    pow2: bool = False,
) -> ConsistencyReport:
    """
    Exact monotonicity (minimal remapping) check.

    For every sampled key and n in [1, n_max - 1], a change between n and
    n + 1 must move the key onto bucket n. Additionally, for random pairs
    n2 < n1 <= pair_n_max, hash(key, n1) < n2 must imply hash(key, n2) equals it.

    With pow2=True the bucket counts are the powers of two 2, 4, ..., n_max
    (the consistency contract of Algorithm-f).
    """
    name, fn = _resolve(algorithm)
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    key_batch = sample_keys(seed, 0, keys, premixed)
    counter = _ViolationCounter()

    if pow2:
        if not is_power_of_two(n_max) or n_max > MAX_BUCKETS:
            raise ValueError(f"n_max must be a power of two <= 2^32 for the power-of-two check, got {n_max}")
        log_max = n_max.bit_length() - 1
        previous = fn(key_batch, 1)
        for e in range(1, log_max + 1):
            m_small, m_large = 1 << (e - 1), 1 << e
            current = fn(key_batch, m_large)
            bad = (current < np.uint64(m_small)) & (current != previous)
            counter.add(bad, key_batch, m_large, m_small, current, previous)
            previous = current
        if pairs:
            pair_keys = _pair_stream(seed, pairs, 0x5A5A)
            draws = _pair_stream(seed, pairs, 0xA5A5)
            e1 = 1 + (draws % np.uint64(log_max)).astype(np.int64)
            e2 = (draws >> np.uint64(32)).astype(np.int64) % e1
            m1 = np.left_shift(np.uint64(1), e1.astype(np.uint64))
            m2 = np.left_shift(np.uint64(1), e2.astype(np.uint64))
            v1, v2 = fn(pair_keys, m1), fn(pair_keys, m2)
            counter.add((v1 < m2) & (v1 != v2), pair_keys, m1, m2, v1, v2)
        property_name = "power-of-two monotonicity"
    else:
        previous = fn(key_batch, 1)
        for n in range(1, n_max):
            current = fn(key_batch, n + 1)
            bad = (current != previous) & (current != np.uint64(n))
            counter.add(bad, key_batch, n + 1, n, current, previous)
            previous = current
        if pairs:
            pair_keys = _pair_stream(seed, pairs, 0x5A5A)
            draws = _pair_stream(seed, pairs, 0xA5A5)
            n1 = 2 + (draws % np.uint64(pair_n_max - 1))
            n2 = np.uint64(1) + (draws >> np.uint64(32)) % (n1 - np.uint64(1))
            v1, v2 = fn(pair_keys, n1), fn(pair_keys, n2)
            counter.add((v1 < n2) & (v1 != v2), pair_keys, n1, n2, v1, v2)
        property_name = "monotonicity"

    report = ConsistencyReport(
        algorithm=name,
        property_name=property_name,
        keys_tested=keys + pairs,
        pairs_tested=counter.pairs,
        violations=counter.count,
        first_violation=counter.first,
    )
    logger.info(f"{name} {property_name}: {report.pairs_tested} pairs, {report.violations} violations")
    return report


def check_g_monotonicity(
    n_max: int,
    keys: int,
    seed: int = 0,
    starts: Sequence[int] = (0, 7),
    triples: int = 10_000,
    premixed: bool = True,
) -> ConsistencyReport:
    """
    Exact consistency of Algorithm-g in its bucket count.

    For each s in starts and n in [s+1, n_max-1]: g(key, n, s) != g(key, n+1, s)
    implies g(key, n+1, s) = n. Random triples (n1, n2, s) with s < n2 < n1 <= n_max
    check g(key, n1, s) < n2 => g(key, n2, s) = g(key, n1, s).
    """
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    key_batch = sample_keys(seed, 0, keys, premixed)
    counter = _ViolationCounter()

    for s in starts:
        if not 0 <= s < n_max - 1:
            raise ValueError(f"start {s} must be in [0, {n_max - 2}]")
        previous, _ = g_array(key_batch, s + 1, s)
        for n in range(s + 1, n_max):
            current, _ = g_array(key_batch, n + 1, s)
            bad = (current != previous) & (current != np.uint64(n))
            counter.add(bad, key_batch, n + 1, n, current, previous)
            previous = current

    if triples and n_max >= 3:
        pair_keys = _pair_stream(seed, triples, 0x3C3C)
        draws = _pair_stream(seed, triples, 0xC3C3)
        span = np.uint64(n_max)
        # s in [0, n_max-3], n2 in [s+1, n_max-2], n1 in [n2+1, n_max]
        s = draws % (span - np.uint64(2))
        n2 = s + np.uint64(1) + (draws >> np.uint64(21)) % (span - s - np.uint64(2))
        n1 = n2 + np.uint64(1) + (draws >> np.uint64(42)) % (span - n2)
        v1, _ = g_array(pair_keys, n1, s)
        v2, _ = g_array(pair_keys, n2, s)
        counter.add((v1 < n2) & (v1 != v2), pair_keys, n1, n2, v1, v2)

    report = ConsistencyReport(
        algorithm="g",
        property_name="weighted monotonicity",
        keys_tested=keys + triples,
        pairs_tested=counter.pairs,
        violations=counter.count,
        first_violation=counter.first,
    )
    logger.info(f"g weighted monotonicity: {report.pairs_tested} pairs, {report.violations} violations")
    return report


@dataclass
class RemapReport:
    """Keys moved by a bucket-count change, and moves that break minimal remapping."""

    algorithm: str
    n_from: int
    n_to: int
    keys: int
    moved: int
    illegal_moves: int
    sample: List[Tuple[int, int, int]] = field(default_factory=list)

    @property
    def moved_fraction(self) -> float:
        return self.moved / self.keys if self.keys else 0.0

    @property
    def expected_fraction(self) -> float:
        """Minimal achievable moved fraction: |n_from - n_to| / max(n_from, n_to)."""
        return abs(self.n_from - self.n_to) / max(self.n_from, self.n_to)

    @property
    def passed(self) -> bool:
        return self.illegal_moves == 0


def measure_remap(
    algorithm,
    n_from: int,
    n_to: int,
    keys: int,
    seed: int = 0,
    premixed: bool = True,
    sample_size: int = 6,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> RemapReport:
    """
    Count keys whose bucket changes when the bucket count goes n_from -> n_to.

    Shrinking: a move is illegal if the old bucket still exists (old < n_to).
    Growing: a move is illegal unless it lands on an added bucket (new >= n_from).
    """
    name, fn = _resolve(algorithm)
    n_from, n_to = check_bucket_count(n_from), check_bucket_count(n_to)

    def count(keys_chunk: np.ndarray) -> np.ndarray:
        before = np.asarray(fn(keys_chunk, n_from))
        after = np.asarray(fn(keys_chunk, n_to))
        moved = before != after
        if n_to < n_from:
            illegal = moved & (before < np.uint64(n_to))
        else:
            illegal = moved & (after < np.uint64(n_from))
        return np.array([np.count_nonzero(moved), np.count_nonzero(illegal)], dtype=np.int64)

    moved, illegal = map_key_chunks(count, keys, seed, premixed, chunk_size, workers)

    head = sample_keys(seed, 0, min(sample_size, keys), premixed)
    sample = list(
        zip(
            head.tolist(),
            np.asarray(fn(head, n_from)).tolist(),
            np.asarray(fn(head, n_to)).tolist(),
        )
    )
    report = RemapReport(
        algorithm=name,
        n_from=n_from,
        n_to=n_to,
        keys=keys,
        moved=int(moved),
        illegal_moves=int(illegal),
        sample=sample,
    )
    logger.info(
        f"{name} remap {n_from}->{n_to}: moved {report.moved_fraction:.6f} "
        f"(minimal {report.expected_fraction:.6f}), illegal={report.illegal_moves}"
    )
    return report


@dataclass(frozen=True)
class IterationStats:
    """Pass-count summary for one bucket count (or for all of them)."""

    invocations: int
    mean: float
    variance: float
    max: int
    expected_mean: float

    @classmethod
    def from_histogram(cls, hist: np.ndarray, expected_mean: float) -> "IterationStats":
        passes = np.arange(hist.size)
        invocations = int(hist.sum())
        if invocations == 0:
            return cls(0, 0.0, 0.0, 0, expected_mean)
        mean = float((passes * hist).sum() / invocations)
        variance = float((((passes - mean) ** 2) * hist).sum() / max(invocations - 1, 1))
        return cls(invocations, mean, variance, int(np.flatnonzero(hist)[-1]), expected_mean)


@dataclass
class IterationReport:
    """Algorithm-g pass counts for every g invocation made by the lookup."""

    n_list: List[int]
    keys: int
    overall: IterationStats
    histogram: Dict[int, int]
    per_n: Dict[int, IterationStats]
    step1_fraction: Dict[int, float]

    @property
    def mean(self) -> float:
        return self.overall.mean

    @property
    def variance(self) -> float:
        return self.overall.variance

    @property
    def max(self) -> int:
        return self.overall.max

    @property
    def invocations(self) -> int:
        return self.overall.invocations

    @property
    def mean_spread(self) -> float:
        """Largest difference between per-n mean pass counts."""
        means = [s.mean for s in self.per_n.values()]
        return max(means) - min(means)

    @property
    def passed(self) -> bool:
        return all(
            s.mean < ITERATION_MEAN_BOUND and s.variance < ITERATION_VARIANCE_BOUND
            for s in [self.overall, *self.per_n.values()]
        )


def measure_g_iterations(
    n_list: Sequence[int],
    keys: int,
    seed: int = 0,
    premixed: bool = True,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> IterationReport:
    """Run the lookup for every n and collect Algorithm-g pass counts."""
    if not n_list:
        raise ValueError("n_list must not be empty")
    total_hist = np.zeros(ITER_CAP + 1, dtype=np.int64)
    per_n: Dict[int, IterationStats] = {}
    step1: Dict[int, float] = {}
    expected_weighted = 0.0

    for n in n_list:
        n = check_bucket_count(n)
        if is_power_of_two(n):
            raise ValueError(f"n={n} is a power of two, so Algorithm-g is never reached")

        # slot 0 counts step-1 exits; slot i > 0 counts g invocations with i passes
        def telemetry(keys_chunk: np.ndarray, n=n) -> np.ndarray:
            batch = power_hash_trace_array(keys_chunk, n)
            hist = np.bincount(batch.g_iterations, minlength=ITER_CAP + 1).astype(np.int64)
            hist[0] = np.count_nonzero(batch.step1)
            return hist

        hist = map_key_chunks(telemetry, keys, seed, premixed, chunk_size, workers)
        step1[n] = float(hist[0] / keys)
        hist[0] = 0
        expected = expected_g_iterations(n, smallest_pow2_geq(n).half - 1)
        per_n[n] = IterationStats.from_histogram(hist, expected)
        expected_weighted += expected * per_n[n].invocations
        total_hist += hist
        logger.info(
            f"n={n}: {per_n[n].invocations} g invocations, mean passes {per_n[n].mean:.4f} "
            f"(expected {expected:.4f}), step-1 exit {step1[n]:.4f}"
        )

    invocations = int(total_hist.sum())
    if invocations == 0:
        raise ValueError("no Algorithm-g invocations were sampled; increase keys")
    overall = IterationStats.from_histogram(total_hist, expected_weighted / invocations)
    histogram = {int(p): int(c) for p, c in enumerate(total_hist) if c}

    return IterationReport(
        n_list=[int(n) for n in n_list],
        keys=keys,
        overall=overall,
        histogram=histogram,
        per_n=per_n,
        step1_fraction=step1,
    )
