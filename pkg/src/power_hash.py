"""Power consistent hash: Algorithm-f, Algorithm-g and the three-step lookup.

Lookup runs in O(1) space and O(1) expected time independent of the bucket
count n. Let m be the smallest power of two with m >= n:

    r1 = f(key, m)                  -> result if r1 < n
    r2 = g(key, n, m/2 - 1)         -> result if r2 > m/2 - 1
    f(key, m/2)                     -> result otherwise

f is uniform over [0, m-1]; g is weighted over [s, n-1] with mass (s+1)/n at
s and 1/n elsewhere. Both are consistent, so growing n by one only ever moves
keys onto the new bucket n.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .mixers import (
    MASK64,
    UniformStream,
    as_keys,
    mix64_array,
    premix,
    rand_kj,
    rand_kj_array,
    stream_advance_array,
    stream_seed_array,
)

# n is capped so x + 1 is exact in a float64 and floor((x + 1) / u) < 2^64
MAX_BUCKETS = 1 << 32

# Upper bound on Algorithm-g loop passes; the expected count is below 1 + ln 2
ITER_CAP = 64

BucketCounts = Union[int, np.ndarray]

_U1 = np.uint64(1)


@dataclass(frozen=True)
class PowerOfTwo:
    """Smallest power of two m covering a bucket count (m/2 < n <= m)."""

    m: int
    log2m: int

    @property
    def half(self) -> int:
        return self.m >> 1


@dataclass(frozen=True)
class GTrace:
    """Result of Algorithm-g plus the number of loop passes it took."""

    iterations: int
    result: int


@dataclass(frozen=True)
class LookupTrace:
    """Which step of the lookup produced the bucket, and g's pass count (0 if g never ran)."""

    bucket: int
    step: int
    g_iterations: int = 0


@dataclass
class LookupBatch:
    """Vectorised lookup telemetry for a batch of keys."""

    buckets: np.ndarray
    step1: np.ndarray  # bool mask: resolved by f(key, m)
    g_iterations: np.ndarray  # pass counts, one entry per key that reached g

    @property
    def step1_fraction(self) -> float:
        return float(self.step1.mean()) if self.step1.size else 0.0


def check_bucket_count(n: int) -> int:
    """Validate a bucket count and return it as an int."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ValueError(f"bucket count must be an integer, got {n!r}")
    n = int(n)
    if not 1 <= n <= MAX_BUCKETS:
        raise ValueError(f"bucket count must be in [1, 2^32], got {n}")
    return n


def is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


def smallest_pow2_geq(n: int) -> PowerOfTwo:
    """Smallest power of two m with m >= n."""
    n = check_bucket_count(n)
    log2m = (n - 1).bit_length()
    return PowerOfTwo(m=1 << log2m, log2m=log2m)


def find_last_one_bit(k_bits: int) -> int:
    """
    Index of the most significant set bit (2^j <= k_bits < 2^(j+1)).

    int.bit_length() is the constant-time leading-zero count for our widths.
    """
    if k_bits <= 0:
        raise ValueError(f"find_last_one_bit requires a nonzero value, got {k_bits}")
    return k_bits.bit_length() - 1


def _f(key: int, m: int) -> int:
    k_bits = key & (m - 1)
    if k_bits == 0:
        return 0
    j = k_bits.bit_length() - 1
    h = 1 << j
    return h + (rand_kj(key, j) & (h - 1))


def f(key: int, m: int) -> int:
    """
    Algorithm-f: uniform consistent hash over [0, m-1] for a power of two m.

    Args:
        key: 64-bit key whose low log2(m) bits are reasonably random
        m: power of two, 1 <= m <= 2^64

    Returns:
        0 when key & (m-1) is zero, otherwise a value in [h, 2h-1] where h is
        the highest set bit of key & (m-1)
    """
    if not is_power_of_two(m) or m > (1 << 64):
        raise ValueError(f"m must be a power of two in [1, 2^64], got {m}")
    return _f(int(key) & MASK64, m)


def f_hash(key: int, m: int) -> int:
    """Standalone consistent hash for power-of-two bucket counts."""
    return f(key, m)


def _g(key: int, n: int, s: int) -> Tuple[int, int]:
    stream = UniformStream.from_key(key)
    x = s
    while True:
        u = stream.next_uniform()
        # min{j : u > (x+1)/(j+1)}; the exact-integer boundary is measure zero
        r = math.floor((x + 1) / u)
        if r < n and stream.draws < ITER_CAP:
            x = r
        else:
            return x, stream.draws


def g(key: int, n: int, s: int) -> GTrace:
    """
    Algorithm-g: weighted consistent hash over [s, n-1].

    The stream is seeded by the key alone, so for n2 < n1 the jump sequence
    under n2 is a prefix of the one under n1.
    """
    n = check_bucket_count(n)
    if not 0 <= s < n:
        raise ValueError(f"s must satisfy 0 <= s < n, got s={s}, n={n}")
    x, iterations = _g(int(key) & MASK64, n, s)
    return GTrace(iterations=iterations, result=x)


def _power_hash(key: int, n: int, pow2: PowerOfTwo) -> LookupTrace:
    r1 = _f(key, pow2.m)
    if r1 < n:
        return LookupTrace(bucket=r1, step=1)
    half = pow2.half
    r2, iterations = _g(key, n, half - 1)
    if r2 > half - 1:
        return LookupTrace(bucket=r2, step=2, g_iterations=iterations)
    return LookupTrace(bucket=_f(key, half), step=3, g_iterations=iterations)


def power_hash(key: int, n: int) -> int:
    """Map a 64-bit key to a bucket in [0, n-1]."""
    n = check_bucket_count(n)
    key = int(key) & MASK64
    m = 1 << (n - 1).bit_length()
    r1 = _f(key, m)
    if r1 < n:
        return r1
    half = m >> 1
    r2, _ = _g(key, n, half - 1)
    if r2 > half - 1:
        return r2
    return _f(key, half)


def power_hash_trace(key: int, n: int) -> LookupTrace:
    """power_hash with the resolving step and g's pass count."""
    return _power_hash(int(key) & MASK64, n, smallest_pow2_geq(n))


class PowerConsistentHash:
    """
    Router bound to a fixed bucket count.

    m is computed once per bucket count rather than per lookup. With
    premix=True raw keys are passed through mix64 first.
    """

    def __init__(self, n: int, premix: bool = False):
        self.premix = premix
        self._pow2 = smallest_pow2_geq(n)
        self.n = int(n)

    def resize(self, n: int):
        """Change the bucket count; only keys on removed buckets (or onto added ones) move."""
        self._pow2 = smallest_pow2_geq(n)
        self.n = int(n)

    @property
    def m(self) -> int:
        return self._pow2.m

    @property
    def step1_probability(self) -> float:
        """Probability that f(key, m) already lands in range (n / m)."""
        return self.n / self._pow2.m

    def lookup(self, key: int) -> int:
        return _power_hash(premix(key, self.premix), self.n, self._pow2).bucket

    def lookup_many(self, keys) -> np.ndarray:
        keys = as_keys(keys)
        if self.premix:
            keys = mix64_array(keys)
        return power_hash_array(keys, self.n)


# Vectorised variants (1-D uint64 key arrays; bucket counts up to 2^32)


def check_bucket_array(n: BucketCounts, shape) -> np.ndarray:
    arr = np.asarray(n)
    if arr.size and (arr.min() < 1 or arr.max() > MAX_BUCKETS):
        raise ValueError(f"bucket counts must be in [1, 2^32], got range [{arr.min()}, {arr.max()}]")
    return np.broadcast_to(arr.astype(np.uint64), shape)


def smallest_pow2_geq_array(n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Elementwise (m, log2m) for bucket counts n >= 1."""
    n = np.asarray(n, dtype=np.uint64)
    # frexp exponent of (n - 1) is its bit length; exact below 2^53
    _, exponent = np.frexp((n - _U1).astype(np.float64))
    log2m = exponent.astype(np.uint64)
    return np.left_shift(_U1, log2m), log2m


def f_array(keys: np.ndarray, m: BucketCounts) -> np.ndarray:
    """Algorithm-f over a key batch; m is a power of two <= 2^32 (scalar or per key)."""
    keys = as_keys(keys)
    m_arr = np.asarray(m, dtype=np.uint64)
    if m_arr.size and (
        np.any(m_arr < _U1) or np.any(m_arr > np.uint64(MAX_BUCKETS)) or np.any(m_arr & (m_arr - _U1))
    ):
        raise ValueError("m must be a power of two in [1, 2^32]")
    m_arr = np.broadcast_to(m_arr, keys.shape)
    k_bits = keys & (m_arr - _U1)
    nonzero = k_bits != 0
    _, exponent = np.frexp(k_bits.astype(np.float64))
    j = np.where(nonzero, exponent - 1, 0).astype(np.uint64)
    h = np.left_shift(_U1, j)
    r = h + (rand_kj_array(keys, j) & (h - _U1))
    return np.where(nonzero, r, np.uint64(0))


def g_array(keys: np.ndarray, n: BucketCounts, s: BucketCounts) -> Tuple[np.ndarray, np.ndarray]:
    """
    Algorithm-g over a key batch.

    Returns:
        (results, iterations), both aligned with keys
    """
    keys = as_keys(keys)
    n_arr = check_bucket_array(n, keys.shape)
    s_arr = np.broadcast_to(np.asarray(s, dtype=np.uint64), keys.shape)
    if keys.size and np.any(s_arr >= n_arr):
        raise ValueError("s must satisfy 0 <= s < n for every key")

    n_float = n_arr.astype(np.float64)
    x = s_arr.copy()
    states = stream_seed_array(keys)
    iterations = np.zeros(keys.shape, dtype=np.int64)
    active = np.arange(keys.size)

    while active.size:
        states_active, u = stream_advance_array(states[active])
        states[active] = states_active
        r = np.floor((x[active].astype(np.float64) + 1.0) / u)
        iterations[active] += 1
        jump = (r < n_float[active]) & (iterations[active] < ITER_CAP)
        active = active[jump]
        x[active] = r[jump].astype(np.uint64)

    return x, iterations


def power_hash_trace_array(keys: np.ndarray, n: BucketCounts) -> LookupBatch:
    """Vectorised lookup with step-1 mask and g pass counts."""
    keys = as_keys(keys)
    n_arr = check_bucket_array(n, keys.shape)
    m, _ = smallest_pow2_geq_array(n_arr)

    buckets = f_array(keys, m)
    step1 = buckets < n_arr
    need = np.flatnonzero(~step1)
    g_iterations = np.zeros(0, dtype=np.int64)

    if need.size:
        sub_keys = keys[need]
        half = m[need] >> _U1
        r2, g_iterations = g_array(sub_keys, n_arr[need], half - _U1)
        low = f_array(sub_keys, half)
        buckets[need] = np.where(r2 > half - _U1, r2, low)

    return LookupBatch(buckets=buckets, step1=step1, g_iterations=g_iterations)


def power_hash_array(keys: np.ndarray, n: BucketCounts) -> np.ndarray:
    """Vectorised power_hash; n may be a scalar or one bucket count per key."""
    return power_hash_trace_array(keys, n).buckets


def _harmonic(k: int) -> float:
    if k < 4096:
        return math.fsum(1.0 / r for r in range(1, k + 1))
    # asymptotic expansion; error below 1e-15 at this size
    return math.log(k) + 0.5772156649015329 + 1.0 / (2 * k) - 1.0 / (12 * k * k)


def expected_g_iterations(n: int, s: int) -> float:
    """Expected pass count of Algorithm-g: 1 + sum_{r=s+2}^{n} 1/r."""
    if not 0 <= s < n:
        raise ValueError(f"s must satisfy 0 <= s < n, got s={s}, n={n}")
    if n - s < 4096:
        return 1.0 + math.fsum(1.0 / r for r in range(s + 2, n + 1))
    return 1.0 + _harmonic(n) - _harmonic(s + 1)


def step1_probability(n: int, pow2: Optional[PowerOfTwo] = None) -> float:
    pow2 = pow2 or smallest_pow2_geq(n)
    return n / pow2.m
