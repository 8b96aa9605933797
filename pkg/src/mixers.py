"""Deterministic 64-bit mixing primitives and the per-key uniform stream.

Every value here is bit-exact: the scalar functions operate on Python ints
masked to 64 bits, and the ``*_array`` variants do the same work on numpy
uint64 arrays (numpy integer arithmetic wraps modulo 2^64). The two paths
must always agree.
"""

from dataclasses import dataclass

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

GOLDEN = 0x9E3779B97F4A7C15
STREAM_SALT = 0xD1B54A32D192ED03

_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

# 53-bit mantissa scale for mapping a 64-bit output into (0, 1]
UNIT = 2.0 ** -53

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U1 = np.uint64(1)
_MUL1_U64 = np.uint64(_MUL1)
_MUL2_U64 = np.uint64(_MUL2)
GOLDEN_U64 = np.uint64(GOLDEN)
_STREAM_SALT_U64 = np.uint64(STREAM_SALT)


def mix64(x: int) -> int:
    """Bijective avalanche finalizer (splitmix64 output stage)."""
    x = int(x) & MASK64
    x ^= x >> 30
    x = (x * _MUL1) & MASK64
    x ^= x >> 27
    x = (x * _MUL2) & MASK64
    x ^= x >> 31
    return x


def rand_kj(key: int, j: int) -> int:
    """
    Pseudo-random 64-bit integer determined by a key and a bit index.

    Args:
        key: 64-bit hash key
        j: bit index in [0, 63]

    Returns:
        mix64(key ^ ((j + 1) * GOLDEN)) modulo 2^64
    """
    if not 0 <= j <= 63:
        raise ValueError(f"bit index must be in [0, 63], got {j}")
    return mix64(int(key) ^ (((j + 1) * GOLDEN) & MASK64))


def premix(key: int, enabled: bool = True) -> int:
    """Optionally pass a raw key through mix64 so its low bits are random."""
    key = int(key) & MASK64
    return mix64(key) if enabled else key


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a fold of a byte string."""
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def key_from_string(text: str, premixed: bool = True) -> int:
    """Turn a string key into a 64-bit hash key (FNV-1a over UTF-8, then pre-mix)."""
    return premix(fnv1a64(text.encode("utf-8")), premixed)


@dataclass
class UniformStream:
    """Deterministic per-key stream of reals in (0, 1]."""

    state: int
    draws: int = 0

    @classmethod
    def from_key(cls, key: int) -> "UniformStream":
        """Seed a stream from a key. Equal keys give identical streams."""
        return cls(state=mix64((int(key) & MASK64) ^ STREAM_SALT))

    def next_uniform(self) -> float:
        """Advance the stream and return the next value u with 0 < u <= 1."""
        self.state = (self.state + GOLDEN) & MASK64
        self.draws += 1
        return ((mix64(self.state) >> 11) + 1) * UNIT


def stream_new(key: int) -> UniformStream:
    return UniformStream.from_key(key)


def stream_next(stream: UniformStream) -> float:
    return stream.next_uniform()


# Vectorised variants


def as_keys(keys) -> np.ndarray:
    """Coerce keys to a flat uint64 array."""
    arr = np.asarray(keys)
    if arr.dtype != np.uint64:
        if arr.dtype.kind == "O" or (arr.dtype.kind == "i" and arr.size and arr.min() < 0):
            arr = np.array([int(k) & MASK64 for k in arr.ravel()], dtype=np.uint64)
        else:
            arr = arr.astype(np.uint64)
    return arr.ravel()


def mix64_array(x: np.ndarray) -> np.ndarray:
    """mix64 applied elementwise to a uint64 array (returns a new array)."""
    x = np.array(x, dtype=np.uint64, copy=True)
    x ^= x >> _U30
    x *= _MUL1_U64
    x ^= x >> _U27
    x *= _MUL2_U64
    x ^= x >> _U31
    return x


def rand_kj_array(keys: np.ndarray, j: np.ndarray) -> np.ndarray:
    """rand_kj applied elementwise; j may be a scalar or an array of bit indices."""
    j = np.asarray(j, dtype=np.uint64).reshape(-1)
    salt = (j + _U1) * GOLDEN_U64
    return mix64_array(keys ^ salt)


def stream_seed_array(keys: np.ndarray) -> np.ndarray:
    """Initial UniformStream states for a batch of keys."""
    return mix64_array(keys ^ _STREAM_SALT_U64)


def stream_advance_array(states: np.ndarray):
    """
    Advance a batch of stream states by one draw.

    Returns:
        (new_states, u) where every u lies in (0, 1]
    """
    states = states + GOLDEN_U64
    out = mix64_array(states)
    u = ((out >> _U11) + _U1).astype(np.float64) * UNIT
    return states, u


def sample_keys(seed: int, start: int, count: int, premixed: bool = True) -> np.ndarray:
    """
    Reproducible key batch: mix64(seed + i) for i in [start, start + count).

    With premixed=False the raw sequential integers seed + i are returned.
    """
    base = np.uint64((seed + start) & MASK64)
    keys = np.arange(count, dtype=np.uint64) + base
    return mix64_array(keys) if premixed else keys
