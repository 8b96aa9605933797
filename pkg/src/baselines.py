"""Reference algorithms: jump consistent hash and ordinary modular hashing."""

import numpy as np

from .mixers import MASK64, as_keys
from .power_hash import BucketCounts, check_bucket_array, check_bucket_count

# LCG constants of the published jump consistent hash
JUMP_LCG_MUL = 2862933555777941757
_JUMP_LCG_MUL_U64 = np.uint64(JUMP_LCG_MUL)
_U1 = np.uint64(1)
_U33 = np.uint64(33)
_TWO_31 = float(1 << 31)


def jump_hash(key: int, n: int) -> int:
    """
    Jump consistent hash: bucket in [0, n-1] in O(ln n) expected time.

    The loop walks forward from bucket 0, jumping to the next bucket the key
    would move to as the count grows, and stops once that exceeds n.
    """
    n = check_bucket_count(n)
    key = int(key) & MASK64
    b, j = -1, 0
    while j < n:
        b = j
        key = (key * JUMP_LCG_MUL + 1) & MASK64
        j = int(float(b + 1) * (_TWO_31 / float((key >> 33) + 1)))
    return b


def mod_hash(key: int, n: int) -> int:
    """Ordinary modular hashing (key mod n); remaps almost every key when n changes."""
    if n < 1:
        raise ValueError(f"bucket count must be >= 1, got {n}")
    return (int(key) & MASK64) % n


def jump_hash_array(keys: np.ndarray, n: BucketCounts) -> np.ndarray:
    """Vectorised jump_hash; n may be a scalar or one bucket count per key."""
    keys = as_keys(keys).copy()
    n_float = check_bucket_array(n, keys.shape).astype(np.float64)
    buckets = np.zeros(keys.shape, dtype=np.int64)
    nxt = np.zeros(keys.shape, dtype=np.float64)
    active = np.arange(keys.size)

    while active.size:
        buckets[active] = nxt[active].astype(np.int64)
        k = keys[active] * _JUMP_LCG_MUL_U64 + _U1
        keys[active] = k
        jump = (buckets[active] + 1).astype(np.float64) * (_TWO_31 / ((k >> _U33) + _U1).astype(np.float64))
        # int(x) < n iff x < n for integral n
        cont = jump < n_float[active]
        nxt[active] = np.floor(jump)
        active = active[cont]

    return buckets.astype(np.uint64)


def mod_hash_array(keys: np.ndarray, n: BucketCounts) -> np.ndarray:
    keys = as_keys(keys)
    n_arr = np.asarray(n, dtype=np.uint64)
    if n_arr.size and np.any(n_arr < _U1):
        raise ValueError("bucket count must be >= 1")
    return keys % n_arr
