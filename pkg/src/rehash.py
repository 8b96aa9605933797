"""Availability-aware lookup: bounded re-probing with a reserved fallback set.

When a key's home bucket is unavailable, probe t (1 <= t <= max_probes)
hashes the derived key mix64(key ^ t*GOLDEN) with the same power_hash.
The first available probe wins; if all fail the key goes to a fallback
bucket chosen by hashing the key over the fallback set. No list of
available buckets is needed, and worst-case work is bounded by max_probes.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .mixers import GOLDEN, MASK64, as_keys, mix64, mix64_array, sample_keys
from .power_hash import check_bucket_count, power_hash, power_hash_array

logger = logging.getLogger(__name__)

MAX_PROBES = 8
SHED_SALT = 0xA24BAED4963EE407

_SHED_SALT_U64 = np.uint64(SHED_SALT)
_TWO_NEG_64 = 2.0 ** -64


@dataclass(frozen=True)
class AvailabilityView:
    """
    Snapshot of which buckets can take keys.

    Views built from a bitmap also support the vectorised lookups used by
    the simulation; predicate-only views work with the scalar API.
    """

    n: int
    is_available: Callable[[int], bool]
    fallback: Tuple[int, ...] = ()
    bitmap: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        check_bucket_count(self.n)
        for bucket in self.fallback:
            if not 0 <= bucket < self.n:
                raise ValueError(f"fallback bucket {bucket} outside [0, {self.n - 1}]")
            if not self.is_available(bucket):
                raise ValueError(f"fallback bucket {bucket} must be available")

    @classmethod
    def all_available(cls, n: int, fallback: Sequence[int] = ()) -> "AvailabilityView":
        return cls.from_bitmap(np.ones(check_bucket_count(n), dtype=bool), fallback)

    @classmethod
    def from_bitmap(cls, bits: Iterable[bool], fallback: Sequence[int] = ()) -> "AvailabilityView":
        """Build a view from one availability flag per bucket."""
        bitmap = np.array(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=bool)
        bitmap.setflags(write=False)
        if bitmap.ndim != 1 or bitmap.size == 0:
            raise ValueError("availability bitmap must be a non-empty 1-D sequence")
        return cls(
            n=int(bitmap.size),
            is_available=lambda b: bool(bitmap[b]),
            fallback=tuple(int(b) for b in fallback),
            bitmap=bitmap,
        )

    @classmethod
    def from_file(cls, path: Path, fallback: Sequence[int] = ()) -> "AvailabilityView":
        """
        Load a bitmap file: one '0' or '1' character per bucket, whitespace ignored.

        '1' marks an available bucket.
        """
        text = Path(path).read_text()
        flags = [c for c in text if not c.isspace()]
        bad = {c for c in flags if c not in "01"}
        if bad:
            raise ValueError(f"bitmap file {path} contains characters other than 0/1: {sorted(bad)}")
        return cls.from_bitmap([c == "1" for c in flags], fallback)

    @classmethod
    def with_unavailable_fraction(
        cls,
        n: int,
        fraction: float,
        fallback_size: int,
        seed: int = 0,
    ) -> "AvailabilityView":
        """
        Reserve the top fallback_size ids as fallback and mark round(fraction * n)
        of the remaining buckets unavailable, chosen deterministically from seed.
        """
        n = check_bucket_count(n)
        if not 0.0 <= fraction < 1.0:
            raise ValueError(f"unavailable fraction must be in [0, 1), got {fraction}")
        if not 0 <= fallback_size < n:
            raise ValueError(f"fallback size must be in [0, {n - 1}], got {fallback_size}")
        fallback = list(range(n - fallback_size, n))
        candidates = np.arange(n - fallback_size, dtype=np.uint64)
        count = min(int(round(fraction * n)), candidates.size)
        order = np.argsort(mix64_array(candidates ^ np.uint64(seed & MASK64)), kind="stable")
        bitmap = np.ones(n, dtype=bool)
        bitmap[order[:count]] = False
        return cls.from_bitmap(bitmap, fallback)

    def without(self, bucket: int, release_fallback: bool = False) -> "AvailabilityView":
        """
        Same view with one more bucket marked unavailable.

        A fallback bucket can only be marked down with release_fallback=True,
        which also drops it from the fallback set.
        """
        if not 0 <= bucket < self.n:
            raise ValueError(f"bucket {bucket} outside [0, {self.n - 1}]")
        fallback = self.fallback
        if bucket in fallback:
            if not release_fallback:
                raise ValueError(f"cannot mark fallback bucket {bucket} unavailable")
            fallback = tuple(b for b in fallback if b != bucket)
        if self.bitmap is not None:
            bitmap = self.bitmap.copy()
            bitmap[bucket] = False
            return AvailabilityView.from_bitmap(bitmap, fallback)
        base = self.is_available
        return AvailabilityView(
            n=self.n,
            is_available=lambda b: b != bucket and base(b),
            fallback=fallback,
        )

    @property
    def unavailable_count(self) -> Optional[int]:
        if self.bitmap is None:
            return None
        return int(self.n - self.bitmap.sum())


@dataclass(frozen=True)
class RehashOutcome:
    bucket: int
    probes: int
    fell_back: bool


def _probe_key(key: int, t: int) -> int:
    return mix64(key ^ ((t * GOLDEN) & MASK64))


def _pick_fallback(key: int, view: AvailabilityView) -> int:
    return view.fallback[mix64(key) % len(view.fallback)]


def lookup_available(key: int, view: AvailabilityView, max_probes: int = MAX_PROBES) -> RehashOutcome:
    """
    Route a key to an available bucket.

    Keys whose home bucket is available never move. Otherwise up to
    max_probes derived keys are tried before falling back.
    """
    if max_probes < 0:
        raise ValueError(f"max_probes must be >= 0, got {max_probes}")
    key = int(key) & MASK64
    home = power_hash(key, view.n)
    if view.is_available(home):
        return RehashOutcome(bucket=home, probes=0, fell_back=False)
    for t in range(1, max_probes + 1):
        bucket = power_hash(_probe_key(key, t), view.n)
        if view.is_available(bucket):
            return RehashOutcome(bucket=bucket, probes=t, fell_back=False)
    if not view.fallback:
        raise ValueError(f"no available bucket after {max_probes} probes and no fallback set configured")
    return RehashOutcome(bucket=_pick_fallback(key, view), probes=max_probes, fell_back=True)


def _check_shed_args(view: AvailabilityView, shed_fraction: float, overloaded: int):
    if not 0.0 <= shed_fraction < 1.0:
        raise ValueError(f"shed fraction must be in [0, 1), got {shed_fraction}")
    if not 0 <= overloaded < view.n:
        raise ValueError(f"overloaded bucket {overloaded} outside [0, {view.n - 1}]")


def shed_value(key: int) -> float:
    """Fixed per-key value in [0, 1); a key is shed when it falls below the shed fraction."""
    return mix64(int(key) ^ SHED_SALT) * _TWO_NEG_64


def shed_load(
    key: int,
    view: AvailabilityView,
    shed_fraction: float,
    overloaded: int,
    max_probes: int = MAX_PROBES,
) -> RehashOutcome:
    """
    Move a stable fraction of an overloaded bucket's keys elsewhere.

    A key shed at fraction p stays shed for every larger fraction. Keys not
    on the overloaded bucket route exactly as lookup_available does. If the
    overloaded bucket is also a fallback bucket, shed keys use the remaining
    fallback set.
    """
    _check_shed_args(view, shed_fraction, overloaded)
    key = int(key) & MASK64
    if power_hash(key, view.n) != overloaded or shed_value(key) >= shed_fraction:
        return lookup_available(key, view, max_probes)
    return lookup_available(key, view.without(overloaded, release_fallback=True), max_probes)


# Vectorised variants for simulation


@dataclass
class RehashBatch:
    buckets: np.ndarray
    probes: np.ndarray
    fell_back: np.ndarray


def _require_bitmap(view: AvailabilityView) -> np.ndarray:
    if view.bitmap is None:
        raise ValueError("vectorised rehashing needs a bitmap-backed AvailabilityView")
    return view.bitmap


def lookup_available_array(keys: np.ndarray, view: AvailabilityView, max_probes: int = MAX_PROBES) -> RehashBatch:
    """lookup_available over a key batch; agrees with the scalar path key by key."""
    bitmap = _require_bitmap(view)
    keys = as_keys(keys)
    buckets = power_hash_array(keys, view.n)
    probes = np.zeros(keys.shape, dtype=np.int64)
    fell_back = np.zeros(keys.shape, dtype=bool)
    pending = np.flatnonzero(~bitmap[buckets.astype(np.intp)])

    for t in range(1, max_probes + 1):
        if not pending.size:
            break
        derived = mix64_array(keys[pending] ^ np.uint64((t * GOLDEN) & MASK64))
        candidates = power_hash_array(derived, view.n)
        hit = bitmap[candidates.astype(np.intp)]
        buckets[pending[hit]] = candidates[hit]
        probes[pending[hit]] = t
        pending = pending[~hit]

    if pending.size:
        if not view.fallback:
            raise ValueError(
                f"{pending.size} keys found no available bucket after {max_probes} probes and no fallback set configured"
            )
        fallback = np.asarray(view.fallback, dtype=np.uint64)
        picks = mix64_array(keys[pending]) % np.uint64(fallback.size)
        buckets[pending] = fallback[picks.astype(np.intp)]
        probes[pending] = max_probes
        fell_back[pending] = True

    return RehashBatch(buckets=buckets, probes=probes, fell_back=fell_back)


def shed_mask_array(keys: np.ndarray, shed_fraction: float) -> np.ndarray:
    values = mix64_array(as_keys(keys) ^ _SHED_SALT_U64).astype(np.float64) * _TWO_NEG_64
    return values < shed_fraction


def shed_load_array(
    keys: np.ndarray,
    view: AvailabilityView,
    shed_fraction: float,
    overloaded: int,
    max_probes: int = MAX_PROBES,
) -> RehashBatch:
    _check_shed_args(view, shed_fraction, overloaded)
    keys = as_keys(keys)
    batch = lookup_available_array(keys, view, max_probes)
    home = power_hash_array(keys, view.n)
    shed = np.flatnonzero((home == np.uint64(overloaded)) & shed_mask_array(keys, shed_fraction))
    if shed.size:
        shed_view = view.without(overloaded, release_fallback=True)
        rerouted = lookup_available_array(keys[shed], shed_view, max_probes)
        batch.buckets[shed] = rerouted.buckets
        batch.probes[shed] = rerouted.probes
        batch.fell_back[shed] = rerouted.fell_back
    return batch


@dataclass
class RehashReport:
    """Outcome of routing a key sample through an availability view."""

    n: int
    keys: int
    max_probes: int
    unavailable: int
    fallback_size: int
    moved: int
    fell_back: int
    invalid: int  # keys on an unavailable, non-fallback bucket; must be 0
    probe_histogram: Dict[int, int]
    toggled_bucket: Optional[int] = None
    toggle_moved: Optional[int] = None
    shed_fraction: Optional[float] = None
    overloaded: Optional[int] = None

    @property
    def moved_fraction(self) -> float:
        return self.moved / self.keys if self.keys else 0.0

    @property
    def fallback_fraction(self) -> float:
        return self.fell_back / self.keys if self.keys else 0.0

    @property
    def mean_probes(self) -> float:
        total = sum(self.probe_histogram.values())
        return sum(p * c for p, c in self.probe_histogram.items()) / total if total else 0.0

    @property
    def rerouted_mean_probes(self) -> float:
        """Mean probe count over keys that needed at least one probe."""
        rerouted = {p: c for p, c in self.probe_histogram.items() if p > 0}
        total = sum(rerouted.values())
        return sum(p * c for p, c in rerouted.items()) / total if total else 0.0

    @property
    def toggle_moved_fraction(self) -> Optional[float]:
        if self.toggle_moved is None or not self.keys:
            return None
        return self.toggle_moved / self.keys

    @property
    def passed(self) -> bool:
        return self.invalid == 0


def simulate_rehash(
    view: AvailabilityView,
    keys: int,
    seed: int = 0,
    max_probes: int = MAX_PROBES,
    premixed: bool = True,
    toggle: Optional[int] = None,
    shed_fraction: Optional[float] = None,
    overloaded: Optional[int] = None,
) -> RehashReport:
    """
    Route a reproducible key sample through a view and summarise where keys went.

    moved counts keys not on their all-available home bucket. With toggle set,
    toggle_moved counts keys whose outcome changes when that one bucket is also
    marked unavailable.
    """
    bitmap = _require_bitmap(view)
    key_batch = sample_keys(seed, 0, keys, premixed)
    logger.info(
        f"Rehash simulation: n={view.n}, keys={keys}, unavailable={view.unavailable_count}, "
        f"fallback={len(view.fallback)}, max_probes={max_probes}"
    )

    if shed_fraction is not None:
        if overloaded is None:
            raise ValueError("shed simulation needs an overloaded bucket")
        batch = shed_load_array(key_batch, view, shed_fraction, overloaded, max_probes)
    else:
        batch = lookup_available_array(key_batch, view, max_probes)

    home = power_hash_array(key_batch, view.n)
    landed_ok = bitmap[batch.buckets.astype(np.intp)] | batch.fell_back
    probe_histogram = dict(sorted(Counter(batch.probes.tolist()).items()))

    toggle_moved = None
    if toggle is not None:
        toggled = lookup_available_array(key_batch, view.without(toggle), max_probes)
        toggle_moved = int(np.count_nonzero(toggled.buckets != batch.buckets))

    report = RehashReport(
        n=view.n,
        keys=keys,
        max_probes=max_probes,
        unavailable=view.unavailable_count or 0,
        fallback_size=len(view.fallback),
        moved=int(np.count_nonzero(batch.buckets != home)),
        fell_back=int(np.count_nonzero(batch.fell_back)),
        invalid=int(np.count_nonzero(~landed_ok)),
        probe_histogram=probe_histogram,
        toggled_bucket=toggle,
        toggle_moved=toggle_moved,
        shed_fraction=shed_fraction,
        overloaded=overloaded,
    )
    logger.info(
        f"Rehash simulation done: moved={report.moved_fraction:.6f}, "
        f"fallback={report.fallback_fraction:.3g}, invalid={report.invalid}"
    )
    return report
