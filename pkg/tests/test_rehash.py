"""Tests for availability-aware lookup, load shedding and the rehash simulation."""

import numpy as np
import pytest

from src.mixers import sample_keys
from src.power_hash import power_hash, power_hash_array
from src.rehash import (
    MAX_PROBES,
    AvailabilityView,
    lookup_available,
    lookup_available_array,
    shed_load,
    shed_load_array,
    shed_mask_array,
    shed_value,
    simulate_rehash,
)


class TestAvailabilityView:
    """Tests for availability snapshots."""

    def test_all_available(self):
        """No bucket is down."""
        view = AvailabilityView.all_available(10)
        assert view.unavailable_count == 0
        assert all(view.is_available(b) for b in range(10))

    def test_from_bitmap(self):
        """Flags map one-to-one onto buckets."""
        view = AvailabilityView.from_bitmap([True, False, True], fallback=[2])
        assert view.n == 3
        assert not view.is_available(1)
        assert view.fallback == (2,)
        assert view.unavailable_count == 1

    def test_bitmap_is_read_only(self):
        """The stored bitmap cannot be changed behind the view's back."""
        view = AvailabilityView.from_bitmap([True, True])
        with pytest.raises(ValueError):
            view.bitmap[0] = False

    def test_from_file(self, bitmap_file):
        """0/1 characters with whitespace ignored."""
        view = AvailabilityView.from_file(bitmap_file, fallback=[19])
        assert view.n == 20
        assert view.unavailable_count == 2
        assert not view.is_available(3)
        assert not view.is_available(7)

    def test_from_file_rejects_other_characters(self, tmp_path):
        """Anything but 0, 1 and whitespace is an error."""
        path = tmp_path / "bad.txt"
        path.write_text("1101x1")
        with pytest.raises(ValueError):
            AvailabilityView.from_file(path)

    def test_fallback_must_be_available(self):
        """A fallback bucket that is down is rejected."""
        with pytest.raises(ValueError):
            AvailabilityView.from_bitmap([True, False], fallback=[1])
        with pytest.raises(ValueError):
            AvailabilityView.from_bitmap([True, True], fallback=[5])

    def test_with_unavailable_fraction(self):
        """The requested share of non-fallback buckets goes down; fallback ids are the top ids."""
        view = AvailabilityView.with_unavailable_fraction(1000, 0.1, fallback_size=4, seed=3)
        assert view.unavailable_count == 100
        assert view.fallback == (996, 997, 998, 999)
        assert all(view.is_available(b) for b in view.fallback)

    def test_with_unavailable_fraction_is_deterministic(self):
        """Same seed, same down set; another seed, another set."""
        a = AvailabilityView.with_unavailable_fraction(500, 0.2, 1, seed=1)
        b = AvailabilityView.with_unavailable_fraction(500, 0.2, 1, seed=1)
        c = AvailabilityView.with_unavailable_fraction(500, 0.2, 1, seed=2)
        assert np.array_equal(a.bitmap, b.bitmap)
        assert not np.array_equal(a.bitmap, c.bitmap)

    @pytest.mark.parametrize("fraction", [-0.1, 1.0])
    def test_invalid_fraction(self, fraction):
        """Fraction must be in [0, 1)."""
        with pytest.raises(ValueError):
            AvailabilityView.with_unavailable_fraction(10, fraction, 1)

    def test_without(self):
        """without() marks one more bucket down and keeps the original intact."""
        view = AvailabilityView.all_available(10, fallback=[9])
        smaller = view.without(4)
        assert not smaller.is_available(4)
        assert view.is_available(4)
        with pytest.raises(ValueError):
            view.without(9)
        released = view.without(9, release_fallback=True)
        assert not released.is_available(9)
        assert released.fallback == ()
        assert view.fallback == (9,)
        with pytest.raises(ValueError):
            view.without(10)

    def test_predicate_view_without(self):
        """Predicate-only views support without() through composition."""
        view = AvailabilityView(n=8, is_available=lambda b: b != 2)
        smaller = view.without(5)
        assert [smaller.is_available(b) for b in range(8)] == [True, True, False, True, True, False, True, True]
        assert smaller.unavailable_count is None


class TestLookupAvailable:
    """Tests for bounded re-probing with fallback."""

    def test_all_available_is_identity(self, keys):
        """With every bucket up the home bucket is returned without probing."""
        view = AvailabilityView.all_available(50)
        for key in keys[:300].tolist():
            outcome = lookup_available(key, view)
            assert outcome.bucket == power_hash(key, 50)
            assert outcome.probes == 0
            assert not outcome.fell_back

    def test_available_home_never_moves(self, keys):
        """Keys whose home bucket is up keep it."""
        view = AvailabilityView.with_unavailable_fraction(100, 0.3, 2, seed=9)
        for key in keys.tolist():
            home = power_hash(key, 100)
            outcome = lookup_available(key, view)
            if view.is_available(home):
                assert outcome.bucket == home
            else:
                assert outcome.bucket != home
                assert view.is_available(outcome.bucket)

    def test_falls_back_when_probes_exhausted(self, keys):
        """If every probe lands on a down bucket the key goes to the fallback set."""
        bits = [False] * 64
        bits[63] = True
        view = AvailabilityView.from_bitmap(bits, fallback=[63])
        fell_back = 0
        for key in keys[:200].tolist():
            outcome = lookup_available(key, view, max_probes=2)
            assert outcome.bucket == 63
            fell_back += outcome.fell_back
        assert fell_back > 0

    def test_numpy_scalar_keys(self, keys):
        """np.uint64 keys route exactly like the equivalent Python ints."""
        view = AvailabilityView.with_unavailable_fraction(100, 0.3, 2, seed=9)
        for key in keys[:200]:
            assert lookup_available(key, view) == lookup_available(int(key), view)
            assert shed_load(key, view, 0.5, overloaded=99) == shed_load(int(key), view, 0.5, overloaded=99)

    def test_no_fallback_raises(self):
        """Exhausted probes with no fallback set is an error."""
        view = AvailabilityView(n=4, is_available=lambda b: False)
        with pytest.raises(ValueError):
            lookup_available(12345, view, max_probes=3)

    def test_negative_probes_rejected(self):
        """max_probes must be >= 0."""
        with pytest.raises(ValueError):
            lookup_available(1, AvailabilityView.all_available(4), max_probes=-1)

    def test_predicate_view(self, keys):
        """Scalar lookup works with a plain availability predicate."""
        view = AvailabilityView(n=10, is_available=lambda b: b % 3 != 0, fallback=(1,))
        for key in keys[:300].tolist():
            assert lookup_available(key, view).bucket % 3 != 0

    def test_array_matches_scalar(self, keys):
        """Vectorised routing agrees key by key."""
        view = AvailabilityView.with_unavailable_fraction(97, 0.4, 3, seed=5)
        batch = lookup_available_array(keys, view, max_probes=4)
        outcomes = [lookup_available(int(k), view, max_probes=4) for k in keys]
        assert batch.buckets.tolist() == [o.bucket for o in outcomes]
        assert batch.probes.tolist() == [o.probes for o in outcomes]
        assert batch.fell_back.tolist() == [o.fell_back for o in outcomes]

    def test_array_needs_bitmap(self, keys):
        """Predicate-only views cannot be vectorised."""
        view = AvailabilityView(n=10, is_available=lambda b: True)
        with pytest.raises(ValueError):
            lookup_available_array(keys, view)


class TestShedLoad:
    """Tests for moving part of an overloaded bucket's keys."""

    def test_zero_fraction_keeps_everything(self, keys):
        """Shedding nothing matches plain routing."""
        view = AvailabilityView.all_available(20, fallback=[19])
        for key in keys[:300].tolist():
            assert shed_load(key, view, 0.0, overloaded=4) == lookup_available(key, view)

    def test_only_overloaded_keys_move(self, keys):
        """Keys on other buckets are routed exactly as before."""
        view = AvailabilityView.all_available(8, fallback=[7])
        for key in keys.tolist():
            outcome = shed_load(key, view, 0.5, overloaded=2)
            home = power_hash(key, 8)
            if home != 2:
                assert outcome.bucket == home
            elif shed_value(key) < 0.5:
                assert outcome.bucket != 2
            else:
                assert outcome.bucket == 2

    def test_shed_set_is_nested(self, keys):
        """A key shed at a small fraction is shed at every larger one."""
        for key in keys.tolist():
            if shed_value(key) < 0.1:
                assert shed_value(key) < 0.3

    def test_shed_fraction_quarter(self):
        """A quarter of keys fall in the shed set."""
        mask = shed_mask_array(sample_keys(11, 0, 1_000_000), 0.25)
        assert mask.mean() == pytest.approx(0.25, abs=0.01)

    def test_shed_quarter_of_overloaded_bucket(self):
        """Shedding 0.25 of bucket 5 of 64 re-routes about a quarter of its keys."""
        keys = sample_keys(17, 0, 1_000_000)
        view = AvailabilityView.all_available(64, fallback=[63])
        batch = shed_load_array(keys, view, 0.25, overloaded=5)
        on_bucket = power_hash_array(keys, 64) == np.uint64(5)
        moved = on_bucket & (batch.buckets != np.uint64(5))
        assert np.count_nonzero(moved) / np.count_nonzero(on_bucket) == pytest.approx(0.25, abs=0.02)
        assert np.all(batch.buckets[~on_bucket] == power_hash_array(keys, 64)[~on_bucket])

    def test_array_matches_scalar(self, keys):
        """Vectorised shedding agrees with the scalar path."""
        view = AvailabilityView.with_unavailable_fraction(16, 0.25, 1, seed=4)
        overloaded = next(b for b in range(16) if view.is_available(b))
        batch = shed_load_array(keys, view, 0.6, overloaded)
        assert batch.buckets.tolist() == [shed_load(int(k), view, 0.6, overloaded).bucket for k in keys]

    def test_shed_from_fallback_bucket(self):
        """An overloaded fallback bucket sheds its keys without raising."""
        view = AvailabilityView.all_available(8, fallback=[7])
        keys = sample_keys(23, 0, 20_000)
        on_seven = [k for k in keys.tolist() if power_hash(k, 8) == 7]
        assert on_seven
        for key in on_seven:
            outcome = shed_load(key, view, 0.5, overloaded=7)
            if shed_value(key) < 0.5:
                assert outcome.bucket != 7
                assert not outcome.fell_back
            else:
                assert outcome.bucket == 7
        batch = shed_load_array(keys, view, 0.5, overloaded=7)
        assert batch.buckets.tolist() == [shed_load(k, view, 0.5, overloaded=7).bucket for k in keys.tolist()]

    def test_shed_from_one_of_two_fallback_buckets(self, keys):
        """Shed keys land on the one bucket left, by probe or by the remaining fallback."""
        bitmap = np.zeros(16, dtype=bool)
        bitmap[[14, 15]] = True
        view = AvailabilityView.from_bitmap(bitmap, fallback=[14, 15])
        batch = shed_load_array(keys, view, 0.9, overloaded=15, max_probes=1)
        for key, bucket in zip(keys.tolist(), batch.buckets.tolist()):
            outcome = shed_load(key, view, 0.9, overloaded=15, max_probes=1)
            assert outcome.bucket == bucket
            if power_hash(key, 16) == 15 and shed_value(key) < 0.9:
                assert bucket == 14

    @pytest.mark.parametrize("fraction,bucket", [(1.0, 0), (-0.5, 0), (0.5, 16)])
    def test_invalid_arguments(self, fraction, bucket):
        """Fraction must be in [0, 1) and the bucket in range."""
        view = AvailabilityView.all_available(16)
        with pytest.raises(ValueError):
            shed_load(1, view, fraction, bucket)


class TestSimulateRehash:
    """Tests for the failure-injection simulation."""

    def test_nothing_down_moves_nothing(self):
        """0% unavailable leaves every key on its home bucket."""
        report = simulate_rehash(AvailabilityView.all_available(100, fallback=[99]), 100_000, seed=1)
        assert report.moved == 0
        assert report.fell_back == 0
        assert report.probe_histogram == {0: 100_000}
        assert report.passed

    def test_ten_percent_down(self):
        """10% down with 8 probes: every key lands safely and fallback is vanishingly rare."""
        view = AvailabilityView.with_unavailable_fraction(1000, 0.1, 1, seed=0)
        report = simulate_rehash(view, 1_000_000, seed=0, max_probes=MAX_PROBES)
        assert report.invalid == 0
        assert report.passed
        assert report.fallback_fraction <= 10 * 0.1 ** 8
        assert report.moved_fraction == pytest.approx(0.1, abs=0.005)
        assert sum(report.probe_histogram.values()) == 1_000_000

    @pytest.mark.parametrize("fraction", [0.05, 0.1, 0.25])
    def test_rerouted_probe_count(self, fraction):
        """Keys off an unavailable home bucket need about 1/(1-q) probes on average."""
        view = AvailabilityView.with_unavailable_fraction(1000, fraction, 1, seed=3)
        report = simulate_rehash(view, 200_000, seed=9)
        q = report.unavailable / report.n
        assert q == pytest.approx(fraction)
        assert report.rerouted_mean_probes == pytest.approx(1.0 / (1.0 - q), rel=0.10)
        assert report.rerouted_mean_probes >= 1.0

    def test_toggle_one_bucket(self):
        """Marking one bucket of 100 down moves about 1/100 of keys."""
        report = simulate_rehash(AvailabilityView.all_available(100, fallback=[99]), 1_000_000, seed=2, toggle=37)
        assert report.toggle_moved_fraction == pytest.approx(0.01, abs=0.002)
        assert report.toggled_bucket == 37

    def test_shed_simulation(self):
        """Shedding needs an overloaded bucket and reports its settings."""
        view = AvailabilityView.all_available(32, fallback=[31])
        with pytest.raises(ValueError):
            simulate_rehash(view, 1_000, shed_fraction=0.5)
        report = simulate_rehash(view, 100_000, shed_fraction=0.5, overloaded=3)
        assert report.shed_fraction == 0.5
        assert report.moved_fraction == pytest.approx(0.5 / 32, abs=0.003)

    def test_deterministic(self):
        """Identical arguments give identical reports."""
        view = AvailabilityView.with_unavailable_fraction(200, 0.25, 2, seed=8)
        assert simulate_rehash(view, 50_000, seed=5) == simulate_rehash(view, 50_000, seed=5)
