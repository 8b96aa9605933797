"""Tests for the lookup-latency benchmark."""

import pytest

from src.bench import BenchReport, BenchPoint, format_ns, run_benchmark, time_batch


class TestTimeBatch:
    """Tests for one timed pass."""

    def test_returns_positive_latency_and_checksum(self):
        """Latency is positive and the checksum folds every result."""
        per_call, acc = time_batch(lambda k, n: k % n, [1, 2, 3], 10)
        assert per_call > 0
        assert acc == 1 ^ 2 ^ 3


class TestRunBenchmark:
    """Tests for the benchmark driver (small runs; timings not asserted)."""

    def test_report_shape(self):
        """One point per (algorithm, n) with the requested repetitions."""
        report = run_benchmark(["power", "jump"], [16, 256], keys=500, reps=3, warmup=50)
        assert len(report.points) == 4
        for p in report.points:
            assert p.mean_ns > 0
            assert p.stddev_ns >= 0
            assert p.reps == 3
        assert report.point("jump", 256).n == 256

    def test_checksum_is_deterministic(self):
        """Lookups are real: the accumulated checksum depends only on keys and seed."""
        a = run_benchmark(["power"], [100], keys=300, reps=2, warmup=0, seed=5)
        b = run_benchmark(["power"], [100], keys=300, reps=2, warmup=0, seed=5)
        assert a.checksum == b.checksum

    def test_small_runs_warn(self, caplog):
        """Undersized runs still work but log a warning."""
        run_benchmark(["mod"], [16], keys=100, reps=1, warmup=0)
        assert "below recommended size" in caplog.text

    def test_unknown_algorithm(self):
        """Only power, jump and mod can be benchmarked."""
        with pytest.raises(ValueError):
            run_benchmark(["ring"], [16], keys=10, reps=1)

    def test_invalid_bucket_count(self):
        """Bucket counts are validated up front."""
        with pytest.raises(ValueError):
            run_benchmark(["power"], [0], keys=10, reps=1)

    def test_missing_point(self):
        """Asking for an unmeasured point raises KeyError."""
        report = BenchReport(algorithms=["power"], buckets=[16], keys_per_run=1, warmup=0)
        with pytest.raises(KeyError):
            report.point("power", 16)

    def test_ratio(self):
        """ratio divides latencies."""
        report = BenchReport(algorithms=["jump"], buckets=[4, 8], keys_per_run=1, warmup=0)
        report.points = [BenchPoint("jump", 4, 10.0, 0.0, 5), BenchPoint("jump", 8, 25.0, 0.0, 5)]
        assert report.ratio("jump", 8, 4) == 2.5


class TestFormatNs:
    """Tests for human-readable durations."""

    @pytest.mark.parametrize("ns,text", [(250, "250 ns"), (12_500, "12.5 us"), (25_000_000, "25.0 ms")])
    def test_units(self, ns, text):
        """Units switch at 10 us and 10 ms."""
        assert format_ns(ns) == text


@pytest.mark.slow
class TestLatencyShape:
    """Ordinal latency claims (run with -m slow)."""

    def test_power_flat_jump_grows(self):
        """Power stays flat from 2^8 to 2^24 buckets while jump at least doubles."""
        report = run_benchmark(["power", "jump"], [1 << 8, 1 << 24], keys=100_000, reps=5, warmup=10_000)
        assert report.ratio("power", 1 << 24, 1 << 8) <= 1.5
        assert report.ratio("jump", 1 << 24, 1 << 8) >= 2.0
        assert report.point("power", 1 << 24).mean_ns < report.point("jump", 1 << 24).mean_ns
