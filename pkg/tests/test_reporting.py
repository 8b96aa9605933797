"""Tests for CSV and table rendering."""

import numpy as np
import pytest

from src.bench import BenchPoint, BenchReport
from src.rehash import AvailabilityView, simulate_rehash
from src.reporting import (
    Table,
    bench_table,
    bench_text,
    distribution_table,
    format_value,
    iteration_table,
    probe_histogram_table,
    rehash_table,
    remap_sample_table,
    remap_table,
    write_output,
)
from src.verify import check_uniformity, measure_g_iterations, measure_remap


class TestFormatValue:
    """Tests for cell formatting."""

    @pytest.mark.parametrize(
        "value,text",
        [
            (3, "3"),
            (np.int64(-7), "-7"),
            (np.uint64(1 << 63), str(1 << 63)),
            (0.1234567, "0.123457"),
            (np.float64(1e-9), "1e-09"),
            (None, ""),
            (True, "pass"),
            (np.bool_(False), "fail"),
            ("power", "power"),
        ],
    )
    def test_cells(self, value, text):
        """Integers unquoted, reals with 6 significant digits, booleans as pass/fail."""
        assert format_value(value) == text


class TestTable:
    """Tests for the generic table."""

    def test_csv_layout(self):
        """Header row, LF endings, formatted cells."""
        table = Table(title="t", columns=["a", "b"], rows=[[1, 0.5], ["x", None]])
        assert table.to_csv() == "a,b\n1,0.5\nx,\n"

    def test_text_layout(self):
        """Title, notes, aligned header and rule."""
        table = Table(title="Title", columns=["name", "n"], rows=[["power", 11]], notes=["note"])
        lines = table.to_text().splitlines()
        assert lines[0] == "Title"
        assert lines[1] == "  note"
        assert lines[2].split() == ["name", "n"]
        assert set(lines[3].replace(" ", "")) == {"-"}
        assert lines[4].split() == ["power", "11"]

    def test_csv_notes_lead_as_comments(self):
        """Notes precede the header as '# ' lines so CSV files keep the pass criteria."""
        table = Table(title="t", columns=["a"], rows=[[1]], notes=["alpha=0.001", "grid=16"])
        assert table.to_csv() == "# alpha=0.001\n# grid=16\na\n1\n"
        assert table.render("csv") == table.to_csv()
        assert table.render("table") == table.to_text()

    def test_render_rejects_unknown_format(self):
        """Only csv and table exist."""
        with pytest.raises(ValueError):
            Table(title="t", columns=["a"]).render("json")


class TestReportTables:
    """Tests for report converters."""

    def test_distribution_csv(self):
        """One row per report with the pass flag last."""
        report = check_uniformity("power", 11, 100_000, seed=1)
        csv = distribution_table([report]).to_csv().splitlines()
        assert csv[0] == "# pass: chi_square <= Wilson-Hilferty critical value at alpha=0.001"
        csv = csv[1:]
        assert csv[0] == "algorithm,n,low,samples,chi_square,df,critical_value,alpha,max_abs_deviation,result"
        assert csv[1].startswith("power,11,0,100000,")
        assert csv[1].endswith(",pass")

    def test_remap_tables(self):
        """Aggregate row plus a sample of (key, old, new)."""
        report = measure_remap("power", 100, 101, 20_000, seed=1, sample_size=3)
        assert remap_table([report]).rows[0][:3] == ["power", 100, 101]
        sample = remap_sample_table(report)
        assert sample.columns == ["key", "hash(key,100)", "hash(key,101)"]
        assert len(sample.rows) == 3

    def test_iteration_table(self):
        """Per-n rows followed by an overall row."""
        report = measure_g_iterations([11, 1001], 50_000, seed=1)
        table = iteration_table(report)
        assert [row[0] for row in table.rows] == ["n=11", "n=1001", "all"]

    def test_rehash_tables(self):
        """Summary row and probe histogram."""
        report = simulate_rehash(AvailabilityView.with_unavailable_fraction(50, 0.2, 1, seed=1), 10_000)
        assert rehash_table(report).rows[0][0] == 50
        assert "probe bound: rerouted_mean_probes <= 1/(1-q) = 1.25 at q=0.2" in rehash_table(report).notes
        hist = probe_histogram_table(report)
        assert sum(row[1] for row in hist.rows) == 10_000

    def test_bench_tables(self):
        """CSV columns are fixed; text uses adaptive units."""
        report = BenchReport(algorithms=["power"], buckets=[16], keys_per_run=100, warmup=0)
        report.points.append(BenchPoint("power", 16, 123.4, 5.0, 5))
        assert bench_table(report).to_csv() == (
            "# keys per run=100, warmup=0, bucket grid=16\n"
            "algorithm,n,mean_ns,stddev_ns,reps\n"
            "power,16,123.4,5,5\n"
        )
        assert "123 ns" in bench_text(report)


class TestWriteOutput:
    """Tests for writing results to disk."""

    def test_creates_parent_and_uses_lf(self, tmp_path):
        """Parent directories are created and newlines stay LF."""
        path = tmp_path / "nested" / "out.csv"
        write_output("a,b\n1,2\n", path)
        assert path.read_bytes() == b"a,b\n1,2\n"
