"""Render reports as plot-ready CSV or human-readable tables.

CSV output is byte-stable: report notes (pass criteria, alpha, grids) as
leading "# " lines, then a header row, LF line endings, integers unquoted,
reals with 6 significant digits, rows in a fixed order.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .bench import BenchReport, format_ns
from .rehash import RehashReport
from .verify import (
    ITERATION_MEAN_BOUND,
    ITERATION_VARIANCE_BOUND,
    ConsistencyReport,
    DistributionReport,
    IterationReport,
    RemapReport,
)

logger = logging.getLogger(__name__)


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "pass" if value else "fail"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


@dataclass
class Table:
    title: str
    columns: List[str]
    rows: List[list] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def to_csv(self) -> str:
        """Notes become leading "# " lines, followed by the header row and data."""
        buf = io.StringIO()
        for note in self.notes:
            buf.write(f"# {note}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def to_text(self) -> str:
        cells = [self.columns] + [[format_value(v) for v in row] for row in self.rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(self.columns))]
        lines = [self.title]
        lines.extend(f"  {note}" for note in self.notes)
        lines.append("  ".join(c.rjust(w) for c, w in zip(self.columns, widths)))
        lines.append("  ".join("-" * w for w in widths))
        for row in cells[1:]:
            lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "table":
            return self.to_text()
        raise ValueError(f"unknown output format {fmt!r}; use csv or table")


def distribution_table(reports: Sequence[DistributionReport]) -> Table:
    alpha = reports[0].alpha if reports else 0.0
    table = Table(
        title="Distribution check (Pearson chi-square)",
        columns=[
            "algorithm", "n", "low", "samples", "chi_square", "df",
            "critical_value", "alpha", "max_abs_deviation", "result",
        ],
        notes=[f"pass: chi_square <= Wilson-Hilferty critical value at alpha={alpha}"],
    )
    for r in reports:
        table.rows.append([
            r.algorithm, r.n, r.low, r.samples, r.chi_square, r.degrees_of_freedom,
            r.critical_value, r.alpha, r.max_abs_deviation, r.passed,
        ])
    return table


def histogram_table(report: DistributionReport) -> Table:
    table = Table(
        title=f"Histogram for {report.algorithm} n={report.n}",
        columns=["bucket", "count", "frequency", "expected"],
    )
    for i, count in enumerate(report.histogram.tolist()):
        table.rows.append([report.low + i, count, count / report.samples, float(report.expected[i])])
    return table


def consistency_table(reports: Sequence[ConsistencyReport]) -> Table:
    table = Table(
        title="Consistency check (exact)",
        columns=["algorithm", "property", "keys_tested", "pairs_tested", "violations", "result"],
        notes=["pass: zero violations"],
    )
    for r in reports:
        table.rows.append([r.algorithm, r.property_name, r.keys_tested, r.pairs_tested, r.violations, r.passed])
    return table


def remap_table(reports: Sequence[RemapReport]) -> Table:
    table = Table(
        title="Remap after bucket-count change",
        columns=[
            "algorithm", "n_from", "n_to", "keys", "moved", "moved_fraction",
            "expected_fraction", "illegal_moves", "result",
        ],
        notes=["pass: zero illegal moves; expected_fraction is the minimal achievable"],
    )
    for r in reports:
        table.rows.append([
            r.algorithm, r.n_from, r.n_to, r.keys, r.moved, r.moved_fraction,
            r.expected_fraction, r.illegal_moves, r.passed,
        ])
    return table


def remap_sample_table(report: RemapReport) -> Table:
    table = Table(
        title=f"Sample keys ({report.algorithm})",
        columns=["key", f"hash(key,{report.n_from})", f"hash(key,{report.n_to})"],
    )
    table.rows.extend([list(row) for row in report.sample])
    return table


def iteration_table(report: IterationReport) -> Table:
    table = Table(
        title="Algorithm-g pass counts from the lookup",
        columns=["scope", "invocations", "mean", "variance", "max", "expected_mean", "step1_fraction", "result"],
        notes=[f"pass: mean < {ITERATION_MEAN_BOUND} and variance < {ITERATION_VARIANCE_BOUND}"],
    )
    for n, stats in report.per_n.items():
        table.rows.append([
            f"n={n}", stats.invocations, stats.mean, stats.variance, stats.max, stats.expected_mean,
            report.step1_fraction[n],
            stats.mean < ITERATION_MEAN_BOUND and stats.variance < ITERATION_VARIANCE_BOUND,
        ])
    o = report.overall
    table.rows.append(["all", o.invocations, o.mean, o.variance, o.max, o.expected_mean, None, report.passed])
    return table


def rehash_table(report: RehashReport) -> Table:
    table = Table(
        title="Rehash simulation",
        columns=[
            "n", "keys", "unavailable", "fallback_size", "max_probes", "moved_fraction",
            "fallback_fraction", "mean_probes", "rerouted_mean_probes", "invalid",
            "toggle_moved_fraction", "result",
        ],
        notes=["pass: every key lands on an available or fallback bucket"],
    )
    if report.unavailable:
        q = report.unavailable / report.n
        table.notes.append(f"probe bound: rerouted_mean_probes <= 1/(1-q) = {1.0 / (1.0 - q):.6g} at q={q:.6g}")
    table.rows.append([
        report.n, report.keys, report.unavailable, report.fallback_size, report.max_probes,
        report.moved_fraction, report.fallback_fraction, report.mean_probes, report.rerouted_mean_probes,
        report.invalid, report.toggle_moved_fraction, report.passed,
    ])
    return table


def probe_histogram_table(report: RehashReport) -> Table:
    table = Table(title="Probe histogram", columns=["probes", "keys"])
    table.rows.extend([[p, c] for p, c in report.probe_histogram.items()])
    return table


def bench_table(report: BenchReport) -> Table:
    table = Table(
        title="Lookup latency",
        columns=["algorithm", "n", "mean_ns", "stddev_ns", "reps"],
        notes=[
            f"keys per run={report.keys_per_run}, warmup={report.warmup}, "
            f"bucket grid={','.join(str(n) for n in report.buckets)}",
        ],
    )
    for p in report.points:
        table.rows.append([p.algorithm, p.n, p.mean_ns, p.stddev_ns, p.reps])
    return table


def bench_text(report: BenchReport) -> str:
    """Table with adaptive ns/us/ms units for terminals."""
    table = bench_table(report)
    table.columns = ["algorithm", "n", "mean", "stddev", "reps"]
    table.rows = [[p.algorithm, p.n, format_ns(p.mean_ns), format_ns(p.stddev_ns), p.reps] for p in report.points]
    return table.to_text()


def write_output(text: str, path: Path):
    """Write rendered output with LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write(text)
    logger.info(f"Wrote {path}")
