"""Benchmark report rendering: text, csv, json.

Column order is fixed by BenchRow.COLUMNS; csv and json round-trip back
into an equal BenchReport.  The json layout is pinned by the shipped
report_schema.json.
"""

from __future__ import annotations

import csv
import io
import json

from .harness import BenchReport, BenchRow

REPORT_VERSION = 1

_INT_COLUMNS = {
    "repetitions",
    "metadata_us",
    "retrieval_us",
    "preprocess_us",
    "total_us",
    "bytes_transferred",
    "images",
}


def to_json(report: BenchReport) -> str:
    doc = {
        "version": REPORT_VERSION,
        "meta": report.meta,
        "rows": [
            {col: getattr(row, col) for col in BenchRow.COLUMNS}
            for row in report.rows
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def from_json(text: str) -> BenchReport:
    doc = json.loads(text)
    rows = [BenchRow(**{col: row[col] for col in BenchRow.COLUMNS}) for row in doc["rows"]]
    return BenchReport(rows=rows, meta=doc.get("meta", {}))


def to_csv(report: BenchReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BenchRow.COLUMNS)
    for row in report.rows:
        writer.writerow([getattr(row, col) for col in BenchRow.COLUMNS])
    return buf.getvalue()


def from_csv(text: str) -> BenchReport:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for record in reader:
        values = dict(zip(header, record))
        kwargs = {
            col: int(values[col]) if col in _INT_COLUMNS else values[col]
            for col in BenchRow.COLUMNS
        }
        rows.append(BenchRow(**kwargs))
    return BenchReport(rows=rows, meta={})


def to_text(report: BenchReport) -> str:
    lines = []
    if report.meta:
        lines.append(
            "bench: mode={mode} repetitions={repetitions} resize={resize} "
            "clients={clients}".format(
                mode=report.meta.get("mode", "?"),
                repetitions=report.meta.get("repetitions", "?"),
                resize=report.meta.get("resize", "?"),
                clients=report.meta.get("clients", "?"),
            )
        )
    header = (
        f"{'query':<6}{'mode':<9}{'metadata':>10}{'retrieval':>11}"
        f"{'preproc':>9}{'total':>10}{'bytes':>12}{'images':>8}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    for row in report.rows:
        lines.append(
            f"{row.query:<6}{row.mode:<9}"
            f"{_ms(row.metadata_us):>10}{_ms(row.retrieval_us):>11}"
            f"{_ms(row.preprocess_us):>9}{_ms(row.total_us):>10}"
            f"{row.bytes_transferred:>12}{row.images:>8}"
        )
    return "\n".join(lines) + "\n"


def _ms(us: int) -> str:
    return f"{us / 1000:.1f}ms"


def merge(*reports: BenchReport) -> BenchReport:
    rows = [row for report in reports for row in report.rows]
    meta = dict(reports[0].meta) if reports else {}
    modes = {row.mode for row in rows}
    meta["mode"] = modes.pop() if len(modes) == 1 else "both"
    return BenchReport(rows=rows, meta=meta)


def render(report: BenchReport, fmt: str) -> str:
    if fmt == "text":
        return to_text(report)
    if fmt == "csv":
        return to_csv(report)
    if fmt == "json":
        return to_json(report)
    raise ValueError(f"unknown report format {fmt!r}")
