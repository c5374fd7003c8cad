"""Versioned CSV files shared by the CLI, the spectrum export and the plots.

Every file starts with a schema line ``# nrlz-<kind> v<version>`` followed by
a header row.  Floats are written with 17 significant digits so that values
round-trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import re

SCHEMA_VERSION = 1

HEADERS = {
    "curve": ["alpha", "delta", "D", "gamma", "method", "P", "stderr"],
    "phase": ["alpha", "delta", "D", "gamma", "method", "P", "stderr"],
    "compare": ["alpha", "delta", "D", "gamma", "method", "P", "stderr"],
    "spectrum": ["t", "re_e_plus", "im_e_plus", "re_e_minus", "im_e_minus"],
    "eps": ["t_ep", "kind"],
}

_SCHEMA_RE = re.compile(r"^# nrlz-([a-z]+) v(\d+)$")


class SchemaError(ValueError):
    """A CSV file does not carry a schema line this version understands."""


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def format_row(row) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([fmt(x) for x in row])
    return buf.getvalue()


def row_checksum(row) -> str:
    return hashlib.sha256(format_row(row).encode()).hexdigest()


def file_checksum(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_csv(path, kind: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# nrlz-{kind} v{SCHEMA_VERSION}\n")
        fh.write(format_row(HEADERS[kind]))
        for row in rows:
            fh.write(format_row(row))


def read_csv(path) -> tuple[str, list[dict[str, str]]]:
    """Return ``(kind, rows)``; raises :class:`SchemaError` on unknown files."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        m = _SCHEMA_RE.match(first)
        if not m or m.group(1) not in HEADERS:
            raise SchemaError(f"{path}: missing or unknown schema line {first!r}")
        if int(m.group(2)) != SCHEMA_VERSION:
            raise SchemaError(f"{path}: schema version {m.group(2)} not supported")
        kind = m.group(1)
        reader = csv.DictReader(fh)
        if reader.fieldnames != HEADERS[kind]:
            raise SchemaError(f"{path}: header {reader.fieldnames} does not match {kind}")
        return kind, list(reader)
