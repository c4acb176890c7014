"""Schema conformance, table rendering, and machine-readable exports."""

from __future__ import annotations

import csv
import io
import json

from .engine import RawResultSet
from .errors import NoLocationCell, SchemaMismatch
from .model import Cell, Location, OutputSchema, ResultTable

SARIF_VERSION = "2.1.0"
TOOL_NAME = "askcode"


def conform(raw: RawResultSet, schema: OutputSchema) -> ResultTable:
    """Fit raw engine rows to the requested schema.

    Over-wide rows are truncated to the schema arity with a warning attached;
    under-wide rows cannot be conformed.
    """
    warnings = []
    rows: list[tuple[Cell, ...]] = []
    arity = schema.arity
    for row in raw:
        if len(row) < arity:
            raise SchemaMismatch(len(row), arity)
        rows.append(tuple(row[:arity]))
    if any(len(row) > arity for row in raw):
        widest = max(len(row) for row in raw)
        warnings.append(
            f"result rows had {widest} columns; truncated to the {arity}-column schema"
        )
    return ResultTable(schema=schema, rows=rows, warnings=warnings)


def _cell_text(cell: Cell) -> str:
    return str(cell)


def render(table: ResultTable) -> str:
    """Aligned plain-text table; locations print as path:line:col."""
    headers = table.schema.column_names()
    grid = [headers] + [[_cell_text(c) for c in row] for row in table.rows]
    widths = [max(len(r[i]) for r in grid) for i in range(len(headers))]
    lines = []
    for r, row in enumerate(grid):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if r == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _cell_to_json(cell: Cell) -> dict:
    if isinstance(cell, Location):
        rec = {"type": "location", "file": cell.file, "line": cell.line, "column": cell.column}
        if cell.end_line is not None:
            rec["end_line"] = cell.end_line
        if cell.end_column is not None:
            rec["end_column"] = cell.end_column
        return rec
    return {"type": "text", "value": cell}


def _cell_from_json(rec: dict) -> Cell:
    if rec["type"] == "location":
        return Location(
            file=rec["file"],
            line=rec["line"],
            column=rec.get("column", 0),
            end_line=rec.get("end_line"),
            end_column=rec.get("end_column"),
        )
    return rec["value"]


def export_csv(table: ResultTable) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(table.schema.column_names())
    for row in table.rows:
        writer.writerow([_cell_text(c) for c in row])
    return buf.getvalue().encode("utf-8")


def export_structured(table: ResultTable) -> bytes:
    lines = [
        json.dumps(
            {
                "schema": [[name, desc] for name, desc in table.schema.columns],
                "warnings": table.warnings,
            }
        )
    ]
    for row in table.rows:
        lines.append(json.dumps([_cell_to_json(c) for c in row]))
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_structured(data: bytes) -> ResultTable:
    lines = [line for line in data.decode("utf-8").splitlines() if line.strip()]
    header = json.loads(lines[0])
    schema = OutputSchema(tuple((name, desc) for name, desc in header["schema"]))
    rows = [
        tuple(_cell_from_json(rec) for rec in json.loads(line)) for line in lines[1:]
    ]
    return ResultTable(schema=schema, rows=rows, warnings=list(header.get("warnings", [])))


def export_sarif(table: ResultTable) -> bytes:
    """Minimal SARIF log: one result per row, anchored at the row's first
    location cell."""
    results = []
    for i, row in enumerate(table.rows):
        location = next((c for c in row if isinstance(c, Location)), None)
        if location is None:
            raise NoLocationCell(f"row {i} has no location cell")
        region: dict = {"startLine": location.line}
        if location.column:
            region["startColumn"] = location.column
        if location.end_line is not None:
            region["endLine"] = location.end_line
        if location.end_column is not None:
            region["endColumn"] = location.end_column
        text_cells = [c for c in row if isinstance(c, str)]
        message = "; ".join(text_cells) if text_cells else _cell_text(location)
        results.append(
            {
                "message": {"text": message},
                "locations": [
                    {
                        "physicalLocation": {
                            "artifactLocation": {"uri": location.file},
                            "region": region,
                        }
                    }
                ],
            }
        )
    log = {
        "version": SARIF_VERSION,
        "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
        "runs": [{"tool": {"driver": {"name": TOOL_NAME}}, "results": results}],
    }
    return (json.dumps(log, indent=2) + "\n").encode("utf-8")


def export(table: ResultTable, format: str) -> bytes:
    if format == "csv":
        return export_csv(table)
    if format == "structured":
        return export_structured(table)
    if format == "sarif":
        return export_sarif(table)
    raise ValueError(f"unknown export format {format!r}")
