"""Benchmark harness: location overlap, macro/micro precision and recall with
zero-denominator exclusion, new-warning counts, and prompt-size accounting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .model import AnswerReport, Location, OutputSchema, Question

KEY_FILE_LINE = "file_line"
KEY_FILE_LINE_COL = "file_line_col"


def project(loc: Location, key: str) -> tuple:
    if key == KEY_FILE_LINE:
        return (loc.file, loc.line)
    if key == KEY_FILE_LINE_COL:
        return (loc.file, loc.line, loc.column)
    raise ValueError(f"unknown matching key {key!r}")


def _keyset(locs: set[Location], key: str) -> set[tuple]:
    return {project(loc, key) for loc in locs}


@dataclass
class BenchmarkCase:
    id: str
    reference: set[Location]
    found: set[Location]
    question: Question | None = None
    db_id: str = ""


@dataclass
class Metrics:
    macro_precision: float | None
    macro_recall: float | None
    macro_excluded_precision: int
    macro_excluded_recall: int
    micro_precision: float | None
    micro_recall: float | None
    prompt_size_median: int | None = None


def overlap(found: set[Location], reference: set[Location], key: str = KEY_FILE_LINE) -> int:
    """Number of reference locations matched by some found location under key."""
    return len(_keyset(found, key) & _keyset(reference, key))


def case_precision(case: BenchmarkCase, key: str = KEY_FILE_LINE) -> float | None:
    found = _keyset(case.found, key)
    if not found:
        return None
    return len(found & _keyset(case.reference, key)) / len(found)


def case_recall(case: BenchmarkCase, key: str = KEY_FILE_LINE) -> float | None:
    reference = _keyset(case.reference, key)
    if not reference:
        return None
    return len(_keyset(case.found, key) & reference) / len(reference)


def macro_metrics(cases: list[BenchmarkCase], key: str = KEY_FILE_LINE) -> Metrics:
    precisions = [p for c in cases if (p := case_precision(c, key)) is not None]
    recalls = [r for c in cases if (r := case_recall(c, key)) is not None]
    return Metrics(
        macro_precision=sum(precisions) / len(precisions) if precisions else None,
        macro_recall=sum(recalls) / len(recalls) if recalls else None,
        macro_excluded_precision=len(cases) - len(precisions),
        macro_excluded_recall=len(cases) - len(recalls),
        micro_precision=None,
        micro_recall=None,
    )


def micro_metrics(
    cases: list[BenchmarkCase], key: str = KEY_FILE_LINE
) -> tuple[float | None, float | None]:
    """Pooled precision and recall over key-deduplicated locations."""
    matched = sum(overlap(c.found, c.reference, key) for c in cases)
    total_found = sum(len(_keyset(c.found, key)) for c in cases)
    total_ref = sum(len(_keyset(c.reference, key)) for c in cases)
    precision = matched / total_found if total_found else None
    recall = matched / total_ref if total_ref else None
    return precision, recall


def new_warning_fraction(case: BenchmarkCase, key: str = KEY_FILE_LINE) -> tuple[int, int]:
    """(reported, new): locations the system reported, and those the reference
    analyzer did not."""
    found = _keyset(case.found, key)
    reference = _keyset(case.reference, key)
    return len(found), len(found - reference)


def compute_metrics(cases: list[BenchmarkCase], key: str = KEY_FILE_LINE) -> Metrics:
    metrics = macro_metrics(cases, key)
    metrics.micro_precision, metrics.micro_recall = micro_metrics(cases, key)
    return metrics


def scatter_reference_overlap(
    cases: list[BenchmarkCase], key: str = KEY_FILE_LINE
) -> list[tuple[str, int, int]]:
    """(case id, |reference|, overlap) per case."""
    return [
        (c.id, len(_keyset(c.reference, key)), overlap(c.found, c.reference, key))
        for c in cases
    ]


def scatter_found_new(
    cases: list[BenchmarkCase], key: str = KEY_FILE_LINE
) -> list[tuple[str, int, int]]:
    """(case id, |found|, new warnings) per case."""
    return [(c.id, *new_warning_fraction(c, key)) for c in cases]


def scatter_csv(rows: list[tuple[str, int, int]], x_name: str, y_name: str) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["case", x_name, y_name])
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def prompt_size_stats(reports: list[AnswerReport]) -> int | None:
    return lower_median([r.prompt_bytes_total for r in reports])


def lower_median(values: list[int]) -> int | None:
    """Median; for even-length input, the lower of the two middle values."""
    if not values:
        return None
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def parse_locations(text: str) -> set[Location]:
    """One location per line: path:line or path:line:col."""
    locs = set()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.rsplit(":", 2)
        if len(parts) == 3 and parts[1].isdigit() and parts[2].isdigit():
            locs.add(Location(file=parts[0], line=int(parts[1]), column=int(parts[2])))
        else:
            file, _, lineno = line.rpartition(":")
            locs.add(Location(file=file, line=int(lineno)))
    return locs


def parse_task(text: str) -> Question:
    """task.txt layout: goal paragraph, blank line, one 'name: description'
    line per output column."""
    goal_part, _, schema_part = text.partition("\n\n")
    columns = []
    for line in schema_part.splitlines():
        line = line.strip()
        if not line:
            continue
        name, _, desc = line.partition(":")
        columns.append((name.strip(), desc.strip()))
    if not columns:
        raise ValueError("task.txt has no schema columns after the blank line")
    return Question(goal=goal_part.strip(), schema=OutputSchema(tuple(columns)))


def load_cases(root: str | Path) -> list[BenchmarkCase]:
    """One directory per case: task.txt, reference.locations, found.locations,
    and optionally a db file naming the engine database."""
    cases = []
    for case_dir in sorted(p for p in Path(root).iterdir() if p.is_dir()):
        task_file = case_dir / "task.txt"
        question = (
            parse_task(task_file.read_text(encoding="utf-8"))
            if task_file.exists()
            else None
        )
        reference = parse_locations(
            (case_dir / "reference.locations").read_text(encoding="utf-8")
        )
        found_file = case_dir / "found.locations"
        found = (
            parse_locations(found_file.read_text(encoding="utf-8"))
            if found_file.exists()
            else set()
        )
        db_file = case_dir / "db"
        db_id = db_file.read_text(encoding="utf-8").strip() if db_file.exists() else ""
        cases.append(
            BenchmarkCase(
                id=case_dir.name,
                reference=reference,
                found=found,
                question=question,
                db_id=db_id,
            )
        )
    return cases
