"""Command-line entry point."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bench as bench_mod
from . import docs as docs_mod
from . import pipeline, results
from .cache import QueryCache
from .config import Config, load_config
from .engine import CodeQLAdapter, DatabaseHandle, FakeEngine
from .errors import AskcodeError
from .llm import (
    HttpTransport,
    RecordingTransport,
    ReplayTransport,
    Session,
    load_cassette,
)
from .model import Outcome, OutputSchema, Question, QueryStatus

EXIT_BY_OUTCOME = {
    Outcome.VALIDATED: 0,
    Outcome.FAILED: 1,
    Outcome.BUDGET_EXHAUSTED_BEST_EFFORT: 2,
}


def parse_schema_flag(value: str) -> OutputSchema:
    """Inline `name:description;...` or `@file` with one column per line."""
    if value.startswith("@"):
        text = Path(value[1:]).read_text(encoding="utf-8")
        parts = [line for line in text.splitlines() if line.strip()]
    else:
        parts = [p for p in value.split(";") if p.strip()]
    columns = []
    for part in parts:
        name, _, desc = part.partition(":")
        if not name.strip():
            raise click.UsageError(f"bad schema column {part!r}")
        columns.append((name.strip(), desc.strip()))
    if not columns:
        raise click.UsageError("schema must have at least one column")
    try:
        return OutputSchema(tuple(columns))
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def build_engine(cfg: Config):
    if cfg.engine == "fake":
        return FakeEngine.from_file(cfg.engine_fixtures)
    if cfg.engine == "codeql":
        return CodeQLAdapter(cfg.codeql_path)
    raise click.UsageError(f"unknown engine {cfg.engine!r}")


def build_db_handle(cfg: Config, db: str) -> DatabaseHandle:
    if cfg.engine == "codeql":
        return DatabaseHandle(id=Path(db).name, root=str(Path(db).resolve()))
    return DatabaseHandle(id=db, root="")


def build_transport(cfg: Config):
    if cfg.mode == "replay":
        return ReplayTransport.from_file(cfg.cassette)
    live = HttpTransport(cfg.llm_endpoint, cfg.llm_model, cfg.credential_env)
    if cfg.mode == "record":
        return RecordingTransport(live)
    return live


@click.group()
def main() -> None:
    """Answer analytical questions about a codebase with synthesized,
    self-tested analysis queries."""


def _write_exports(table, export_specs: tuple[str, ...]) -> None:
    for spec in export_specs:
        fmt, _, path = spec.partition("=")
        if fmt not in ("csv", "structured", "sarif") or not path:
            raise click.UsageError(f"--export expects format=path, got {spec!r}")
        Path(path).write_bytes(results.export(table, fmt))


@main.command()
@click.option("--db", required=True, help="Engine database (id for the fake engine, path for codeql).")
@click.option("--question", "question_text", required=True)
@click.option("--schema", "schema_text", required=True)
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["live", "record", "replay"]), default=None)
@click.option("--no-cache", is_flag=True, help="Force a full synthesis run.")
@click.option("--export", "exports", multiple=True, help="format=path; repeatable.")
@click.option("--transcript", "transcript_path", default=None, type=click.Path())
def ask(db, question_text, schema_text, config_path, mode, no_cache, exports, transcript_path):
    """Synthesize and run a query answering QUESTION over DB."""
    schema = parse_schema_flag(schema_text)
    question = Question(goal=question_text, schema=schema)
    cfg = load_config(config_path, mode=mode)
    engine = build_engine(cfg)
    handle = build_db_handle(cfg, db)
    cache = QueryCache(cfg.cache_dir)

    if not no_cache:
        hit = cache.get(question)
        if hit is not None:
            result = engine.compile(_as_query(hit.source))
            if result.ok:
                raw = engine.execute(result.artifact, handle)
                table = results.conform(raw, schema)
                click.echo(results.render(table))
                for warning in table.warnings:
                    click.echo(f"warning: {warning}", err=True)
                click.echo(f"provenance: cache ({hit.key[:12]})")
                click.echo("query:\n" + hit.source)
                _write_exports(table, exports)
                sys.exit(0)
            click.echo("warning: cached query no longer compiles; re-synthesizing", err=True)

    index = docs_mod.load_index(cfg.index_path)
    transport = build_transport(cfg)
    session = Session(transport=transport)
    try:
        report = pipeline.answer_question(
            question, handle, engine, index, session, cfg.budget
        )
    except AskcodeError as exc:
        raise click.ClickException(str(exc)) from exc

    if cfg.mode == "record" and cfg.cassette:
        transport.save(cfg.cassette)
    if transcript_path:
        Path(transcript_path).write_bytes(pipeline.export_transcript(report.transcript))

    if report.table is not None:
        click.echo(results.render(report.table))
        for warning in report.table.warnings:
            click.echo(f"warning: {warning}", err=True)
        _write_exports(report.table, exports)
    click.echo(f"outcome: {report.outcome.value}")
    click.echo(f"prompt bytes: {report.prompt_bytes_total}")
    if report.final_query is not None:
        click.echo("query:\n" + report.final_query.source)
    if report.outcome is Outcome.VALIDATED and report.final_query is not None:
        cache.put(question, report.final_query.source)
    sys.exit(EXIT_BY_OUTCOME[report.outcome])


def _as_query(source: str):
    from .model import CandidateQuery

    return CandidateQuery(source=source)


@main.command("bench")
@click.option("--cases", "cases_dir", required=True, type=click.Path(exists=True))
@click.option("--key", type=click.Choice([bench_mod.KEY_FILE_LINE, bench_mod.KEY_FILE_LINE_COL]),
              default=bench_mod.KEY_FILE_LINE)
@click.option("--out", "out_dir", default=None, type=click.Path())
def bench(cases_dir, key, out_dir):
    """Score found.locations against reference.locations for each case."""
    cases = bench_mod.load_cases(cases_dir)
    if not cases:
        raise click.UsageError(f"no case directories under {cases_dir}")
    metrics = bench_mod.compute_metrics(cases, key)

    def fmt(value, excluded=None):
        shown = "undefined" if value is None else f"{value:.3f}"
        return shown + (f" ({excluded} removed)" if excluded else "")

    click.echo(f"cases: {len(cases)}")
    click.echo(f"macro precision: {fmt(metrics.macro_precision, metrics.macro_excluded_precision)}")
    click.echo(f"macro recall:    {fmt(metrics.macro_recall, metrics.macro_excluded_recall)}")
    click.echo(f"micro precision: {fmt(metrics.micro_precision)}")
    click.echo(f"micro recall:    {fmt(metrics.micro_recall)}")

    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(
            json.dumps(metrics.__dict__, indent=2) + "\n", encoding="utf-8"
        )
        (out / "reference_overlap.csv").write_bytes(
            bench_mod.scatter_csv(
                bench_mod.scatter_reference_overlap(cases, key), "reference", "overlap"
            )
        )
        (out / "found_new.csv").write_bytes(
            bench_mod.scatter_csv(
                bench_mod.scatter_found_new(cases, key), "found", "new"
            )
        )


@main.group()
def cache() -> None:
    """Inspect and maintain the synthesized-query cache."""


@cache.command("list")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def cache_list(config_path):
    cfg = load_config(config_path)
    for entry in QueryCache(cfg.cache_dir).list_entries():
        click.echo(f"{entry.key[:12]}  [{entry.language}] {entry.goal}")


@cache.command("clear")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def cache_clear(config_path):
    cfg = load_config(config_path)
    count = QueryCache(cfg.cache_dir).clear()
    click.echo(f"removed {count} entries")


@cache.command("show")
@click.argument("key")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def cache_show(key, config_path):
    cfg = load_config(config_path)
    store = QueryCache(cfg.cache_dir)
    entry = next((e for e in store.list_entries() if e.key.startswith(key)), None)
    if entry is None:
        raise click.ClickException(f"no cache entry matching {key!r}")
    click.echo(entry.source)


@main.group()
def replay() -> None:
    """Cassette maintenance."""


@replay.command("verify")
@click.argument("cassette", type=click.Path(exists=True))
def replay_verify(cassette):
    """Check that a cassette file is well-formed."""
    try:
        entries = load_cassette(cassette)
    except (json.JSONDecodeError, KeyError) as exc:
        raise click.ClickException(f"malformed cassette: {exc}") from exc
    for i, entry in enumerate(entries):
        if len(entry.digest) != 64 or not all(c in "0123456789abcdef" for c in entry.digest):
            raise click.ClickException(f"entry {i}: bad digest {entry.digest!r}")
    click.echo(f"ok: {len(entries)} exchanges")


@replay.command("record")
@click.option("--db", required=True)
@click.option("--question", "question_text", required=True)
@click.option("--schema", "schema_text", required=True)
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.pass_context
def replay_record(ctx, db, question_text, schema_text, config_path):
    """Run one ask in record mode, writing the configured cassette."""
    ctx.invoke(
        ask,
        db=db,
        question_text=question_text,
        schema_text=schema_text,
        config_path=config_path,
        mode="record",
        no_cache=True,
        exports=(),
        transcript_path=None,
    )


if __name__ == "__main__":
    main()
