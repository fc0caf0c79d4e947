"""Command-line front end: script runner and interactive REPL."""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from . import interp
from . import snapshot as snap
from .coql.parser import Parser
from .coql.tokens import tokenize
from .errors import CoqlError, EngineError


def _load_db(session: interp.Session, db_path: str | None):
    db_path = db_path or os.environ.get("CONCEPTDB_DB")
    if db_path and Path(db_path).exists():
        session.db = snap.snapshot_load(db_path)
    return db_path


@click.group()
def main():
    """conceptdb: an embedded concept-oriented database with COQL."""


@main.command()
@click.argument("script", type=click.Path(exists=True, dir_okay=False))
@click.option("--db", "db_path", default=None, help="Snapshot file to open first.")
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]),
              default="table", help="Query result format.")
def run(script, db_path, fmt):
    """Run a COQL script file."""
    session = interp.new_session(output_format=fmt)
    try:
        _load_db(session, db_path)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except EngineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    try:
        report = interp.run_script_file(session, script)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(report.output, nl=False)
    sys.exit(1 if report.failed else 0)


def _balanced(text: str) -> bool:
    depth = 0
    in_string = False
    for ch in text:
        if in_string:
            if ch == "'":
                in_string = False
        elif ch == "'":
            in_string = True
        elif ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
    return depth <= 0 and not in_string


@main.command()
@click.option("--db", "db_path", default=None, help="Snapshot file to open first.")
def repl(db_path):
    """Interactive COQL prompt; statements run once parentheses balance.

    Meta-commands: .schema .collections .load <csv> <collection>
    .save <path> .open <path> .quit
    """
    session = interp.new_session()
    try:
        opened = _load_db(session, db_path)
    except (OSError, EngineError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2 if isinstance(exc, OSError) else 1)
    interactive = sys.stdin.isatty()
    if interactive and opened:
        click.echo(f"opened {opened}")
    buffer = ""
    while True:
        if interactive:
            click.echo("coql> " if not buffer else "....> ", nl=False)
        line = sys.stdin.readline()
        if not line:
            break
        stripped = line.strip()
        if not buffer and stripped.startswith("."):
            try:
                out = interp.execute_meta(session, stripped)
            except OSError as exc:
                click.echo(f"error: {exc}", err=True)
                sys.exit(2)
            except EngineError as exc:
                click.echo(f"error: {exc}")
                continue
            if out is interp.QUIT:
                break
            click.echo(out)
            continue
        buffer += line
        if not buffer.strip() or not _balanced(buffer):
            continue
        text, buffer = buffer, ""
        try:
            parser = Parser(tokenize(text))
            for stmt in parser.statements():
                click.echo(interp.execute_statement(session, stmt))
        except CoqlError as exc:
            click.echo(f"error at line {exc.line}, col {exc.column}: {exc.args[0]}")
        except EngineError as exc:
            click.echo(f"error: {exc}")
    sys.exit(0)


if __name__ == "__main__":
    main()
