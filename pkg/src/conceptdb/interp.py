"""Statement execution: sessions, scripts and meta-commands.

A session holds the database, script/REPL variable bindings and output
configuration.  Variables and collections are distinct lookups; variables
win.  Scripts run statements in order and stop at the first failure, so a
broken statement leaves everything before it applied.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from . import algebra as alg
from . import csvio
from . import schema as sch
from . import snapshot as snap
from . import store
from .coql import ast as A
from .coql.parser import Parser
from .coql.tokens import tokenize
from .cube import CubeResult, format_table, format_value
from .errors import CoqlError, EngineError, SchemaError
from .store import Database


@dataclass
class Session:
    db: Database = field(default_factory=lambda: Database(sch.Schema()))
    variables: dict = field(default_factory=dict)
    output_format: str = "table"
    base_dir: Path = field(default_factory=Path.cwd)


def new_session(output_format: str = "table", base_dir: Path | None = None) -> Session:
    return Session(output_format=output_format,
                   base_dir=base_dir or Path.cwd())


def element_set_text(db: Database, eset: alg.ElementSet, fmt: str = "table") -> str:
    concept = db.schema.concept(db.collection(eset.collection).concept)
    columns = ["identity"] + [d.name for d in concept.entity_dims]
    rows = []
    for elem in eset.elements(db):
        cells = [store.identity_text(elem.identity)]
        cells.extend(format_value(elem.entity[d.name]) for d in concept.entity_dims)
        rows.append(cells)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
        return buf.getvalue().rstrip("\n")
    table = format_table(columns, rows)
    return f"{table}\n({len(rows)} elements)"


def value_text(db: Database, value, fmt: str = "table") -> str:
    if isinstance(value, alg.ElementSet):
        return element_set_text(db, value, fmt)
    if isinstance(value, CubeResult):
        if fmt == "csv":
            return value.to_csv().rstrip("\n")
        return f"{value.to_table()}\n({len(value.rows)} rows)"
    return format_value(value)


def value_summary(db: Database, value) -> str:
    if isinstance(value, alg.ElementSet):
        return f"{len(value.members)} elements of {value.collection}"
    if isinstance(value, CubeResult):
        return f"cube with {len(value.rows)} rows x {value.arity} columns"
    return format_value(value)


def ensure_validated(db: Database):
    if db.schema.validated:
        return
    report = sch.validate(db.schema)
    if report.violations:
        details = "; ".join(str(v) for v in report.violations)
        raise SchemaError(f"schema validation failed: {details}")


def _concept_from_decl(decl: A.ConceptDecl) -> sch.Concept:
    identity = [sch.Dimension(f.name, f.type, sch.IDENTITY)
                for f in decl.identity_fields]
    entity = [sch.Dimension(f.name, f.type, sch.ENTITY)
              for f in decl.entity_fields]
    return sch.Concept(decl.name, decl.super_name or sch.ROOT, identity, entity)


def execute_statement(session: Session, stmt: A.Node) -> str:
    """Run one statement and return its report text."""
    db = session.db
    if isinstance(stmt, A.ConceptDecl):
        sch.define_concept(db.schema, _concept_from_decl(stmt))
        return f"ok: CONCEPT {stmt.name}"
    if isinstance(stmt, A.CreateTable):
        ensure_validated(db)
        store.create_collection(db, stmt.collection, stmt.concept,
                                stmt.parent, dict(stmt.bindings))
        return f"ok: TABLE {stmt.collection}"
    ensure_validated(db)
    ev = alg.Evaluator(db, session.variables)
    if isinstance(stmt, A.Assignment):
        value = ev.eval(stmt.expr)
        session.variables[stmt.name] = value
        return f"{stmt.name} = {value_summary(db, value)}"
    value = ev.eval(stmt)
    return value_text(db, value, session.output_format)


# --- meta-commands ------------------------------------------------------------


def schema_listing(db: Database) -> str:
    lines = []
    for c in db.schema.concepts.values():
        ident = ", ".join(f"{d.name}: {d.domain}" for d in c.identity_dims)
        ent = ", ".join(f"{d.name}: {d.domain}" for d in c.entity_dims)
        greater = ", ".join(
            f"{d.domain} (via {d.name})" for d in c.order_dims()
        )
        line = f"{c.name} IN {c.super_name} | identity [{ident}] entity [{ent}]"
        if greater:
            line += f" | greater: {greater}"
        lines.append(line)
    return "\n".join(lines) if lines else "(no concepts)"


def collections_listing(db: Database) -> str:
    lines = []
    for coll in db.collections.values():
        parts = [f"{coll.name}: {coll.concept}, {len(coll.elements)} elements"]
        if coll.parent_collection:
            parts.append(f"IN {coll.parent_collection}")
        for d, t in coll.greater_bindings.items():
            parts.append(f"{d} = {t}")
        lines.append(" | ".join(parts))
    return "\n".join(lines) if lines else "(no collections)"


QUIT = object()


def execute_meta(session: Session, line: str):
    """Dot-commands shared by scripts and the REPL; returns report text."""
    parts = line.split()
    cmd = parts[0]
    if cmd == ".quit":
        return QUIT
    if cmd == ".schema":
        return schema_listing(session.db)
    if cmd == ".collections":
        return collections_listing(session.db)
    if cmd == ".load":
        if len(parts) != 3:
            raise EngineError("usage: .load <csv-path> <collection>")
        path = session.base_dir / parts[1]
        count = csvio.import_csv(session.db, path, parts[2])
        return f"loaded {count} rows into {parts[2]}"
    if cmd == ".save":
        if len(parts) != 2:
            raise EngineError("usage: .save <path>")
        path = session.base_dir / parts[1]
        snap.snapshot_save(session.db, path)
        return f"saved {parts[1]}"
    if cmd == ".open":
        if len(parts) != 2:
            raise EngineError("usage: .open <path>")
        path = session.base_dir / parts[1]
        session.db = snap.snapshot_load(path)
        session.variables.clear()
        return f"opened {parts[1]}"
    raise EngineError(f"unknown meta-command {cmd!r}")


# --- scripts -------------------------------------------------------------------


@dataclass
class ScriptReport:
    entries: list = field(default_factory=list)   # (index, ok, text)
    failed: bool = False

    @property
    def output(self) -> str:
        return "\n".join(text for _, _, text in self.entries) + (
            "\n" if self.entries else "")


def _script_units(text: str):
    """Split a script into meta lines and COQL chunks, in order."""
    units = []
    chunk: list[str] = []
    chunk_start = 1
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.lstrip().startswith("."):
            if any(l.strip() for l in chunk):
                units.append(("coql", "\n".join(chunk), chunk_start))
            chunk = []
            chunk_start = lineno + 1
            units.append(("meta", line.strip(), lineno))
        else:
            if not chunk:
                chunk_start = lineno
            chunk.append(line)
    if any(l.strip() for l in chunk):
        units.append(("coql", "\n".join(chunk), chunk_start))
    return units


def run_script(session: Session, text: str) -> ScriptReport:
    """Execute statements and meta-commands in order; stop on first failure."""
    report = ScriptReport()
    index = 0
    for kind, payload, start_line in _script_units(text):
        if kind == "meta":
            index += 1
            try:
                out = execute_meta(session, payload)
            except EngineError as exc:
                report.entries.append(
                    (index, False, f"error: statement {index}: {exc}"))
                report.failed = True
                return report
            if out is QUIT:
                return report
            report.entries.append((index, True, out))
            continue
        parser = Parser(tokenize(payload, start_line))
        while True:
            index += 1
            try:
                if parser.at_eof():
                    index -= 1
                    break
                stmt = parser.parse_statement()
                out = execute_statement(session, stmt)
            except CoqlError as exc:
                report.entries.append((
                    index, False,
                    f"error: statement {index} at line {exc.line}, "
                    f"col {exc.column}: {exc.args[0]}"
                ))
                report.failed = True
                return report
            except EngineError as exc:
                report.entries.append(
                    (index, False, f"error: statement {index}: {exc}"))
                report.failed = True
                return report
            report.entries.append((index, True, out))
    return report


def run_script_file(session: Session, path) -> ScriptReport:
    path = Path(path)
    session.base_dir = path.parent
    return run_script(session, path.read_text())
