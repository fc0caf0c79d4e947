"""Whole-database text snapshots.

Layout: a version line, the schema as COQL concept declarations, the
collection definitions as CREATE TABLE statements, then one DATA block per
collection holding its elements as CSV records in insertion order.  Saving
is deterministic, so save - load - save produces byte-identical files.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from . import csvio
from . import schema as sch
from . import store
from .coql import ast as A
from .coql.parser import Parser
from .coql.render import render
from .coql.tokens import tokenize
from .errors import CorruptSnapshot, EngineError, VersionMismatch
from .store import Database

VERSION_LINE = "conceptdb-snapshot v1"
MAGIC = "conceptdb-snapshot"


def _concept_decl(c: sch.Concept) -> A.ConceptDecl:
    return A.ConceptDecl(
        c.name,
        None if c.super_name == sch.ROOT else c.super_name,
        [A.FieldDecl(d.domain, d.name) for d in c.identity_dims],
        [A.FieldDecl(d.domain, d.name) for d in c.entity_dims],
    )


def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, store.ComplexIdentity):
        return store.identity_text(v)
    return str(v)


def snapshot_text(db: Database) -> str:
    out = io.StringIO()
    out.write(VERSION_LINE + "\n")
    for c in db.schema.concepts.values():
        out.write(render(_concept_decl(c)) + "\n")
    for coll in db.collections.values():
        stmt = A.CreateTable(coll.name, coll.concept, coll.parent_collection,
                             list(coll.greater_bindings.items()))
        out.write(render(stmt) + "\n")
    for coll in db.collections.values():
        concept = db.schema.concept(coll.concept)
        out.write(f"DATA {coll.name} {len(coll.elements)}\n")
        w = csv.writer(out, lineterminator="\n")
        header = ([csvio.SUPER_COLUMN] if coll.parent_collection else []) \
            + [d.name for d in concept.identity_dims] \
            + [d.name for d in concept.entity_dims]
        w.writerow(header)
        for elem in coll.elements.values():
            row = []
            if coll.parent_collection:
                row.append(store.identity_text(elem.identity.parent()))
            own = elem.identity.segments[-1][1].values
            for v in own:
                row.append(_cell_text(v))
            for d in concept.entity_dims:
                row.append(_cell_text(elem.entity[d.name]))
            w.writerow(row)
    return out.getvalue()


def snapshot_save(db: Database, path) -> None:
    Path(path).write_text(snapshot_text(db))


def snapshot_loads(text: str) -> Database:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MAGIC):
        raise CorruptSnapshot("missing snapshot header line")
    if lines[0] != VERSION_LINE:
        raise VersionMismatch(f"unsupported snapshot version {lines[0]!r}")

    db = Database(sch.Schema())
    i = 1
    statement_lines: list[str] = []
    while i < len(lines) and not lines[i].startswith("DATA "):
        statement_lines.append(lines[i])
        i += 1
    try:
        parser = Parser(tokenize("\n".join(statement_lines), start_line=2))
        for stmt in parser.statements():
            if isinstance(stmt, A.ConceptDecl):
                identity = [sch.Dimension(f.name, f.type, sch.IDENTITY)
                            for f in stmt.identity_fields]
                entity = [sch.Dimension(f.name, f.type, sch.ENTITY)
                          for f in stmt.entity_fields]
                sch.define_concept(db.schema, sch.Concept(
                    stmt.name, stmt.super_name or sch.ROOT, identity, entity))
            elif isinstance(stmt, A.CreateTable):
                if not db.schema.validated:
                    report = sch.validate(db.schema)
                    if report.violations:
                        raise CorruptSnapshot(
                            "snapshot schema is invalid: "
                            + "; ".join(str(v) for v in report.violations)
                        )
                store.create_collection(db, stmt.collection, stmt.concept,
                                        stmt.parent, dict(stmt.bindings))
            else:
                raise CorruptSnapshot(
                    f"unexpected statement in snapshot: {render(stmt)}"
                )
    except (VersionMismatch, CorruptSnapshot):
        raise
    except EngineError as exc:
        raise CorruptSnapshot(str(exc)) from exc

    while i < len(lines):
        line = lines[i]
        if not line.startswith("DATA "):
            raise CorruptSnapshot(f"expected a DATA block, found {line!r}")
        try:
            _, name, count_text = line.split()
            count = int(count_text)
        except ValueError:
            raise CorruptSnapshot(f"malformed DATA line {line!r}") from None
        i += 1
        block_end = i
        records_needed = count + 1  # header + rows
        reader = csv.reader(iter(lines[i:]))
        records = []
        for rec in reader:
            records.append(rec)
            block_end += 1
            if len(records) == records_needed:
                break
        if len(records) != records_needed:
            raise CorruptSnapshot(f"DATA block for {name!r} is truncated")
        i = block_end
        try:
            _load_block(db, name, records)
        except EngineError as exc:
            if isinstance(exc, CorruptSnapshot):
                raise
            raise CorruptSnapshot(f"collection {name!r}: {exc}") from exc
    return db


def _load_block(db: Database, collection: str, records: list[list[str]]):
    coll = db.collection(collection)
    concept = db.schema.concept(coll.concept)
    header = records[0]
    expected = ([csvio.SUPER_COLUMN] if coll.parent_collection else []) \
        + [d.name for d in concept.identity_dims] \
        + [d.name for d in concept.entity_dims]
    if header != expected:
        raise CorruptSnapshot(
            f"collection {collection!r}: header {header} != {expected}"
        )
    for row in records[1:]:
        idx = 0
        parent = None
        if coll.parent_collection:
            parent = csvio.parse_identity_text(
                db, db.collection(coll.parent_collection).concept, row[0])
            idx = 1
        segment = []
        for d in concept.identity_dims:
            raw = row[idx]
            idx += 1
            if d.is_primitive:
                segment.append(csvio.parse_primitive_text(
                    raw, d.domain, f"{concept.name}.{d.name}"))
            else:
                segment.append(csvio.parse_reference_text(db, d.domain, raw))
        entity = {}
        for d in concept.entity_dims:
            raw = row[idx]
            idx += 1
            if raw == "":
                entity[d.name] = None
            elif d.is_primitive:
                entity[d.name] = csvio.parse_primitive_text(
                    raw, d.domain, f"{concept.name}.{d.name}")
            else:
                entity[d.name] = csvio.parse_reference_text(db, d.domain, raw)
        store.insert(db, collection, parent, segment, entity)


def snapshot_load(path) -> Database:
    return snapshot_loads(Path(path).read_text())
