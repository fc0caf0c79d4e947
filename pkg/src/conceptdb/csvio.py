"""CSV ingestion and the textual identity/reference syntax.

Reference cells hold '/'-joined identity segments with ';'-separated fields
inside a segment; nested references are bracketed, e.g. ``[B1/A1];[22]``.
Imports are all-or-nothing per file: the first bad row rolls back every
insert the file made.
"""

from __future__ import annotations

import csv
from pathlib import Path

from . import schema as sch
from . import store
from .errors import AmbiguousBinding, DanglingReference, EngineError, TypeMismatch
from .store import ComplexIdentity, Database, IdentitySegment

SUPER_COLUMN = "super"


def split_top(text: str, sep: str) -> list[str]:
    """Split on a separator, ignoring bracketed nested references."""
    parts = []
    depth = 0
    cur = []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def parse_primitive_text(text: str, ptype: sch.PrimitiveType, context: str):
    try:
        if ptype.kind == "INT":
            return int(text)
        if ptype.kind == "DOUBLE":
            return float(text)
        if ptype.kind == "BOOL":
            if text == "true":
                return True
            if text == "false":
                return False
            raise ValueError(text)
        return text
    except ValueError:
        raise TypeMismatch(f"{context}: cannot read {text!r} as {ptype}") from None


def parse_identity_text(db: Database, concept_name: str, text: str) -> ComplexIdentity:
    """Parse an identity literal against a concrete concept's segment types."""
    chain = sch.inclusion_chain(db.schema, concept_name)
    raw_segments = split_top(text, "/")
    if len(raw_segments) != len(chain):
        raise TypeMismatch(
            f"identity {text!r} has {len(raw_segments)} segment(s); concept "
            f"{concept_name!r} needs {len(chain)}"
        )
    segments = []
    for cname, raw in zip(chain, raw_segments):
        concept = db.schema.concept(cname)
        if not concept.identity_dims:
            fields = [] if raw == "" else split_top(raw, ";")
        else:
            fields = split_top(raw, ";")
        if len(fields) != len(concept.identity_dims):
            raise TypeMismatch(
                f"segment {raw!r} has {len(fields)} field(s); concept "
                f"{cname!r} needs {len(concept.identity_dims)}"
            )
        values = []
        for d, f in zip(concept.identity_dims, fields):
            context = f"{cname}.{d.name}"
            if d.is_primitive:
                values.append(parse_primitive_text(f, d.domain, context))
            else:
                if not (f.startswith("[") and f.endswith("]")):
                    raise TypeMismatch(
                        f"{context}: nested reference must be bracketed, got {f!r}"
                    )
                values.append(parse_reference_text(db, d.domain, f[1:-1]))
        segments.append((cname, IdentitySegment(tuple(values))))
    return ComplexIdentity(tuple(segments))


def parse_reference_text(db: Database, domain: str, text: str) -> ComplexIdentity:
    """Parse a reference that may name the domain concept or any inclusion
    descendant; descendants are told apart by segment count and, when still
    ambiguous, by which one actually exists in the database."""
    depth = len(split_top(text, "/"))
    candidates = [
        name for name in db.schema.concepts
        if sch.is_inclusion_descendant(db.schema, name, domain)
        and sch.inclusion_depth(db.schema, name) == depth
    ]
    parsed = []
    for name in candidates:
        try:
            parsed.append(parse_identity_text(db, name, text))
        except TypeMismatch:
            continue
    if not parsed:
        raise TypeMismatch(
            f"cannot read {text!r} as a reference to {domain!r}"
        )
    if len(parsed) == 1:
        return parsed[0]
    existing = [
        ident for ident in parsed
        if any(ident in coll.elements
               for coll in db.collections_of(ident.concept))
    ]
    if len(existing) == 1:
        return existing[0]
    if not existing:
        raise DanglingReference(
            f"reference {text!r} matches no stored element under {domain!r}"
        )
    raise AmbiguousBinding(
        f"reference {text!r} is ambiguous between "
        f"{sorted(i.concept for i in existing)}"
    )


def import_csv(db_or_session, path, collection: str,
               column_map: dict | None = None) -> int:
    """Insert one element per CSV row, in file order; returns the count.

    The header row is mandatory.  ``column_map`` renames CSV headers to
    dimension names (identity is the default); a ``super`` column carries
    the parent identity for bound collections.  Empty cells are NULL.
    """
    db: Database = getattr(db_or_session, "db", db_or_session)
    path = Path(path)
    coll = db.collection(collection)
    concept = db.schema.concept(coll.concept)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TypeMismatch(f"{path}: missing header row")
    header = rows[0]
    mapping = column_map or {}
    targets = [mapping.get(h, h) for h in header]

    dim_by_name = {d.name: d for d in concept.dims()}
    for t in targets:
        if t != SUPER_COLUMN and t not in dim_by_name:
            raise TypeMismatch(
                f"{path}: column {t!r} is not a dimension of {concept.name!r}"
            )

    inserted: list[ComplexIdentity] = []
    rownum = 1
    try:
        for rownum, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise TypeMismatch(
                    f"{len(row)} cells in a {len(header)}-column file"
                )
            parent = None
            cells = {}
            for t, raw in zip(targets, row):
                if t == SUPER_COLUMN:
                    if coll.parent_collection is None:
                        raise TypeMismatch(
                            f"collection {collection!r} has no parent"
                        )
                    if raw == "":
                        raise TypeMismatch("empty super column")
                    parent = parse_identity_text(
                        db, db.collection(coll.parent_collection).concept, raw
                    )
                    continue
                d = dim_by_name[t]
                if raw == "":
                    cells[t] = None
                elif d.is_primitive:
                    cells[t] = parse_primitive_text(
                        raw, d.domain, f"{concept.name}.{t}")
                else:
                    cells[t] = parse_reference_text(db, d.domain, raw)
            segment = []
            for d in concept.identity_dims:
                if d.name not in cells or cells[d.name] is None:
                    raise TypeMismatch(f"identity column {d.name!r} missing or empty")
                segment.append(cells.pop(d.name))
            identity = store.insert(db, collection, parent, segment, cells)
            inserted.append(identity)
    except EngineError as exc:
        for ident in reversed(inserted):
            coll.elements.pop(ident, None)
        raise type(exc)(f"{path.name} row {rownum}: {exc}") from exc
    return len(inserted)
